#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "ranagent/core/errors.hpp"
#include "ranagent/tsa/changepoint.hpp"

using namespace ranagent;
using namespace ranagent::tsa;

TEST_CASE("constant series has no change points for any threshold") {
  for (double h : {0.5, 1.0, 5.0, 20.0}) {
    ChangePointParams p;
    p.threshold_sigmas = h;
    CHECK(detect_change_points(fixtures::make_series(std::vector<double>(100, 42.0)), p).empty());
  }
}

TEST_CASE("+8 sigma step at index 50 in unit noise") {
  auto v = fixtures::noise(2024, 100);
  fixtures::add_step(v, 50, 8.0);
  auto cps = detect_change_points(fixtures::make_series(v), {}, {"c1", Level::cell, "dl_throughput_mbps"});
  REQUIRE(cps.size() == 1);
  const auto index = cps[0].onset / 900;
  CHECK(index >= 48);
  CHECK(index <= 52);
  CHECK(cps[0].direction == Direction::up);
  CHECK(cps[0].magnitude > 0.0);
  CHECK(cps[0].element_id == "c1");
  CHECK(std::abs(index - static_cast<long>(fixtures::brute_force_split(v, 8))) <= 2);
}

TEST_CASE("two opposite steps give two change points with the right directions") {
  auto v = fixtures::noise(77, 100);
  fixtures::add_step(v, 30, 8.0);
  fixtures::add_step(v, 70, -8.0);
  auto cps = detect_change_points(fixtures::make_series(v));
  REQUIRE(cps.size() == 2);
  CHECK(std::abs(cps[0].onset / 900 - 30) <= 2);
  CHECK(cps[0].direction == Direction::up);
  CHECK(std::abs(cps[1].onset / 900 - 70) <= 2);
  CHECK(cps[1].direction == Direction::down);
  CHECK(cps[1].magnitude < 0.0);
}

TEST_CASE("series shorter than two segments is rejected") {
  try {
    detect_change_points(fixtures::make_series(std::vector<double>(15, 1.0)));
    FAIL("expected series_too_short");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::series_too_short);
  }
  CHECK_NOTHROW(detect_change_points(fixtures::make_series(std::vector<double>(16, 1.0))));
}

TEST_CASE("shift equivariance: adding a constant moves only the segment means") {
  auto v = fixtures::noise(5, 200, 2.0, 50.0);
  fixtures::add_step(v, 90, -14.0);
  auto base = detect_change_points(fixtures::make_series(v));
  REQUIRE(base.size() == 1);
  for (double c : {-40.0, 3.5, 1000.0}) {
    auto shifted_values = v;
    for (auto& x : shifted_values) x += c;
    auto shifted = detect_change_points(fixtures::make_series(shifted_values));
    REQUIRE(shifted.size() == base.size());
    CHECK(shifted[0].onset == base[0].onset);
    CHECK(shifted[0].direction == base[0].direction);
    CHECK(shifted[0].score == doctest::Approx(base[0].score).epsilon(1e-9));
    CHECK(shifted[0].magnitude == doctest::Approx(base[0].magnitude).epsilon(1e-9));
    CHECK(shifted[0].pre_mean == doctest::Approx(base[0].pre_mean + c).epsilon(1e-9));
    CHECK(shifted[0].post_mean == doctest::Approx(base[0].post_mean + c).epsilon(1e-9));
  }
}

TEST_CASE("onsets agree with the brute-force split on 100 seeded single steps") {
  int agree = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto v = fixtures::noise(seed * 31, 160);
    const std::size_t at = 20 + seed % 120;
    const double size = (seed % 2 ? 1.0 : -1.0) * (5.0 + static_cast<double>(seed % 4));
    fixtures::add_step(v, at, size);
    auto cps = detect_change_points(fixtures::make_series(v));
    const auto oracle = static_cast<long>(fixtures::brute_force_split(v, 8));
    if (cps.size() == 1 && std::abs(cps[0].onset / 900 - oracle) <= 2) ++agree;
  }
  CHECK(agree >= 95);
}

TEST_CASE("stationary noise stays quiet at the default threshold") {
  int false_alarms = 0;
  std::size_t samples = 0;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    auto v = fixtures::noise(seed * 7919, 672, 3.0, 80.0);
    samples += v.size();
    false_alarms += static_cast<int>(detect_change_points(fixtures::make_series(v)).size());
  }
  // Target is below one false alarm per 10,000 samples (40k samples here).
  CHECK(static_cast<double>(false_alarms) / static_cast<double>(samples) < 1e-4);
}

TEST_CASE("a daily cycle is not reported as a shift") {
  std::vector<double> v;
  for (std::int64_t i = 0; i < 672; ++i) {
    const double phase = 2.0 * M_PI * static_cast<double>((i * 900) % 86400) / 86400.0;
    v.push_back(100.0 + 30.0 * std::sin(phase) + 6.0 * fixtures::gaussian(99, i));
  }
  CHECK(detect_change_points(fixtures::make_series(v)).empty());

  fixtures::add_step(v, 400, -36.0);
  auto cps = detect_change_points(fixtures::make_series(v));
  REQUIRE(cps.size() == 1);
  CHECK(std::abs(cps[0].onset / 900 - 400) <= 2);
  CHECK(cps[0].magnitude == doctest::Approx(-36.0).epsilon(0.1));
}

TEST_CASE("diurnal fit needs at least two days of data") {
  std::vector<double> v;
  for (std::int64_t i = 0; i < 192; ++i) {
    const double phase = 2.0 * M_PI * static_cast<double>((i * 900) % 86400) / 86400.0;
    v.push_back(10.0 + 4.0 * std::sin(phase) - 2.0 * std::cos(phase));
  }
  auto fit = fit_diurnal(fixtures::make_series(v));
  CHECK(fit.fitted);
  CHECK(fit.level == doctest::Approx(10.0));
  CHECK(fit.sin_coef == doctest::Approx(4.0));
  CHECK(fit.cos_coef == doctest::Approx(-2.0));
  v.resize(150);
  CHECK_FALSE(fit_diurnal(fixtures::make_series(v)).fitted);
}
