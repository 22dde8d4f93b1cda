#include "ranagent/tsa/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include <Eigen/Dense>

#include "ranagent/core/errors.hpp"
#include "ranagent/tsa/stats.hpp"

namespace ranagent::tsa {

namespace {

constexpr int kMaxRefits = 3;
constexpr Timestamp kMinDiurnalSpan = 2 * kDaySeconds;

// Sample indices where a new calendar day starts.
std::vector<std::size_t> day_boundaries(const Series& series) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].t / kDaySeconds != series[i - 1].t / kDaySeconds) out.push_back(i);
  }
  return out;
}

class PrefixSums {
public:
  // Values are centred on `offset` to keep the sums of squares well conditioned.
  PrefixSums(const std::vector<double>& v, double offset)
      : offset_(offset), sum_(v.size() + 1, 0.0), sq_(v.size() + 1, 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = v[i] - offset;
      sum_[i + 1] = sum_[i] + x;
      sq_[i + 1] = sq_[i] + x * x;
    }
  }

  double mean(std::size_t a, std::size_t b) const {
    return offset_ + (sum_[b] - sum_[a]) / static_cast<double>(b - a);
  }

  // Sum of squared deviations from the segment mean.
  double scatter(std::size_t a, std::size_t b) const {
    const double s = sum_[b] - sum_[a];
    return std::max(0.0, sq_[b] - sq_[a] - s * s / static_cast<double>(b - a));
  }

private:
  double offset_;
  std::vector<double> sum_;
  std::vector<double> sq_;
};

// Noise sigma for comparing [a, b) with [b, c): the pooled within-segment
// standard deviation, never below the global robust estimate.
double pair_sigma(const PrefixSums& ps, std::size_t a, std::size_t b, std::size_t c, double global) {
  const double dof = static_cast<double>(c - a) - 2.0;
  if (dof <= 0.0) return global;
  return std::max(global, std::sqrt((ps.scatter(a, b) + ps.scatter(b, c)) / dof));
}

double t_stat(const PrefixSums& ps, std::size_t a, std::size_t b, std::size_t c, double sigma) {
  const double n1 = static_cast<double>(b - a);
  const double n2 = static_cast<double>(c - b);
  return (ps.mean(b, c) - ps.mean(a, b)) / (sigma * std::sqrt(1.0 / n1 + 1.0 / n2));
}

// Least-squares single split of [a, c) with both parts at least m long.
std::size_t best_split(const PrefixSums& ps, std::size_t a, std::size_t c, std::size_t m) {
  std::size_t best = a + m;
  double best_gain = -1.0;
  for (std::size_t b = a + m; b + m <= c; ++b) {
    const double n1 = static_cast<double>(b - a);
    const double n2 = static_cast<double>(c - b);
    const double d = ps.mean(b, c) - ps.mean(a, b);
    const double gain = n1 * n2 / (n1 + n2) * d * d;
    if (gain > best_gain) {
      best_gain = gain;
      best = b;
    }
  }
  return best;
}

// Pass 1: sequential CUSUM scan producing confirmed candidate onsets.
std::vector<std::size_t> scan(const std::vector<double>& v, const PrefixSums& ps, double sigma,
                              const ChangePointParams& params) {
  const std::size_t n = v.size();
  const auto m = static_cast<std::size_t>(params.min_segment);
  const double h = params.threshold_sigmas;
  const double k = params.drift_sigmas;
  const auto persistence = static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(m)));

  std::vector<std::size_t> found;
  std::size_t seg_start = 0;
  while (seg_start + 2 * m <= n) {
    const double ref = ps.mean(seg_start, seg_start + m);
    double up = 0.0;
    double down = 0.0;
    std::size_t up_run = seg_start + m;
    std::size_t down_run = seg_start + m;
    bool confirmed = false;
    for (std::size_t i = seg_start + m; i < n && !confirmed; ++i) {
      const double z = (v[i] - ref) / sigma;
      up = std::max(0.0, up + z - k);
      if (up == 0.0) up_run = i + 1;
      down = std::max(0.0, down - z - k);
      if (down == 0.0) down_run = i + 1;

      for (int side = 0; side < 2 && !confirmed; ++side) {
        double& stat = side == 0 ? up : down;
        std::size_t& run = side == 0 ? up_run : down_run;
        if (stat <= h) continue;
        // The run may start early on small same-sign noise; re-locate the
        // onset by a least-squares split before confirming it.
        const std::size_t onset = best_split(ps, seg_start, std::min(n, std::max(run, seg_start + m) + 2 * m), m);
        if (onset + m <= n) {
          const double t = t_stat(ps, seg_start, onset, onset + m, sigma);
          const double pre = ps.mean(seg_start, onset);
          const double mid = 0.5 * (pre + ps.mean(onset, onset + m));
          std::size_t beyond = 0;
          for (std::size_t j = onset; j < onset + m; ++j) {
            if ((t > 0.0 && v[j] > mid) || (t < 0.0 && v[j] < mid)) ++beyond;
          }
          const bool right_side = (side == 0) == (t > 0.0);
          if (right_side && std::abs(t) >= h && beyond >= persistence) {
            found.push_back(onset);
            seg_start = onset;
            confirmed = true;
            break;
          }
        }
        stat = 0.0;
        run = i + 1;
      }
    }
    if (!confirmed) break;
  }
  return found;
}

}  // namespace

std::string_view to_string(Direction direction) { return direction == Direction::up ? "up" : "down"; }

double DiurnalFit::seasonal(Timestamp t) const {
  if (!fitted) return 0.0;
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(t % kDaySeconds) / kDaySeconds;
  return sin_coef * std::sin(phase) + cos_coef * std::cos(phase);
}

DiurnalFit fit_diurnal(const Series& series, const std::vector<std::size_t>& boundaries) {
  DiurnalFit fit;
  if (series.size() < 4) return fit;
  const Timestamp step = series[1].t - series[0].t;
  if (series.back().t - series.front().t + step < kMinDiurnalSpan) return fit;

  const auto n = static_cast<Eigen::Index>(series.size());
  const auto levels = static_cast<Eigen::Index>(boundaries.size() + 1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, levels + 2);
  Eigen::VectorXd y(n);
  std::size_t segment = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    while (segment < boundaries.size() && static_cast<std::size_t>(i) >= boundaries[segment]) ++segment;
    const double phase =
        2.0 * std::numbers::pi * static_cast<double>(series[static_cast<std::size_t>(i)].t % kDaySeconds) /
        kDaySeconds;
    x(i, static_cast<Eigen::Index>(segment)) = 1.0;
    x(i, levels) = std::sin(phase);
    x(i, levels + 1) = std::cos(phase);
    y(i) = series[static_cast<std::size_t>(i)].value;
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  fit.level = beta(0);
  fit.sin_coef = beta(levels);
  fit.cos_coef = beta(levels + 1);
  fit.fitted = true;
  return fit;
}

Series remove_diurnal(const Series& series, const DiurnalFit& fit) {
  Series out = series;
  for (auto& p : out) p.value -= fit.seasonal(p.t);
  return out;
}

std::vector<std::size_t> segment_indices(const std::vector<double>& values, double sigma,
                                         const ChangePointParams& params) {
  const auto m = static_cast<std::size_t>(params.min_segment);
  if (values.size() < 2 * m) return {};
  sigma = std::max(sigma, mad_floor(median(values)));
  const PrefixSums ps(values, median(values));
  std::vector<std::size_t> cps = scan(values, ps, sigma, params);

  // Pass 2: re-locate each onset between its neighbours and prune the
  // weakest until every remaining change point clears the threshold.
  while (!cps.empty()) {
    for (std::size_t j = 0; j < cps.size(); ++j) {
      const std::size_t a = j == 0 ? 0 : cps[j - 1];
      const std::size_t c = j + 1 == cps.size() ? values.size() : cps[j + 1];
      if (c - a >= 2 * m) cps[j] = best_split(ps, a, c, m);
    }
    std::size_t weakest = 0;
    double weakest_t = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cps.size(); ++j) {
      const std::size_t a = j == 0 ? 0 : cps[j - 1];
      const std::size_t c = j + 1 == cps.size() ? values.size() : cps[j + 1];
      const double t = (cps[j] - a < m || c - cps[j] < m)
                           ? 0.0
                           : std::abs(t_stat(ps, a, cps[j], c, pair_sigma(ps, a, cps[j], c, sigma)));
      if (t < weakest_t) {
        weakest_t = t;
        weakest = j;
      }
    }
    if (weakest_t >= params.threshold_sigmas) break;
    cps.erase(cps.begin() + static_cast<std::ptrdiff_t>(weakest));
  }
  return cps;
}

std::vector<ChangePoint> detect_change_points(const Series& series, const ChangePointParams& params,
                                              const SeriesId& id) {
  return analyze_shifts(series, params, id).change_points;
}

ShiftAnalysis analyze_shifts(const Series& series, const ChangePointParams& params, const SeriesId& id) {
  if (params.min_segment < 1 || params.threshold_sigmas <= 0.0 || params.drift_sigmas < 0.0) {
    throw Error(Errc::invalid_argument, "invalid change point parameters", "params");
  }
  const auto m = static_cast<std::size_t>(params.min_segment);
  if (series.size() < 2 * m) {
    throw Error(Errc::series_too_short,
                "series of " + std::to_string(series.size()) + " samples is shorter than 2 x min_segment",
                id.element_id);
  }

  // Day-level offsets keep a shift from leaking into the first sinusoid fit.
  DiurnalFit fit = fit_diurnal(series, day_boundaries(series));
  std::vector<double> adjusted = values_of(remove_diurnal(series, fit));
  double sigma = robust_sigma(adjusted);
  std::vector<std::size_t> cps = segment_indices(adjusted, sigma, params);
  for (int round = 0; fit.fitted && !cps.empty() && round < kMaxRefits; ++round) {
    // Refit the sinusoid with one level per segment so shifts do not leak
    // into the seasonal coefficients.
    fit = fit_diurnal(series, cps);
    adjusted = values_of(remove_diurnal(series, fit));
    sigma = robust_sigma(adjusted);
    auto next = segment_indices(adjusted, sigma, params);
    if (next == cps) break;
    cps = std::move(next);
  }

  sigma = std::max(sigma, mad_floor(median(adjusted)));
  const PrefixSums ps(adjusted, median(adjusted));
  ShiftAnalysis result;
  result.fit = fit;
  result.sigma = sigma;
  auto& out = result.change_points;
  for (std::size_t j = 0; j < cps.size(); ++j) {
    const std::size_t a = j == 0 ? 0 : cps[j - 1];
    const std::size_t c = j + 1 == cps.size() ? adjusted.size() : cps[j + 1];
    ChangePoint cp;
    cp.element_id = id.element_id;
    cp.level = id.level;
    cp.kpi = id.kpi;
    cp.onset = series[cps[j]].t;
    cp.pre_mean = ps.mean(a, cps[j]);
    cp.post_mean = ps.mean(cps[j], c);
    cp.magnitude = cp.post_mean - cp.pre_mean;
    cp.direction = cp.magnitude >= 0.0 ? Direction::up : Direction::down;
    cp.sigma = pair_sigma(ps, a, cps[j], c, sigma);
    cp.score = std::abs(t_stat(ps, a, cps[j], c, cp.sigma));
    out.push_back(std::move(cp));
  }
  return result;
}

}  // namespace ranagent::tsa
