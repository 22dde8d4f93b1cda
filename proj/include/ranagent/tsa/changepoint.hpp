#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ranagent/core/series.hpp"

namespace ranagent::tsa {

enum class Direction { up, down };
std::string_view to_string(Direction direction);

// Identity of the analysed series, copied into results.
struct SeriesId {
  std::string element_id;
  Level level = Level::cell;
  std::string kpi;
};

struct ChangePointParams {
  int min_segment = 8;            // intervals
  double threshold_sigmas = 5.0;  // CUSUM decision interval and confirmation t
  double drift_sigmas = 0.5;      // CUSUM allowance k
};

struct ChangePoint {
  std::string element_id;
  Level level = Level::cell;
  std::string kpi;
  Timestamp onset = 0;
  Direction direction = Direction::up;
  double magnitude = 0.0;  // post_mean - pre_mean, KPI units
  double score = 0.0;      // |t| of the adjacent-segment mean difference
  double pre_mean = 0.0;
  double post_mean = 0.0;
  double sigma = 0.0;  // noise sigma used for scoring
};

// Diurnal component fitted by least squares: level + a*sin + b*cos of the
// 24 h phase. Only fitted when the series spans at least two days; shorter
// series get a zero sinusoid.
struct DiurnalFit {
  double level = 0.0;
  double sin_coef = 0.0;
  double cos_coef = 0.0;
  bool fitted = false;

  double seasonal(Timestamp t) const;
};

// Fits level + sinusoid, with one extra level per segment when `boundaries`
// (ascending sample indices) split the series.
DiurnalFit fit_diurnal(const Series& series, const std::vector<std::size_t>& boundaries = {});

// Series minus the fitted sinusoid (the level is kept).
Series remove_diurnal(const Series& series, const DiurnalFit& fit);

// Two-sided CUSUM on diurnal-adjusted values. Alarms are confirmed by a
// t-test of the next min_segment samples against the current segment, then
// all change points are re-located by a least-squares split between their
// neighbours and pruned until every adjacent-segment t is at least
// threshold_sigmas.
//
// Errors: Error(series_too_short) when size < 2 * min_segment.
std::vector<ChangePoint> detect_change_points(const Series& series, const ChangePointParams& params = {},
                                              const SeriesId& id = {});

struct ShiftAnalysis {
  std::vector<ChangePoint> change_points;
  DiurnalFit fit;  // final fit, one level per detected segment
  double sigma = 0.0;
};

// detect_change_points plus the diurnal fit and noise sigma it settled on.
ShiftAnalysis analyze_shifts(const Series& series, const ChangePointParams& params = {}, const SeriesId& id = {});

// Change point search on raw values (no diurnal handling); returns sample
// indices of the onsets. Exposed for tests.
std::vector<std::size_t> segment_indices(const std::vector<double>& values, double sigma,
                                         const ChangePointParams& params);

}  // namespace ranagent::tsa
