#pragma once

#include <span>
#include <vector>

namespace ranagent::tsa {

// Consistency constant turning a MAD into a normal standard deviation.
inline constexpr double kMadScale = 1.4826;

// Median of `values`; the input is copied. Even sizes average the middle pair.
double median(std::span<const double> values);

// Median absolute deviation around `center`.
double mad(std::span<const double> values, double center);

double mean(std::span<const double> values);

// Floor substituted for a zero MAD so constant windows give zero scores.
double mad_floor(double median_value);

// Noise sigma estimated from first differences: 1.4826 * MAD(diff) / sqrt(2).
// Insensitive to a few level shifts. Exact-zero differences (constant or
// saturated stretches) are skipped; 0 when fewer than 2 differences remain.
double robust_sigma(std::span<const double> values);

}  // namespace ranagent::tsa
