#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ato {

inline constexpr double kZTwoSided95 = 1.959963984540054;   // 97.5% normal quantile
inline constexpr double kZOneSided99 = 2.3263478740408408;  // 99% normal quantile

struct SummaryStat {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // sample variance
  double se = 0.0;

  double ci95_half() const { return kZTwoSided95 * se; }
  // 99% one-sided upper confidence limit for the mean.
  double upper99() const { return mean + kZOneSided99 * se; }
};

inline SummaryStat summarize(std::span<const double> values) {
  SummaryStat s;
  s.n = values.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.variance = sq / static_cast<double>(s.n - 1);
    s.se = std::sqrt(s.variance / static_cast<double>(s.n));
  }
  return s;
}

inline SummaryStat summarize(const std::vector<double>& values) {
  return summarize(std::span<const double>(values.data(), values.size()));
}

}  // namespace ato
