// Binomial estimates and small statistics helpers.
#ifndef JBASIM_STATS_HPP
#define JBASIM_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace jbasim {

struct BinomialEstimate {
  std::size_t successes = 0;
  std::size_t trials = 0;
  double p = 0.0;
  double err = 0.0;  // one-sigma half width
};

/// Normal-approximation error bar, switching to the Wilson interval half width
/// when fewer than 20 successes or failures were counted.
inline BinomialEstimate binomial(std::size_t successes, std::size_t trials) {
  BinomialEstimate e;
  e.successes = successes;
  e.trials = trials;
  if (trials == 0) return e;
  const double n = static_cast<double>(trials);
  e.p = static_cast<double>(successes) / n;
  if (std::min(successes, trials - successes) >= 20) {
    e.err = std::sqrt(e.p * (1.0 - e.p) / n);
  } else {
    constexpr double z = 1.0;
    const double denom = 1.0 + z * z / n;
    e.err = z / denom * std::sqrt(e.p * (1.0 - e.p) / n + z * z / (4.0 * n * n));
  }
  return e;
}

}  // namespace jbasim

#endif  // JBASIM_STATS_HPP
