#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace crowdsense {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

/// Sums kept in insertion order, so merging the same blocks in the same order
/// reproduces the same bits.
struct Moments {
  long n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double v) {
    ++n;
    sum += v;
    sum_sq += v * v;
  }
  void merge(const Moments& o) {
    n += o.n;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq - n * m * m) / (n - 1));
  }
  Estimate estimate() const { return {mean(), n > 0 ? std::sqrt(variance() / n) : 0.0}; }
};

inline Estimate estimate_of(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.add(x);
  return m.estimate();
}

}  // namespace crowdsense
