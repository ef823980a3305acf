#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace qtomo {

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|. Inputs need not be sorted.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS statistic needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Survival function of the Kolmogorov distribution, Q(x) = 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2).
inline double kolmogorov_survival(double x) {
  if (x < 0.2) return 1.0;  // 1 - Q(0.2) < 1e-12
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * x * x);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Asymptotic p-value of a two-sample KS statistic (with the Stephens small-sample correction).
inline double ks_pvalue(double d, std::size_t n1, std::size_t n2) {
  const double ne = static_cast<double>(n1) * static_cast<double>(n2) / static_cast<double>(n1 + n2);
  const double root = std::sqrt(ne);
  return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
  double density = 0.0;
};

/**
 * Equal-width histogram over [min, max] of the values with densities
 * normalized to unit integral. A degenerate range is widened to +-0.5.
 */
inline std::vector<HistogramBin> histogram(const std::vector<double>& values, int bins) {
  if (values.empty()) throw std::invalid_argument("histogram needs at least one value");
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    out[static_cast<std::size_t>(b)].left = lo + b * width;
    out[static_cast<std::size_t>(b)].right = b + 1 == bins ? hi : lo + (b + 1) * width;
  }
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
    out[std::min(b, out.size() - 1)].count++;
  }
  const double total = static_cast<double>(values.size());
  for (auto& bin : out) bin.density = static_cast<double>(bin.count) / (total * (bin.right - bin.left));
  return out;
}

}  // namespace qtomo
