#include "verdict/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace verdict::stats {

namespace {

double log_choose(std::uint64_t n, std::uint64_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

void check(std::uint64_t wins, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("arm with n = 0");
  if (wins > n) throw std::invalid_argument("wins exceed n");
}

}  // namespace

double fisher_exact_two_sided(std::uint64_t a_wins, std::uint64_t a_n, std::uint64_t b_wins,
                              std::uint64_t b_n) {
  check(a_wins, a_n);
  check(b_wins, b_n);
  const std::uint64_t total = a_n + b_n;
  const std::uint64_t wins = a_wins + b_wins;
  // Support of the top-left cell given the margins.
  const std::uint64_t lo = wins > b_n ? wins - b_n : 0;
  const std::uint64_t hi = std::min(wins, a_n);
  const double log_denom = log_choose(total, wins);
  auto log_p = [&](std::uint64_t k) {
    return log_choose(a_n, k) + log_choose(b_n, wins - k) - log_denom;
  };
  const double observed = log_p(a_wins);
  // Sum in log space relative to the largest term to keep precision.
  std::vector<double> terms;
  for (std::uint64_t k = lo; k <= hi; ++k) {
    const double lp = log_p(k);
    if (lp <= observed + 1e-7) terms.push_back(lp);
  }
  const double peak = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double lp : terms) sum += std::exp(lp - peak);
  return std::min(1.0, std::exp(peak) * sum);
}

double two_proportion_z(std::uint64_t a_wins, std::uint64_t a_n, std::uint64_t b_wins,
                        std::uint64_t b_n) {
  check(a_wins, a_n);
  check(b_wins, b_n);
  const double pa = static_cast<double>(a_wins) / a_n;
  const double pb = static_cast<double>(b_wins) / b_n;
  const double pooled = static_cast<double>(a_wins + b_wins) / (a_n + b_n);
  const double se = std::sqrt(pooled * (1 - pooled) * (1.0 / a_n + 1.0 / b_n));
  if (se == 0.0) return 1.0;
  const double z = std::abs(pa - pb) / se;
  return std::erfc(z / std::sqrt(2.0));
}

}  // namespace verdict::stats
