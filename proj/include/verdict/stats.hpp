#pragma once

#include <cstdint>

namespace verdict::stats {

// Two-sided Fisher exact test on the 2x2 table
//   [a_wins, a_n - a_wins]
//   [b_wins, b_n - b_wins]
// summing every table with the observed margins whose probability does not
// exceed the observed one (relative slack 1e-7, as is conventional).
double fisher_exact_two_sided(std::uint64_t a_wins, std::uint64_t a_n, std::uint64_t b_wins,
                              std::uint64_t b_n);

// Pooled two-proportion z-test, two-sided normal p-value.
double two_proportion_z(std::uint64_t a_wins, std::uint64_t a_n, std::uint64_t b_wins,
                        std::uint64_t b_n);

}  // namespace verdict::stats
