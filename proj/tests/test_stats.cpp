#include <doctest.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <stdexcept>

#include "verdict/stats.hpp"

using namespace verdict::stats;
namespace mp = boost::multiprecision;

namespace {

mp::cpp_int choose(unsigned n, unsigned k) {
  mp::cpp_int r = 1;
  for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Exact two-sided Fisher p-value from integer hypergeometric counts.
double fisher_oracle(unsigned a, unsigned an, unsigned b, unsigned bn) {
  const unsigned w = a + b;
  const unsigned lo = w > bn ? w - bn : 0;
  const unsigned hi = std::min(w, an);
  const mp::cpp_int observed = choose(an, a) * choose(bn, b);
  mp::cpp_int num = 0;
  for (unsigned k = lo; k <= hi; ++k) {
    const mp::cpp_int c = choose(an, k) * choose(bn, w - k);
    if (c <= observed) num += c;
  }
  using F = mp::cpp_dec_float_50;
  return static_cast<double>(F(num) / F(choose(an + bn, w)));
}

}  // namespace

TEST_CASE("fisher exact against the integer oracle") {
  const unsigned cases[][4] = {{64, 100, 27, 100}, {10, 10, 0, 10}, {3, 12, 9, 14},
                               {1, 5, 4, 5},       {0, 7, 0, 9},    {19, 100, 60, 100},
                               {50, 100, 50, 100}, {2, 3, 40, 41}};
  for (const auto& c : cases) {
    const double want = fisher_oracle(c[0], c[1], c[2], c[3]);
    CHECK(fisher_exact_two_sided(c[0], c[1], c[2], c[3]) == doctest::Approx(want).epsilon(1e-10));
  }
  CHECK(fisher_exact_two_sided(64, 100, 27, 100) ==
        doctest::Approx(2.339346213410361e-07).epsilon(1e-10));
  CHECK(fisher_exact_two_sided(10, 10, 0, 10) ==
        doctest::Approx(2.0 / 184756.0).epsilon(1e-10));
  CHECK(fisher_exact_two_sided(50, 100, 50, 100) == 1.0);
}

TEST_CASE("fisher is symmetric in the arms") {
  CHECK(fisher_exact_two_sided(3, 12, 9, 14) ==
        doctest::Approx(fisher_exact_two_sided(9, 14, 3, 12)).epsilon(1e-12));
  CHECK(fisher_exact_two_sided(64, 100, 27, 100) ==
        doctest::Approx(fisher_exact_two_sided(27, 100, 64, 100)).epsilon(1e-12));
}

TEST_CASE("z test") {
  CHECK(two_proportion_z(50, 100, 50, 100) == 1.0);
  CHECK(two_proportion_z(0, 10, 0, 10) == 1.0);
  // scipy: 2 * norm.sf(0.37 / sqrt(0.455 * 0.545 * 0.02))
  CHECK(two_proportion_z(64, 100, 27, 100) == doctest::Approx(1.4890221872039905e-07).epsilon(1e-6));
  CHECK(two_proportion_z(64, 100, 27, 100) < 1e-5);
}

TEST_CASE("degenerate arms") {
  CHECK_THROWS_AS(fisher_exact_two_sided(0, 0, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(two_proportion_z(3, 2, 1, 2), std::invalid_argument);
}
