#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "edpt/dataset.hpp"
#include "edpt/rng.hpp"

using namespace edpt;

TEST_CASE("identical seed specs give identical draws") {
  RngStream a(7, 0), b(7, 0);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("distinct stream ids diverge") {
  RngStream a(7, 0), b(7, 1);
  int differing = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() != b.next_u64()) ++differing;
  }
  CHECK(differing > 60);
}

TEST_CASE("distinct substreams diverge") {
  RngStream a(7, 3, 0), b(7, 3, 1);
  int differing = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() != b.next_u64()) ++differing;
  }
  CHECK(differing > 60);
}

TEST_CASE("uniform stays in [0,1) and open variant in (0,1)") {
  RngStream s(123, 5);
  double mn = 1, mx = 0;
  for (int i = 0; i < 100000; ++i) {
    double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    double v = s.uniform_open();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(mn < 0.001);
  CHECK(mx > 0.999);
}

TEST_CASE("uniform_below is unbiased across residues") {
  RngStream s(9, 9);
  std::vector<long> counts(7, 0);
  const long draws = 700000;
  for (long i = 0; i < draws; ++i) counts[s.uniform_below(7)] += 1;
  for (long c : counts) {
    CHECK(std::abs(c - 100000.0) < 4 * std::sqrt(100000.0 * 6.0 / 7.0));
  }
}

namespace {

int permutation_rank(const std::vector<int>& order) {
  // Lehmer code of a length-4 permutation.
  int rank = 0;
  int fact[4] = {6, 2, 1, 1};
  for (int i = 0; i < 3; ++i) {
    int smaller = 0;
    for (int j = i + 1; j < 4; ++j) {
      if (order[j] < order[i]) ++smaller;
    }
    rank += smaller * fact[i];
  }
  return rank;
}

}  // namespace

TEST_CASE("random_permutation n=1") {
  RngStream s(1, 1);
  PermutationIndex tau = random_permutation(1, s);
  REQUIRE(tau.order.size() == 1);
  CHECK(tau.order[0] == 0);
}

TEST_CASE("random_permutation deterministic for equal seeds") {
  RngStream a(42, 17), b(42, 17);
  for (int rep = 0; rep < 20; ++rep) {
    CHECK(random_permutation(12, a).order == random_permutation(12, b).order);
  }
}

TEST_CASE("random_permutation uniform over the 24 orderings of n=4") {
  RngStream s(2024, 0);
  std::vector<long> counts(24, 0);
  const long draws = 240000;
  for (long i = 0; i < draws; ++i) {
    counts[permutation_rank(random_permutation(4, s).order)] += 1;
  }
  const double expected = 10000.0;
  const double bound = 4 * std::sqrt(expected * 23.0 / 24.0);
  for (long c : counts) {
    CHECK(std::abs(c - expected) < bound);
  }
}
