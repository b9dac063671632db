#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "pepsmc/lattice.hpp"

using namespace pepsmc;

namespace {

// Exhaustive pair enumeration, independent of build_bonds' sweep order.
long count_pairs(const LatticeSpec& spec, bool diagonal) {
  long count = 0;
  for (long r1 = 0; r1 < spec.rows; ++r1)
    for (long c1 = 0; c1 < spec.cols; ++c1)
      for (long r2 = 0; r2 < spec.rows; ++r2)
        for (long c2 = 0; c2 < spec.cols; ++c2) {
          if (r1 * spec.cols + c1 >= r2 * spec.cols + c2) continue;
          const long dr = std::abs(r1 - r2), dc = std::abs(c1 - c2);
          if (!diagonal && dr + dc == 1) ++count;
          if (diagonal && dr == 1 && dc == 1) ++count;
        }
  return count;
}

std::multiset<std::pair<long, long>> bond_keys(const std::vector<Bond>& bonds,
                                               const LatticeSpec& spec,
                                               bool flip_rows, bool flip_cols) {
  std::multiset<std::pair<long, long>> keys;
  auto map = [&](Site s) {
    long r = flip_rows ? spec.rows - 1 - s.row : s.row;
    long c = flip_cols ? spec.cols - 1 - s.col : s.col;
    return r * spec.cols + c;
  };
  for (const Bond& b : bonds) {
    long x = map(b.a), y = map(b.b);
    keys.insert({std::min(x, y), std::max(x, y)});
  }
  return keys;
}

}  // namespace

TEST_CASE("bond counts on small lattices") {
  BondLists b22 = build_bonds({2, 2, 1.0, 1.0});
  CHECK(b22.nn.size() == 4);
  CHECK(b22.nnn.size() == 2);

  BondLists b44 = build_bonds({4, 4, 1.0, 0.5});
  CHECK(b44.nn.size() == 24);
  CHECK(b44.nnn.size() == 18);

  BondLists b46 = build_bonds({4, 6, 1.0, 0.5});
  CHECK(b46.nn.size() == 38);
  CHECK(b46.nnn.size() == 30);
}

TEST_CASE("bond counts match exhaustive enumeration") {
  for (long rows : {2L, 3L, 4L}) {
    for (long cols : {2L, 3L, 5L}) {
      LatticeSpec spec{rows, cols, 1.0, 0.3};
      BondLists lists = build_bonds(spec);
      CHECK(static_cast<long>(lists.nn.size()) == count_pairs(spec, false));
      CHECK(static_cast<long>(lists.nnn.size()) == count_pairs(spec, true));
    }
  }
}

TEST_CASE("each unordered pair appears exactly once with its coupling") {
  LatticeSpec spec{3, 4, 2.0, 0.7};
  BondLists lists = build_bonds(spec);
  std::set<std::pair<long, long>> seen;
  for (const Bond& b : lists.all()) {
    long x = b.a.row * spec.cols + b.a.col;
    long y = b.b.row * spec.cols + b.b.col;
    CHECK(x != y);
    CHECK(seen.insert({std::min(x, y), std::max(x, y)}).second);
  }
  for (const Bond& b : lists.nn) CHECK(b.coupling == 2.0);
  for (const Bond& b : lists.nnn) CHECK(b.coupling == 0.7);
}

TEST_CASE("bond multiset is invariant under lattice reflections") {
  LatticeSpec spec{3, 5, 1.0, 0.4};
  BondLists lists = build_bonds(spec);
  for (bool fr : {false, true}) {
    for (bool fc : {false, true}) {
      CHECK(bond_keys(lists.nn, spec, fr, fc) ==
            bond_keys(lists.nn, spec, false, false));
      CHECK(bond_keys(lists.nnn, spec, fr, fc) ==
            bond_keys(lists.nnn, spec, false, false));
    }
  }
}

TEST_CASE("build_bonds rejects degenerate lattices") {
  CHECK_THROWS_AS(build_bonds({1, 1, 1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_bonds({0, 4, 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("neel configuration") {
  SpinConfig c22 = neel_config({2, 2, 1.0, 0.0});
  CHECK(c22.spin(0, 0) == 1);
  CHECK(c22.spin(0, 1) == -1);
  CHECK(c22.spin(1, 0) == -1);
  CHECK(c22.spin(1, 1) == 1);
  CHECK(c22.magnetization() == 0);

  SpinConfig c23 = neel_config({2, 3, 1.0, 0.0});
  CHECK(c23.spin(0, 0) == 1);
  CHECK(c23.spin(0, 1) == -1);
  CHECK(c23.spin(0, 2) == 1);
  CHECK(c23.spin(1, 0) == -1);
  CHECK(c23.magnetization() == 0);

  CHECK_THROWS_AS(neel_config({3, 3, 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("classical energy on a 2x2 lattice") {
  LatticeSpec heis{2, 2, 1.0, 0.0};
  SpinConfig neel = neel_config(heis);
  CHECK(classical_energy(heis, neel) == doctest::Approx(-1.0));

  LatticeSpec j1j2{2, 2, 1.0, 1.0};
  CHECK(classical_energy(j1j2, neel) == doctest::Approx(-0.5));

  SpinConfig up(2, 2);  // all spins +1
  CHECK(classical_energy(heis, up) == doctest::Approx(1.0));
}

TEST_CASE("classical energy rejects shape mismatch") {
  CHECK_THROWS_AS(classical_energy({2, 2, 1.0, 0.0}, SpinConfig(2, 3)),
                  std::invalid_argument);
}

TEST_CASE("bit code round trip") {
  SpinConfig c = neel_config({2, 3, 1.0, 0.0});
  SpinConfig back = SpinConfig::from_bit_code(2, 3, c.bit_code());
  CHECK(back == c);
}
