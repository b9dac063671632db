#include "pepsmc/lattice.hpp"

namespace pepsmc {

BondLists build_bonds(const LatticeSpec& spec) {
  spec.validate();
  BondLists lists;
  for (long r = 0; r < spec.rows; ++r) {
    for (long c = 0; c < spec.cols; ++c) {
      if (c + 1 < spec.cols)
        lists.nn.push_back({{r, c}, {r, c + 1}, spec.j1});
      if (r + 1 < spec.rows)
        lists.nn.push_back({{r, c}, {r + 1, c}, spec.j1});
      if (r + 1 < spec.rows && c + 1 < spec.cols)
        lists.nnn.push_back({{r, c}, {r + 1, c + 1}, spec.j2});
      if (r + 1 < spec.rows && c - 1 >= 0)
        lists.nnn.push_back({{r, c}, {r + 1, c - 1}, spec.j2});
    }
  }
  return lists;
}

SpinConfig neel_config(const LatticeSpec& spec) {
  spec.validate();
  if (spec.sites() % 2 != 0)
    throw std::invalid_argument("neel_config: odd site count has no Sz=0");
  SpinConfig cfg(spec.rows, spec.cols);
  for (long r = 0; r < spec.rows; ++r)
    for (long c = 0; c < spec.cols; ++c)
      cfg.set_spin(r, c, (r + c) % 2 == 0 ? 1 : -1);
  return cfg;
}

double classical_energy(const LatticeSpec& spec, const SpinConfig& config) {
  if (config.rows() != spec.rows || config.cols() != spec.cols)
    throw std::invalid_argument("classical_energy: shape mismatch");
  double e = 0.0;
  for (const Bond& b : build_bonds(spec).all())
    e += b.coupling * config.spin(b.a.row, b.a.col) *
         config.spin(b.b.row, b.b.col) / 4.0;
  return e;
}

}  // namespace pepsmc
