#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pepsmc/lattice.hpp"
#include "pepsmc/tensor.hpp"

namespace pepsmc {

// Per-site physical dimension (spin-1/2).
inline constexpr long kPhysDim = 2;

// Grid of five-index site tensors A(l, r, u, d, s). Virtual bonds on open
// edges have dimension 1.
class PepsState {
 public:
  PepsState() = default;
  PepsState(LatticeSpec spec, long bond_dim);

  static PepsState random(const LatticeSpec& spec, long bond_dim,
                          uint64_t seed);

  const LatticeSpec& spec() const { return spec_; }
  long bond_dim() const { return bond_dim_; }

  const DenseTensor& site(long r, long c) const {
    return tensors_[static_cast<size_t>(r * spec_.cols + c)];
  }
  DenseTensor& site(long r, long c) {
    return tensors_[static_cast<size_t>(r * spec_.cols + c)];
  }

  // Expected dims of site (r,c): edge bonds 1, interior bonds bond_dim.
  std::vector<long> site_dims(long r, long c) const;

  // Zero-pad every virtual bond to new_dim, then add uniform noise of
  // amplitude noise * max|entry| per tensor.
  PepsState grow_bond_dimension(long new_dim, double noise,
                                uint64_t seed) const;

  // Divide each tensor by its max-abs entry; returns the factors (row-major).
  std::vector<double> rescale();

  void save(const std::string& path) const;
  static PepsState load(const std::string& path);

  bool shape_matches(const PepsState& other) const;

 private:
  LatticeSpec spec_;
  long bond_dim_ = 0;
  std::vector<DenseTensor> tensors_;
};

}  // namespace pepsmc
