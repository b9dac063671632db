#pragma once

#include <cmath>
#include <vector>

#include "pepsmc/lattice.hpp"
#include "pepsmc/peps.hpp"
#include "pepsmc/tensor.hpp"

namespace pepsmc {

// Signed log-domain scalar. W(S) under/overflows as doubles beyond ~6x6
// lattices; every sampling formula uses ratios, which stay log-safe.
struct Amplitude {
  double log_magnitude = 0.0;
  int sign = 0;  // 0 means the amplitude is exactly zero

  double value() const {
    return sign == 0 ? 0.0 : sign * std::exp(log_magnitude);
  }
  static Amplitude from_value(double v) {
    if (v == 0.0) return {0.0, 0};
    return {std::log(std::abs(v)), v > 0.0 ? 1 : -1};
  }
  // this / other, as a plain double.
  double ratio(const Amplitude& other) const {
    if (sign == 0) return 0.0;
    return sign * other.sign * std::exp(log_magnitude - other.log_magnitude);
  }
};

// Compressed row environment of a partially contracted single-layer network.
// One three-index tensor (left bond, physical, right bond) per column.
struct BoundaryMps {
  std::vector<DenseTensor> sites;
  double log_scale = 0.0;
  bool zero = false;

  static BoundaryMps trivial(long cols);
};

// Site tensor with the physical index fixed to the config's spin: rank-4
// (l, r, u, d).
DenseTensor fixed_site(const PepsState& state, const SpinConfig& config,
                       long row, long col);
std::vector<DenseTensor> fixed_row(const PepsState& state,
                                   const SpinConfig& config, long row);

// Absorb a row of rank-4 tensors from above (contracting the boundary's
// physical legs with the row's u legs), then recompress to bond <= Dc by a
// left-to-right QR sweep followed by a right-to-left truncating SVD sweep.
BoundaryMps row_absorb(const BoundaryMps& bmps,
                       const std::vector<DenseTensor>& row, long Dc);
// Same, absorbing from below (contracts the row's d legs).
BoundaryMps row_absorb_from_below(const BoundaryMps& bmps,
                                  const std::vector<DenseTensor>& row, long Dc);

// W(S) by top-to-bottom row absorption with an exact closing contraction of
// the last row.
Amplitude amplitude(const PepsState& state, const SpinConfig& config, long Dc);

// Exact W(S) by uncompressed column-by-column contraction; verification
// oracle, guarded to rows*cols <= 12 and D <= 3.
double amplitude_bruteforce(const PepsState& state, const SpinConfig& config);

// All single-site environments B(S): for site m, the contraction of the whole
// fixed-spin network except site m, a rank-4 tensor (l, r, u, d) stored
// normalized with a separate log scale.
struct EnvGrid {
  long rows = 0;
  long cols = 0;
  std::vector<DenseTensor> env;
  std::vector<double> log_scale;
  Amplitude w;

  const DenseTensor& at(long r, long c) const {
    return env[static_cast<size_t>(r * cols + c)];
  }
  double log_at(long r, long c) const {
    return log_scale[static_cast<size_t>(r * cols + c)];
  }
  // B contracted with the site tensor slice; equals W when Dc is exact.
  Amplitude closed_with(const PepsState& state, const SpinConfig& config,
                        long r, long c) const;
};

EnvGrid single_layer_environments(const PepsState& state,
                                  const SpinConfig& config, long Dc);

// Incremental contraction context for a Metropolis walker: top/bottom
// boundary stacks for the current config with lazy revalidation after
// accepted moves. With caching disabled every query falls back to a fresh
// full amplitude evaluation.
class SingleLayerCache {
 public:
  SingleLayerCache(const PepsState& state, SpinConfig config, long Dc,
                   bool use_cache = true);

  const SpinConfig& config() const { return config_; }
  long dc() const { return dc_; }

  Amplitude amplitude_current();
  // (W(S) via the swap's closure route, W(S with a,b exchanged)); the ratio
  // of the two is the quantity entering acceptance and local estimators.
  std::pair<Amplitude, Amplitude> pair_for_swap(Site a, Site b);
  double ratio_for_swap(Site a, Site b);
  void commit_swap(Site a, Site b);

  EnvGrid environments();

 private:
  void ensure_top(long i);
  void ensure_bottom(long i);
  Amplitude close_rows(long r1, long r2, const SpinConfig& cfg);

  const PepsState* state_;
  SpinConfig config_;
  long dc_;
  bool use_cache_;
  std::vector<BoundaryMps> tops_;     // tops_[i]: rows 0..i-1 absorbed
  std::vector<BoundaryMps> bottoms_;  // bottoms_[i]: rows i+1.. absorbed
  long top_valid_ = 0;     // tops_[i] valid for i <= top_valid_
  long bottom_valid_ = 0;  // bottoms_[i] valid for i >= bottom_valid_
  bool have_w_ = false;
  Amplitude w_{};
};

}  // namespace pepsmc
