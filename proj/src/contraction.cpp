#include "pepsmc/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pepsmc {

namespace {

DenseTensor ones_tensor(std::vector<long> dims) {
  DenseTensor t(std::move(dims));
  for (double& v : t.storage()) v = 1.0;
  return t;
}

// Drop dimension-1 axes listed in `axes` (ascending).
DenseTensor squeeze(const DenseTensor& t, const std::vector<long>& axes) {
  std::vector<long> dims;
  for (long i = 0; i < t.rank(); ++i) {
    bool drop = std::find(axes.begin(), axes.end(), i) != axes.end();
    if (drop && t.dim(i) != 1)
      throw std::invalid_argument("squeeze: axis dim != 1");
    if (!drop) dims.push_back(t.dim(i));
  }
  if (dims.empty()) dims.push_back(1);
  return reshape(t, dims);
}

// Normalize by max-abs; returns log of the factor, or marks zero.
double normalize_tensor(DenseTensor& t, bool& zero) {
  const double m = t.max_abs();
  if (m == 0.0) {
    zero = true;
    return 0.0;
  }
  if (!std::isfinite(m))
    throw std::runtime_error("contraction: non-finite intermediate");
  t.scale(1.0 / m);
  return std::log(m);
}

// Left-to-right QR canonicalization, then right-to-left SVD truncation.
void compress(BoundaryMps& b, long Dc) {
  if (Dc < 1) throw std::invalid_argument("compress: Dc < 1");
  if (b.zero) return;
  const long n = static_cast<long>(b.sites.size());
  for (long j = 0; j < n; ++j)
    b.log_scale += normalize_tensor(b.sites[static_cast<size_t>(j)], b.zero);
  if (b.zero || n == 1) return;

  for (long j = 0; j + 1 < n; ++j) {
    auto [q, r] = qr_split(b.sites[static_cast<size_t>(j)], 2);
    b.sites[static_cast<size_t>(j)] = std::move(q);
    b.sites[static_cast<size_t>(j + 1)] =
        contract(r, {1}, b.sites[static_cast<size_t>(j + 1)], {0});
    b.log_scale +=
        normalize_tensor(b.sites[static_cast<size_t>(j + 1)], b.zero);
    if (b.zero) return;
  }
  for (long j = n - 1; j >= 1; --j) {
    SvdResult svd = svd_truncate(b.sites[static_cast<size_t>(j)], 1, Dc);
    b.sites[static_cast<size_t>(j)] = std::move(svd.vt);
    DenseTensor us = std::move(svd.u);  // (left, k)
    {
      const long k = static_cast<long>(svd.singular_values.size());
      for (long row = 0; row < us.dim(0); ++row)
        for (long col = 0; col < k; ++col)
          us.storage()[static_cast<size_t>(row * k + col)] *=
              svd.singular_values[static_cast<size_t>(col)];
    }
    b.sites[static_cast<size_t>(j - 1)] =
        contract(b.sites[static_cast<size_t>(j - 1)], {2}, us, {0});
    b.log_scale +=
        normalize_tensor(b.sites[static_cast<size_t>(j - 1)], b.zero);
    if (b.zero) return;
  }
}

BoundaryMps absorb_impl(const BoundaryMps& bmps,
                        const std::vector<DenseTensor>& row, long Dc,
                        bool from_below) {
  if (bmps.sites.size() != row.size())
    throw std::invalid_argument("row_absorb: column count mismatch");
  BoundaryMps out;
  out.log_scale = bmps.log_scale;
  out.zero = bmps.zero;
  if (out.zero) {
    out.sites = bmps.sites;
    return out;
  }
  out.sites.reserve(row.size());
  for (size_t j = 0; j < row.size(); ++j) {
    const DenseTensor& t = row[j];  // (l, r, u, d)
    const long vert_in = from_below ? 3 : 2;  // contracted with the boundary
    // (a, p, b) x (l, r, u, d) over p/vert_in -> (a, b, l, r, remaining vert)
    DenseTensor merged = contract(bmps.sites[j], {1}, t, {vert_in});
    merged = permute(merged, {0, 2, 4, 1, 3});  // (a, l, out, b, r)
    out.sites.push_back(reshape(
        merged, {merged.dim(0) * merged.dim(1), merged.dim(2),
                 merged.dim(3) * merged.dim(4)}));
  }
  compress(out, Dc);
  return out;
}

// Three-leg left partial (top bond, row bond, bottom bond) and its log scale.
struct Partial {
  DenseTensor t;
  double log = 0.0;
  bool zero = false;
};

Partial trivial_partial() { return {ones_tensor({1, 1, 1}), 0.0, false}; }

Partial step_left(const Partial& p, const DenseTensor& top,
                  const DenseTensor& row, const DenseTensor& bottom) {
  Partial out;
  out.log = p.log;
  out.zero = p.zero;
  if (out.zero) {
    out.t = p.t;
    return out;
  }
  DenseTensor q = contract(p.t, {0}, top, {0});       // (l, c, u, a')
  q = contract(q, {0, 2}, row, {0, 2});               // (c, a', r, d)
  out.t = contract(q, {0, 3}, bottom, {0, 1});        // (a', r, c')
  out.log += normalize_tensor(out.t, out.zero);
  return out;
}

Partial step_right(const Partial& p, const DenseTensor& top,
                   const DenseTensor& row, const DenseTensor& bottom) {
  Partial out;
  out.log = p.log;
  out.zero = p.zero;
  if (out.zero) {
    out.t = p.t;
    return out;
  }
  DenseTensor q = contract(top, {2}, p.t, {0});       // (a, u, r, c')
  q = contract(q, {1, 2}, row, {2, 1});               // (a, c', l, d)
  out.t = contract(q, {1, 3}, bottom, {2, 1});        // (a, l, c)
  out.log += normalize_tensor(out.t, out.zero);
  return out;
}

// Close top MPS + one row + bottom MPS to a scalar amplitude.
Amplitude close_row(const BoundaryMps& top, const std::vector<DenseTensor>& row,
                    const BoundaryMps& bottom) {
  if (top.zero || bottom.zero) return {0.0, 0};
  Partial p = trivial_partial();
  for (size_t j = 0; j < row.size(); ++j) {
    p = step_left(p, top.sites[j], row[j], bottom.sites[j]);
    if (p.zero) return {0.0, 0};
  }
  const double v = p.t.storage()[0];  // dims (1,1,1)
  if (v == 0.0) return {0.0, 0};
  Amplitude a;
  a.sign = v > 0.0 ? 1 : -1;
  a.log_magnitude =
      std::log(std::abs(v)) + p.log + top.log_scale + bottom.log_scale;
  return a;
}

}  // namespace

BoundaryMps BoundaryMps::trivial(long cols) {
  BoundaryMps b;
  b.sites.assign(static_cast<size_t>(cols), ones_tensor({1, 1, 1}));
  return b;
}

DenseTensor fixed_site(const PepsState& state, const SpinConfig& config,
                       long row, long col) {
  const DenseTensor& a = state.site(row, col);
  const long s = config.level(row, col);
  const auto& d = a.dims();
  const long block = d[0] * d[1] * d[2] * d[3];
  DenseTensor out({d[0], d[1], d[2], d[3]});
  const double* src = a.data();
  double* dst = out.data();
  for (long i = 0; i < block; ++i) dst[i] = src[i * kPhysDim + s];
  return out;
}

std::vector<DenseTensor> fixed_row(const PepsState& state,
                                   const SpinConfig& config, long row) {
  std::vector<DenseTensor> out;
  out.reserve(static_cast<size_t>(state.spec().cols));
  for (long c = 0; c < state.spec().cols; ++c)
    out.push_back(fixed_site(state, config, row, c));
  return out;
}

BoundaryMps row_absorb(const BoundaryMps& bmps,
                       const std::vector<DenseTensor>& row, long Dc) {
  return absorb_impl(bmps, row, Dc, false);
}

BoundaryMps row_absorb_from_below(const BoundaryMps& bmps,
                                  const std::vector<DenseTensor>& row,
                                  long Dc) {
  return absorb_impl(bmps, row, Dc, true);
}

Amplitude amplitude(const PepsState& state, const SpinConfig& config,
                    long Dc) {
  SingleLayerCache cache(state, config, Dc);
  return cache.amplitude_current();
}

double amplitude_bruteforce(const PepsState& state, const SpinConfig& config) {
  const LatticeSpec& spec = state.spec();
  if (spec.sites() > 12 || state.bond_dim() > 3)
    throw std::invalid_argument(
        "amplitude_bruteforce: guarded to rows*cols <= 12 and D <= 3");
  if (config.rows() != spec.rows || config.cols() != spec.cols)
    throw std::invalid_argument("amplitude_bruteforce: shape mismatch");

  const long rows = spec.rows;
  // Boundary over the left bonds of the current column.
  DenseTensor v = ones_tensor(std::vector<long>(static_cast<size_t>(rows), 1));
  for (long c = 0; c < spec.cols; ++c) {
    DenseTensor p = v;
    for (long r = 0; r < rows; ++r) {
      DenseTensor t = fixed_site(state, config, r, c);  // (l, r, u, d)
      std::vector<long> drop;
      if (r == 0) drop.push_back(2);
      if (r == rows - 1) drop.push_back(3);
      t = squeeze(t, drop);
      if (rows == 1) {
        p = contract(p, {0}, t, {0});  // -> (r)
      } else if (r == 0) {
        p = contract(p, {0}, t, {0});  // -> (l_1.., r_0, d_0)
      } else {
        // p: (l_r.., r_0..r_{r-1}, d_{r-1}); contract l and u.
        p = contract(p, {0, p.rank() - 1}, t, {0, 2});
      }
    }
    v = p;  // (r_0..r_{rows-1})
  }
  return v.storage()[0];  // final dims are all ones
}

Amplitude EnvGrid::closed_with(const PepsState& state,
                               const SpinConfig& config, long r,
                               long c) const {
  DenseTensor a = fixed_site(state, config, r, c);
  DenseTensor scalar = contract(at(r, c), {0, 1, 2, 3}, a, {0, 1, 2, 3});
  const double v = scalar.storage()[0];
  if (v == 0.0) return {0.0, 0};
  return {std::log(std::abs(v)) + log_at(r, c), v > 0.0 ? 1 : -1};
}

SingleLayerCache::SingleLayerCache(const PepsState& state, SpinConfig config,
                                   long Dc, bool use_cache)
    : state_(&state),
      config_(std::move(config)),
      dc_(Dc),
      use_cache_(use_cache) {
  if (Dc < 1) throw std::invalid_argument("SingleLayerCache: Dc < 1");
  if (config_.rows() != state.spec().rows ||
      config_.cols() != state.spec().cols)
    throw std::invalid_argument("SingleLayerCache: config shape mismatch");
  const long rows = state.spec().rows;
  tops_.assign(static_cast<size_t>(rows),
               BoundaryMps::trivial(state.spec().cols));
  bottoms_.assign(static_cast<size_t>(rows),
                  BoundaryMps::trivial(state.spec().cols));
  top_valid_ = 0;
  bottom_valid_ = rows - 1;
}

void SingleLayerCache::ensure_top(long i) {
  for (long k = top_valid_ + 1; k <= i; ++k)
    tops_[static_cast<size_t>(k)] = row_absorb(
        tops_[static_cast<size_t>(k - 1)], fixed_row(*state_, config_, k - 1),
        dc_);
  top_valid_ = std::max(top_valid_, i);
}

void SingleLayerCache::ensure_bottom(long i) {
  for (long k = bottom_valid_ - 1; k >= i; --k)
    bottoms_[static_cast<size_t>(k)] =
        row_absorb_from_below(bottoms_[static_cast<size_t>(k + 1)],
                              fixed_row(*state_, config_, k + 1), dc_);
  bottom_valid_ = std::min(bottom_valid_, i);
}

Amplitude SingleLayerCache::close_rows(long r1, long r2,
                                       const SpinConfig& cfg) {
  ensure_top(r1);
  ensure_bottom(r2);
  BoundaryMps t = tops_[static_cast<size_t>(r1)];
  for (long r = r1; r < r2; ++r)
    t = row_absorb(t, fixed_row(*state_, cfg, r), dc_);
  return close_row(t, fixed_row(*state_, cfg, r2),
                   bottoms_[static_cast<size_t>(r2)]);
}

Amplitude SingleLayerCache::amplitude_current() {
  if (!use_cache_) {
    // Fresh evaluation path shares no cached stacks.
    SingleLayerCache fresh(*state_, config_, dc_);
    return fresh.amplitude_current();
  }
  if (!have_w_) {
    const long rows = state_->spec().rows;
    w_ = close_rows(rows - 1, rows - 1, config_);
    have_w_ = true;
  }
  return w_;
}

std::pair<Amplitude, Amplitude> SingleLayerCache::pair_for_swap(Site a,
                                                                Site b) {
  SpinConfig swapped = config_;
  swapped.swap_spins(a, b);
  if (!use_cache_) {
    return {amplitude(*state_, config_, dc_),
            amplitude(*state_, swapped, dc_)};
  }
  const long r1 = std::min(a.row, b.row);
  const long r2 = std::max(a.row, b.row);
  Amplitude w_same = close_rows(r1, r2, config_);
  Amplitude w_swap = close_rows(r1, r2, swapped);
  return {w_same, w_swap};
}

double SingleLayerCache::ratio_for_swap(Site a, Site b) {
  auto [w_same, w_swap] = pair_for_swap(a, b);
  if (w_same.sign == 0)
    throw std::runtime_error("ratio_for_swap: current amplitude is zero");
  return w_swap.ratio(w_same);
}

void SingleLayerCache::commit_swap(Site a, Site b) {
  config_.swap_spins(a, b);
  if (use_cache_) {
    top_valid_ = std::min(top_valid_, std::min(a.row, b.row));
    bottom_valid_ = std::max(bottom_valid_, std::max(a.row, b.row));
  }
  have_w_ = false;
}

EnvGrid SingleLayerCache::environments() {
  const long rows = state_->spec().rows;
  const long cols = state_->spec().cols;
  EnvGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.env.resize(static_cast<size_t>(rows * cols));
  grid.log_scale.assign(static_cast<size_t>(rows * cols), 0.0);

  if (!use_cache_) {
    SingleLayerCache fresh(*state_, config_, dc_);
    return fresh.environments();
  }
  ensure_top(rows - 1);
  ensure_bottom(0);
  grid.w = amplitude_current();

  for (long i = 0; i < rows; ++i) {
    const BoundaryMps& top = tops_[static_cast<size_t>(i)];
    const BoundaryMps& bottom = bottoms_[static_cast<size_t>(i)];
    const std::vector<DenseTensor> row = fixed_row(*state_, config_, i);

    std::vector<Partial> left(static_cast<size_t>(cols + 1));
    left[0] = trivial_partial();
    for (long j = 0; j < cols; ++j)
      left[static_cast<size_t>(j + 1)] =
          step_left(left[static_cast<size_t>(j)], top.sites[static_cast<size_t>(j)],
                    row[static_cast<size_t>(j)],
                    bottom.sites[static_cast<size_t>(j)]);
    std::vector<Partial> right(static_cast<size_t>(cols + 1));
    right[static_cast<size_t>(cols)] = trivial_partial();
    for (long j = cols - 1; j >= 0; --j)
      right[static_cast<size_t>(j)] = step_right(
          right[static_cast<size_t>(j + 1)], top.sites[static_cast<size_t>(j)],
          row[static_cast<size_t>(j)], bottom.sites[static_cast<size_t>(j)]);

    for (long j = 0; j < cols; ++j) {
      const Partial& lp = left[static_cast<size_t>(j)];
      const Partial& rp = right[static_cast<size_t>(j + 1)];
      const size_t m = static_cast<size_t>(i * cols + j);
      if (lp.zero || rp.zero || top.zero || bottom.zero) {
        grid.env[m] = DenseTensor(
            {row[static_cast<size_t>(j)].dim(0), row[static_cast<size_t>(j)].dim(1),
             row[static_cast<size_t>(j)].dim(2),
             row[static_cast<size_t>(j)].dim(3)});
        grid.log_scale[m] = 0.0;
        continue;
      }
      DenseTensor q =
          contract(lp.t, {0}, top.sites[static_cast<size_t>(j)], {0});
      // (l, c, u, a')
      q = contract(q, {1}, bottom.sites[static_cast<size_t>(j)], {0});
      // (l, u, a', d, c')
      q = contract(q, {2, 4}, rp.t, {0, 2});  // (l, u, d, r)
      q = permute(q, {0, 3, 1, 2});           // (l, r, u, d)
      bool zero = false;
      double logn = normalize_tensor(q, zero);
      grid.env[m] = std::move(q);
      grid.log_scale[m] = zero ? 0.0
                               : logn + lp.log + rp.log + top.log_scale +
                                     bottom.log_scale;
    }
  }
  return grid;
}

EnvGrid single_layer_environments(const PepsState& state,
                                  const SpinConfig& config, long Dc) {
  SingleLayerCache cache(state, config, Dc);
  return cache.environments();
}

}  // namespace pepsmc
