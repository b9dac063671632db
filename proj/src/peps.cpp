#include "pepsmc/peps.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "pepsmc/rng.hpp"

namespace pepsmc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

PepsState::PepsState(LatticeSpec spec, long bond_dim)
    : spec_(spec), bond_dim_(bond_dim) {
  spec_.validate();
  if (bond_dim_ < 1) throw std::invalid_argument("PepsState: D < 1");
  tensors_.reserve(static_cast<size_t>(spec_.sites()));
  for (long r = 0; r < spec_.rows; ++r)
    for (long c = 0; c < spec_.cols; ++c)
      tensors_.emplace_back(site_dims(r, c));
}

std::vector<long> PepsState::site_dims(long r, long c) const {
  auto bond = [&](bool open) { return open ? 1L : bond_dim_; };
  return {bond(c == 0), bond(c == spec_.cols - 1), bond(r == 0),
          bond(r == spec_.rows - 1), kPhysDim};
}

PepsState PepsState::random(const LatticeSpec& spec, long bond_dim,
                            uint64_t seed) {
  PepsState state(spec, bond_dim);
  auto rng = make_rng(derive_seed(seed, 0x70657073 /* "peps" */));
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (long r = 0; r < spec.rows; ++r)
    for (long c = 0; c < spec.cols; ++c)
      for (double& v : state.site(r, c).storage()) v = dist(rng);
  return state;
}

PepsState PepsState::grow_bond_dimension(long new_dim, double noise,
                                         uint64_t seed) const {
  if (new_dim <= bond_dim_)
    throw std::invalid_argument("grow_bond_dimension: new D must exceed D");
  PepsState out(spec_, new_dim);
  auto rng = make_rng(derive_seed(seed, 0x67726f77 /* "grow" */));
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (long r = 0; r < spec_.rows; ++r) {
    for (long c = 0; c < spec_.cols; ++c) {
      const DenseTensor& src = site(r, c);
      DenseTensor& dst = out.site(r, c);
      const auto& sd = src.dims();
      std::vector<long> idx(5, 0);
      // Zero-padded copy of the old block.
      for (long l = 0; l < sd[0]; ++l)
        for (long rr = 0; rr < sd[1]; ++rr)
          for (long u = 0; u < sd[2]; ++u)
            for (long d = 0; d < sd[3]; ++d)
              for (long s = 0; s < sd[4]; ++s) {
                idx = {l, rr, u, d, s};
                dst.at(idx) = src.at(idx);
              }
      const double amp = noise * src.max_abs();
      if (amp > 0.0)
        for (double& v : dst.storage()) v += amp * dist(rng);
    }
  }
  return out;
}

std::vector<double> PepsState::rescale() {
  std::vector<double> factors;
  factors.reserve(tensors_.size());
  for (DenseTensor& t : tensors_) {
    const double m = t.max_abs();
    if (m == 0.0) throw std::runtime_error("rescale: zero tensor");
    t.scale(1.0 / m);
    factors.push_back(m);
  }
  return factors;
}

bool PepsState::shape_matches(const PepsState& other) const {
  if (spec_.rows != other.spec_.rows || spec_.cols != other.spec_.cols)
    return false;
  for (size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].dims() != other.tensors_[i].dims()) return false;
  return true;
}

namespace {

constexpr uint32_t kFormatVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void PepsState::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write("PEPS", 4);
  write_u32(os, kFormatVersion);
  write_u32(os, static_cast<uint32_t>(spec_.rows));
  write_u32(os, static_cast<uint32_t>(spec_.cols));
  write_u32(os, static_cast<uint32_t>(kPhysDim));
  for (const DenseTensor& t : tensors_) {
    for (long d : t.dims()) write_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

PepsState PepsState::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PEPS", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  if (read_u32(is) != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  LatticeSpec spec;
  spec.rows = read_u32(is);
  spec.cols = read_u32(is);
  if (read_u32(is) != kPhysDim)
    throw std::runtime_error("checkpoint: unsupported physical dimension");

  PepsState state;
  state.spec_ = spec;
  state.spec_.validate();
  state.bond_dim_ = 1;
  state.tensors_.clear();
  for (long i = 0; i < spec.sites(); ++i) {
    std::vector<long> dims(5);
    for (long& d : dims) {
      d = read_u32(is);
      if (d < 1) throw std::runtime_error("checkpoint: bad dimension");
      state.bond_dim_ = std::max(state.bond_dim_, d);
    }
    DenseTensor t(dims);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    state.tensors_.push_back(std::move(t));
  }
  // The physical index is not a virtual bond; D tracks virtual dims only.
  state.bond_dim_ = 1;
  for (const DenseTensor& t : state.tensors_)
    for (long k = 0; k < 4; ++k)
      state.bond_dim_ = std::max(state.bond_dim_, t.dim(k));
  return state;
}

}  // namespace pepsmc
