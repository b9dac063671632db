#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pepsmc {

// Open-boundary square lattice with Heisenberg couplings on nearest (j1)
// and next-nearest (j2) neighbor pairs.
struct LatticeSpec {
  long rows = 0;
  long cols = 0;
  double j1 = 1.0;
  double j2 = 0.0;

  long sites() const { return rows * cols; }
  void validate() const {
    if (rows < 1 || cols < 1 || sites() < 2)
      throw std::invalid_argument("LatticeSpec: need at least a 2-site chain");
  }
};

struct Site {
  long row = 0;
  long col = 0;
  bool operator==(const Site&) const = default;
};

struct Bond {
  Site a;
  Site b;
  double coupling = 0.0;
};

struct BondLists {
  std::vector<Bond> nn;
  std::vector<Bond> nnn;
  std::vector<Bond> all() const {
    std::vector<Bond> out = nn;
    out.insert(out.end(), nnn.begin(), nnn.end());
    return out;
  }
};

// One definite spin assignment, values +1 / -1 per site.
class SpinConfig {
 public:
  SpinConfig() = default;
  SpinConfig(long rows, long cols)
      : rows_(rows), cols_(cols), spins_(static_cast<size_t>(rows * cols), 1) {}

  long rows() const { return rows_; }
  long cols() const { return cols_; }
  int spin(long r, long c) const {
    return spins_[static_cast<size_t>(r * cols_ + c)];
  }
  void set_spin(long r, long c, int s) {
    spins_[static_cast<size_t>(r * cols_ + c)] = static_cast<int8_t>(s);
  }
  // Hilbert-space index of the site's spin: +1 -> 0, -1 -> 1.
  long level(long r, long c) const { return spin(r, c) == 1 ? 0 : 1; }
  long magnetization() const {
    long m = 0;
    for (int8_t s : spins_) m += s;
    return m;
  }
  void swap_spins(Site x, Site y) {
    int8_t t = spins_[static_cast<size_t>(x.row * cols_ + x.col)];
    spins_[static_cast<size_t>(x.row * cols_ + x.col)] =
        spins_[static_cast<size_t>(y.row * cols_ + y.col)];
    spins_[static_cast<size_t>(y.row * cols_ + y.col)] = t;
  }
  // Bit code: site (r,c) -> bit r*cols+c, set when spin up.
  uint64_t bit_code() const {
    uint64_t code = 0;
    for (size_t i = 0; i < spins_.size(); ++i)
      if (spins_[i] == 1) code |= (uint64_t{1} << i);
    return code;
  }
  static SpinConfig from_bit_code(long rows, long cols, uint64_t code) {
    SpinConfig cfg(rows, cols);
    for (long i = 0; i < rows * cols; ++i)
      cfg.spins_[static_cast<size_t>(i)] = (code >> i) & 1 ? 1 : -1;
    return cfg;
  }
  bool operator==(const SpinConfig&) const = default;

 private:
  long rows_ = 0;
  long cols_ = 0;
  std::vector<int8_t> spins_;
};

// All NN (horizontal/vertical) and NNN (diagonal) bonds, each unordered pair
// exactly once, canonically ordered row-major by the first site.
BondLists build_bonds(const LatticeSpec& spec);

// Checkerboard +-1 pattern with total magnetization zero. Rejects odd site
// counts.
SpinConfig neel_config(const LatticeSpec& spec);

// Diagonal matrix element <S|H|S> = sum over bonds of coupling * s_i s_j / 4.
double classical_energy(const LatticeSpec& spec, const SpinConfig& config);

}  // namespace pepsmc
