#include "pepsmc/ed.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "pepsmc/contraction.hpp"
#include "pepsmc/rng.hpp"

namespace pepsmc {

namespace {

constexpr long kDenseLimit = 4096;

struct CodedBond {
  int bit_a;
  int bit_b;
  double coupling;
};

std::vector<CodedBond> coded_bonds(const LatticeSpec& spec) {
  std::vector<CodedBond> out;
  for (const Bond& b : build_bonds(spec).all())
    out.push_back({static_cast<int>(b.a.row * spec.cols + b.a.col),
                   static_cast<int>(b.b.row * spec.cols + b.b.col),
                   b.coupling});
  return out;
}

double diagonal_energy(uint64_t code, const std::vector<CodedBond>& bonds) {
  double e = 0.0;
  for (const CodedBond& b : bonds) {
    const int si = (code >> b.bit_a) & 1 ? 1 : -1;
    const int sj = (code >> b.bit_b) & 1 ? 1 : -1;
    e += b.coupling * si * sj / 4.0;
  }
  return e;
}

// out = H v in the sector basis. Each component is written by exactly one
// thread with a fixed summation order, so results are bitwise stable for
// any thread count.
void apply_sector(const std::vector<uint64_t>& basis,
                  const std::vector<CodedBond>& bonds,
                  const std::vector<double>& v, std::vector<double>& out,
                  int threads) {
  const long dim = static_cast<long>(basis.size());
  auto worker = [&](long begin, long end) {
    for (long k = begin; k < end; ++k) {
      const uint64_t code = basis[static_cast<size_t>(k)];
      double acc = diagonal_energy(code, bonds) * v[static_cast<size_t>(k)];
      for (const CodedBond& b : bonds) {
        const uint64_t bi = (code >> b.bit_a) & 1;
        const uint64_t bj = (code >> b.bit_b) & 1;
        if (bi == bj) continue;
        const uint64_t flipped =
            code ^ ((uint64_t{1} << b.bit_a) | (uint64_t{1} << b.bit_b));
        const auto it = std::lower_bound(basis.begin(), basis.end(), flipped);
        acc += 0.5 * b.coupling *
               v[static_cast<size_t>(it - basis.begin())];
      }
      out[static_cast<size_t>(k)] = acc;
    }
  };
  int n = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (n == 1 || dim < 1024) {
    worker(0, dim);
    return;
  }
  std::vector<std::thread> pool;
  const long chunk = (dim + n - 1) / n;
  for (int t = 0; t < n; ++t) {
    const long begin = t * chunk;
    const long end = std::min(dim, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(worker, begin, end);
  }
  for (auto& th : pool) th.join();
}

EdResult dense_ground(const std::vector<uint64_t>& basis,
                      const std::vector<CodedBond>& bonds, bool want_vector) {
  const long dim = static_cast<long>(basis.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (long k = 0; k < dim; ++k) {
    const uint64_t code = basis[static_cast<size_t>(k)];
    h(k, k) = diagonal_energy(code, bonds);
    for (const CodedBond& b : bonds) {
      const uint64_t bi = (code >> b.bit_a) & 1;
      const uint64_t bj = (code >> b.bit_b) & 1;
      if (bi == bj) continue;
      const uint64_t flipped =
          code ^ ((uint64_t{1} << b.bit_a) | (uint64_t{1} << b.bit_b));
      const auto it = std::lower_bound(basis.begin(), basis.end(), flipped);
      h(k, it - basis.begin()) += 0.5 * b.coupling;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  EdResult res;
  res.energy = solver.eigenvalues()(0);
  res.basis_dim = dim;
  res.iterations = 0;
  if (want_vector) {
    res.ground_vector.assign(solver.eigenvectors().col(0).data(),
                             solver.eigenvectors().col(0).data() + dim);
  }
  return res;
}

EdResult lanczos_ground(const std::vector<uint64_t>& basis,
                        const std::vector<CodedBond>& bonds,
                        const EdOptions& opts) {
  const long dim = static_cast<long>(basis.size());
  std::vector<double> v_prev(static_cast<size_t>(dim), 0.0);
  std::vector<double> v(static_cast<size_t>(dim));
  std::vector<double> w(static_cast<size_t>(dim));

  auto rng = make_rng(derive_seed(opts.seed, 0x65645f6c /* "ed_l" */));
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  double norm = 0.0;
  for (double& x : v) {
    x = dist(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  std::vector<double> alpha, beta;  // beta[j] couples step j and j+1
  double theta = 0.0, theta_prev = 1e300;
  long iter = 0;
  for (iter = 1; iter <= opts.max_iterations; ++iter) {
    apply_sector(basis, bonds, v, w, opts.threads);
    double a = 0.0;
    for (long k = 0; k < dim; ++k)
      a += v[static_cast<size_t>(k)] * w[static_cast<size_t>(k)];
    alpha.push_back(a);
    const double b_prev = beta.empty() ? 0.0 : beta.back();
    for (long k = 0; k < dim; ++k)
      w[static_cast<size_t>(k)] -= a * v[static_cast<size_t>(k)] +
                                   b_prev * v_prev[static_cast<size_t>(k)];
    double b = 0.0;
    for (double x : w) b += x * x;
    b = std::sqrt(b);

    // Ritz value and residual estimate from the tridiagonal projection.
    const long m = static_cast<long>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (long j = 0; j < m; ++j) {
      t(j, j) = alpha[static_cast<size_t>(j)];
      if (j + 1 < m) {
        t(j, j + 1) = beta[static_cast<size_t>(j)];
        t(j + 1, j) = beta[static_cast<size_t>(j)];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t);
    theta = solver.eigenvalues()(0);
    const double residual = b * std::abs(solver.eigenvectors()(m - 1, 0));
    const double scale = std::max(1.0, std::abs(theta));
    if (residual < opts.tol * scale &&
        std::abs(theta - theta_prev) < opts.tol * scale)
      break;
    theta_prev = theta;

    if (b == 0.0) break;  // invariant subspace reached
    beta.push_back(b);
    v_prev = v;
    for (long k = 0; k < dim; ++k)
      v[static_cast<size_t>(k)] = w[static_cast<size_t>(k)] / b;
  }
  if (iter > opts.max_iterations)
    throw std::runtime_error("exact_ground_energy: Lanczos did not converge");

  EdResult res;
  res.energy = theta;
  res.iterations = iter;
  res.basis_dim = dim;
  return res;
}

}  // namespace

std::vector<uint64_t> sector_basis(long sites, long n_up) {
  if (n_up < 0 || n_up > sites)
    throw std::invalid_argument("sector_basis: n_up out of range");
  std::vector<uint64_t> basis;
  for (uint64_t code = 0; code < (uint64_t{1} << sites); ++code)
    if (std::popcount(code) == n_up) basis.push_back(code);
  return basis;
}

EdResult exact_ground_energy(const LatticeSpec& spec, long sector_sz,
                             const EdOptions& opts) {
  spec.validate();
  const long sites = spec.sites();
  if (sites > 24)
    throw std::invalid_argument("exact_ground_energy: > 24 sites");
  if (sites % 2 != 0)
    throw std::invalid_argument(
        "exact_ground_energy: integer Sz sectors need an even site count");
  const long n_up = sites / 2 + sector_sz;
  if (n_up < 0 || n_up > sites)
    throw std::invalid_argument("exact_ground_energy: empty sector");

  std::vector<uint64_t> basis = sector_basis(sites, n_up);
  std::vector<CodedBond> bonds = coded_bonds(spec);
  EdResult res;
  if (!opts.force_lanczos &&
      static_cast<long>(basis.size()) <= kDenseLimit) {
    res = dense_ground(basis, bonds, opts.want_vector);
  } else {
    if (opts.want_vector)
      throw std::invalid_argument(
          "exact_ground_energy: ground vector only available on the dense "
          "path");
    res = lanczos_ground(basis, bonds, opts);
  }
  res.basis = std::move(basis);
  return res;
}

std::vector<double> expand_peps(const PepsState& state) {
  const LatticeSpec& spec = state.spec();
  if (spec.sites() > 12)
    throw std::invalid_argument("expand_peps: guarded to <= 12 sites");
  std::vector<double> v(static_cast<size_t>(1) << spec.sites());
  for (uint64_t code = 0; code < v.size(); ++code)
    v[code] = amplitude_bruteforce(
        state, SpinConfig::from_bit_code(spec.rows, spec.cols, code));
  return v;
}

std::vector<double> apply_hamiltonian_full(const LatticeSpec& spec,
                                           const std::vector<double>& v) {
  const long sites = spec.sites();
  if (sites > 20)
    throw std::invalid_argument("apply_hamiltonian_full: > 20 sites");
  if (v.size() != (size_t{1} << sites))
    throw std::invalid_argument("apply_hamiltonian_full: bad vector length");
  std::vector<CodedBond> bonds = coded_bonds(spec);
  std::vector<double> out(v.size(), 0.0);
  for (uint64_t code = 0; code < v.size(); ++code) {
    double acc = diagonal_energy(code, bonds) * v[code];
    for (const CodedBond& b : bonds) {
      const uint64_t bi = (code >> b.bit_a) & 1;
      const uint64_t bj = (code >> b.bit_b) & 1;
      if (bi == bj) continue;
      const uint64_t flipped =
          code ^ ((uint64_t{1} << b.bit_a) | (uint64_t{1} << b.bit_b));
      acc += 0.5 * b.coupling * v[flipped];
    }
    out[code] = acc;
  }
  return out;
}

double rayleigh_quotient(const LatticeSpec& spec,
                         const std::vector<double>& v) {
  std::vector<double> hv = apply_hamiltonian_full(spec, v);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    num += v[i] * hv[i];
    den += v[i] * v[i];
  }
  if (den == 0.0)
    throw std::invalid_argument("rayleigh_quotient: zero vector");
  return num / den;
}

}  // namespace pepsmc
