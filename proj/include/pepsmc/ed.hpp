#pragma once

#include <cstdint>
#include <vector>

#include "pepsmc/lattice.hpp"
#include "pepsmc/peps.hpp"

namespace pepsmc {

struct EdOptions {
  bool want_vector = false;
  uint64_t seed = 0;
  long max_iterations = 600;
  double tol = 1e-9;  // residual tolerance, relative to |energy|
  int threads = 0;    // 0 = hardware concurrency
  bool force_lanczos = false;
};

struct EdResult {
  double energy = 0.0;  // total (not per site)
  long iterations = 0;
  long basis_dim = 0;
  // Ground vector in basis order (ascending bit codes); empty unless
  // requested and available.
  std::vector<double> ground_vector;
  std::vector<uint64_t> basis;
};

// All bit codes with n_up set bits, ascending. Bit r*cols+c is site (r,c),
// set when spin up.
std::vector<uint64_t> sector_basis(long sites, long n_up);

// Lowest eigenvalue of the J1-J2 Hamiltonian in the given total-Sz sector.
// Dense diagonalization for small sectors, matrix-free Lanczos otherwise.
EdResult exact_ground_energy(const LatticeSpec& spec, long sector_sz,
                             const EdOptions& opts = {});

// PEPS expanded into the full Hilbert space: component at bit code S is
// W(S) computed by the brute-force contraction oracle. Guarded to <= 12
// sites.
std::vector<double> expand_peps(const PepsState& state);

// H|v> over the full (unrestricted) Hilbert space; v indexed by bit code.
std::vector<double> apply_hamiltonian_full(const LatticeSpec& spec,
                                           const std::vector<double>& v);

// <v|H|v> / <v|v> over the full Hilbert space.
double rayleigh_quotient(const LatticeSpec& spec,
                         const std::vector<double>& v);

}  // namespace pepsmc
