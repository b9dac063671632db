#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pepsmc/contraction.hpp"
#include "pepsmc/lattice.hpp"
#include "pepsmc/peps.hpp"
#include "pepsmc/tensor.hpp"

namespace pepsmc {

struct McParams {
  long sweeps = 10000;              // measurement sweeps per walker
  long equilibration_sweeps = -1;   // -1: 10% of sweeps
  long walkers = 1;
  long dc = 0;                      // boundary cutoff; 0: 2*D
  uint64_t seed = 0;
  long bin_size = 100;              // bin_size must divide sweeps
  bool use_cache = true;            // false: fresh amplitude per ratio
  long sector_sz = 0;               // sampling sector (moves preserve Sz)

  void validate() const;
  long effective_equilibration() const;
  long effective_dc(long bond_dim) const;
};

struct Estimator {
  double mean = 0.0;
  double std_error = 0.0;
  long n_bins = 0;
};

struct McBinRecord {
  long walker = 0;
  long bin = 0;
  double energy = 0.0;
  double acceptance = 0.0;
};

struct ExchangeProposal {
  bool valid = false;  // false: the drawn bond was aligned (null proposal)
  Site a;
  Site b;
};

// Uniform draw over all NN bonds; aligned pairs are null proposals, which
// keeps the move symmetric (see notes in the module docs).
ExchangeProposal propose_exchange(const SpinConfig& config,
                                  const BondLists& bonds,
                                  std::mt19937_64& rng);

// One Metropolis exchange attempt with acceptance min(1, (W'/W)^2).
// Returns true when the move was accepted.
bool metropolis_step(SingleLayerCache& cache, const BondLists& bonds,
                     std::mt19937_64& rng);

// E(S) of Eq. 2: diagonal terms plus amplitude-ratio exchange terms over all
// bonds, via fresh amplitude evaluations.
double local_energy(const PepsState& state, const SpinConfig& config, long Dc);
// Same through a walker's incremental cache.
double local_energy_cached(SingleLayerCache& cache, const BondLists& bonds);

// Deterministic checkerboard-based start config with n_up = N/2 + sector_sz.
SpinConfig sector_start_config(const LatticeSpec& spec, long sector_sz);

Estimator sample_energy(const PepsState& state, const McParams& params,
                        std::vector<McBinRecord>* diagnostics = nullptr);

struct GradientEstimate {
  std::vector<DenseTensor> gradient;            // Eq. 3, per site
  std::vector<DenseTensor> gradient_std_error;  // binned, per element
  Estimator energy;
  double acceptance_rate = 0.0;
};

GradientEstimate sample_gradient(const PepsState& state,
                                 const McParams& params,
                                 std::vector<McBinRecord>* diagnostics =
                                     nullptr);

// Deterministic exact summations at the given cutoff (desk-scale evaluation
// and test oracles; independent of thread count).
double exact_sector_energy(const PepsState& state, long Dc, long sector_sz = 0,
                           int threads = 0);
double exact_full_energy(const PepsState& state, long Dc, int threads = 0);
// Exact Eq. 3 gradient under the sector-restricted W^2 measure.
std::vector<DenseTensor> exact_sector_gradient(const PepsState& state, long Dc,
                                               double* energy_out = nullptr,
                                               long sector_sz = 0,
                                               int threads = 0);

std::string mc_log_csv(const std::vector<McBinRecord>& records);

}  // namespace pepsmc
