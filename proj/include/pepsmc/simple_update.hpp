#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pepsmc/lattice.hpp"
#include "pepsmc/peps.hpp"
#include "pepsmc/tensor.hpp"

namespace pepsmc {

// Diagonal environment weights, one non-negative vector per interior bond,
// descending with the largest entry normalized to 1. Site tensors carry
// sqrt(lambda) absorbed on every bond, so the state is always a plain PEPS.
class SuEnvironment {
 public:
  static SuEnvironment ones(const PepsState& state);

  // Bond (r,c)-(r,c+1).
  std::vector<double>& horizontal(long r, long c);
  const std::vector<double>& horizontal(long r, long c) const;
  // Bond (r,c)-(r+1,c).
  std::vector<double>& vertical(long r, long c);
  const std::vector<double>& vertical(long r, long c) const;

  // Weights on a site's leg (0=l, 1=r, 2=u, 3=d); nullptr on open edges.
  const std::vector<double>* leg(long r, long c, long leg) const;

 private:
  long rows_ = 0;
  long cols_ = 0;
  std::vector<std::vector<double>> h_;
  std::vector<std::vector<double>> v_;
};

struct SuStage {
  double dtau = 0.0;
  double convergence_tol = 1e-6;
  long max_sweeps = 2000;
};

struct SuSchedule {
  std::vector<SuStage> stages;
  void validate() const;
  static SuSchedule standard();  // dtau 0.01 then 0.001, tol 1e-6
};

struct SuSweepRecord {
  long stage = 0;
  long sweep = 0;
  double dtau = 0.0;
  double max_rel_change = 0.0;
  double max_truncation_error = 0.0;
};

struct SuResult {
  PepsState state;
  std::vector<SuSweepRecord> log;
  bool converged = false;
};

// exp(-dtau * coupling * h2) for the two-site Heisenberg term h2 = S_i.S_j,
// as a rank-4 tensor (s_i, s_j, s_i', s_j') over physical levels.
DenseTensor trotter_gate(double coupling, double dtau);

struct SuUpdateResult {
  double truncation_error = 0.0;
};

// Gate application on one NN bond: environment weights multiplied onto the
// spectator legs, pair contracted, gate applied, bond refactorized by a
// truncated SVD to at most D, weights restored. Updates state and env in
// place.
SuUpdateResult su_bond_update(PepsState& state, SuEnvironment& env,
                              const Bond& bond, const DenseTensor& gate,
                              long D);

// Diagonal-bond gate through the three-site L-shaped cluster (the diagonal
// pair plus one intermediate site), split back with two sequential truncated
// SVDs.
SuUpdateResult su_nnn_update(PepsState& state, SuEnvironment& env,
                             const Bond& bond, const DenseTensor& gate,
                             long D);

// One full Trotter sweep: horizontal bonds row-major, vertical bonds, then
// diagonal bonds when a NNN gate is given. Returns the largest truncation
// error seen.
double su_sweep(PepsState& state, SuEnvironment& env, const DenseTensor& j1_gate,
                const DenseTensor* j2_gate, long D);

// Imaginary-time evolution over the schedule; stops each stage when the
// largest per-site relative change drops below its tolerance.
SuResult run_simple_update(const PepsState& initial,
                           const SuSchedule& schedule);

// Random D=2 start evolved through the schedule, then grown one bond unit at
// a time (with small noise) and re-evolved until target_bond_dim.
SuResult su_prepare(const LatticeSpec& spec, long target_bond_dim,
                    uint64_t seed, const SuSchedule& schedule);

std::string su_log_csv(const std::vector<SuSweepRecord>& log);

}  // namespace pepsmc
