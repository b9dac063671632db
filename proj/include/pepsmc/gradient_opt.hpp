#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pepsmc/monte_carlo.hpp"
#include "pepsmc/peps.hpp"
#include "pepsmc/tensor.hpp"

namespace pepsmc {

// One optimization phase: `steps` sign-gradient updates with step size
// dt_start * decay^(n-1) at the phase's n-th step, and a sample budget
// ramping linearly m_start -> m_end (m_end < 0: fixed at m_start).
struct GoPhase {
  long steps = 0;
  double dt_start = 0.0;
  double decay = 1.0;
  long m_start = 0;
  long m_end = -1;
};

struct GoSchedule {
  std::vector<GoPhase> phases;
  void validate() const;
  long total_steps() const;
  // Paper-shaped schedules: full-size and the desk-scale default.
  static GoSchedule paper();
  static GoSchedule desk();
};

struct GoStepRecord {
  long step = 0;
  double dt = 0.0;
  long samples = 0;
  double energy = 0.0;
  double std_error = 0.0;
  double seconds = 0.0;
};

struct GoResult {
  PepsState state;  // best-energy checkpoint, not necessarily the last state
  std::vector<GoStepRecord> trace;
  double best_energy = 0.0;
  long best_step = 0;
};

// Eq. 6: A <- A - p * dt * sign(dE/dA), p uniform on (0,1) drawn per element
// (drawn even when sign is 0, so the stream layout is gradient-independent);
// the state is rescaled afterwards.
PepsState go_step(const PepsState& state,
                  const std::vector<DenseTensor>& gradient, double dt,
                  std::mt19937_64& rng);

// Full optimization loop; per step, sample_gradient under `mc` with the
// phase's sample budget, update, and track the lowest sampled energy. When
// checkpoint_prefix is non-empty each new best state is written to
// <prefix>_step<NNN>.peps.
GoResult run_go(const PepsState& initial, const GoSchedule& schedule,
                const McParams& mc,
                const std::string& checkpoint_prefix = "");

std::string go_trace_csv(const std::vector<GoStepRecord>& trace);

}  // namespace pepsmc
