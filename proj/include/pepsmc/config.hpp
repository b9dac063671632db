#pragma once

#include <cstdint>
#include <string>

#include "pepsmc/gradient_opt.hpp"
#include "pepsmc/lattice.hpp"
#include "pepsmc/monte_carlo.hpp"
#include "pepsmc/simple_update.hpp"

namespace pepsmc {

// Resolved run configuration. Text form is key=value lines with '#'
// comments; unknown keys are rejected. See kConfigKeys in config.cpp for
// the full key table and defaults.
struct RunConfig {
  LatticeSpec lattice{4, 4, 1.0, 0.0};
  long bond_dim = 2;   // D
  long cutoff = 0;     // Dc; 0 means 2*D
  uint64_t seed = 0;
  long sector = 0;
  int threads = 0;     // 0 means all available cores
  std::string out_dir = ".";
  McParams mc;
  SuSchedule su = SuSchedule::standard();
  GoSchedule go = GoSchedule::desk();

  long effective_cutoff() const { return cutoff > 0 ? cutoff : 2 * bond_dim; }
  void validate() const;
};

RunConfig parse_config(const std::string& text);

// Canonical form: every key, fixed order, resolved values; parsing it back
// reproduces the config exactly.
std::string serialize_config(const RunConfig& config);

// Schedule string forms used by the su.schedule / go.schedule keys:
//   su: "dtau:tol:max_sweeps;..."            (or the name "standard")
//   go: "steps:dt:decay:m_start:m_end;..."   (or "desk" / "paper")
SuSchedule parse_su_schedule(const std::string& text);
GoSchedule parse_go_schedule(const std::string& text);
std::string format_su_schedule(const SuSchedule& schedule);
std::string format_go_schedule(const GoSchedule& schedule);

}  // namespace pepsmc
