#include "pepsmc/capi.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pepsmc/config.hpp"
#include "pepsmc/contraction.hpp"
#include "pepsmc/ed.hpp"
#include "pepsmc/gradient_opt.hpp"
#include "pepsmc/monte_carlo.hpp"
#include "pepsmc/observables.hpp"
#include "pepsmc/peps.hpp"
#include "pepsmc/simple_update.hpp"

struct pepsmc_config {
  pepsmc::RunConfig cfg;
};

struct pepsmc_state {
  pepsmc::PepsState state;
};

namespace {

thread_local std::string g_last_error;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
pepsmc_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PEPSMC_OK;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return PEPSMC_ERR_IO;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return PEPSMC_ERR_INVALID;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PEPSMC_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return PEPSMC_ERR_RUNTIME;
  }
}

pepsmc_status null_error(const char* what) {
  g_last_error = std::string(what) + " is null";
  return PEPSMC_ERR_NULL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* pepsmc_version(void) { return "pepsmc 1.0.0"; }

const char* pepsmc_last_error(void) { return g_last_error.c_str(); }

void pepsmc_string_free(char* s) { std::free(s); }

pepsmc_status pepsmc_config_parse(const char* text, pepsmc_config** out) {
  if (!text) return null_error("text");
  if (!out) return null_error("out");
  return guarded([&] {
    auto* handle = new pepsmc_config{pepsmc::parse_config(text)};
    *out = handle;
  });
}

pepsmc_status pepsmc_config_read(const char* path, pepsmc_config** out) {
  if (!path) return null_error("path");
  if (!out) return null_error("out");
  return guarded([&] {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open config file ") + path);
    std::ostringstream text;
    text << in.rdbuf();
    *out = new pepsmc_config{pepsmc::parse_config(text.str())};
  });
}

pepsmc_status pepsmc_config_serialize(const pepsmc_config* config,
                                      char** out) {
  if (!config) return null_error("config");
  if (!out) return null_error("out");
  return guarded([&] { *out = dup_string(serialize_config(config->cfg)); });
}

pepsmc_status pepsmc_config_set_threads(pepsmc_config* config, int threads) {
  if (!config) return null_error("config");
  return guarded([&] {
    if (threads < 0) throw std::invalid_argument("threads < 0");
    config->cfg.threads = threads;
  });
}

void pepsmc_config_free(pepsmc_config* config) { delete config; }

pepsmc_status pepsmc_state_random(const pepsmc_config* config,
                                  pepsmc_state** out) {
  if (!config) return null_error("config");
  if (!out) return null_error("out");
  return guarded([&] {
    *out = new pepsmc_state{pepsmc::PepsState::random(
        config->cfg.lattice, config->cfg.bond_dim, config->cfg.seed)};
  });
}

pepsmc_status pepsmc_state_load(const char* path, pepsmc_state** out) {
  if (!path) return null_error("path");
  if (!out) return null_error("out");
  return guarded([&] {
    if (!std::filesystem::exists(path))
      throw IoError(std::string("checkpoint not found: ") + path);
    try {
      *out = new pepsmc_state{pepsmc::PepsState::load(path)};
    } catch (const std::exception& e) {
      throw IoError(std::string("corrupt checkpoint ") + path + ": " +
                    e.what());
    }
  });
}

pepsmc_status pepsmc_state_save(const pepsmc_state* state, const char* path) {
  if (!state) return null_error("state");
  if (!path) return null_error("path");
  return guarded([&] {
    try {
      state->state.save(path);
    } catch (const std::exception& e) {
      throw IoError(std::string("cannot write checkpoint ") + path + ": " +
                    e.what());
    }
  });
}

pepsmc_status pepsmc_state_shape(const pepsmc_state* state, long* rows,
                                 long* cols, long* bond_dim) {
  if (!state) return null_error("state");
  return guarded([&] {
    if (rows) *rows = state->state.spec().rows;
    if (cols) *cols = state->state.spec().cols;
    if (bond_dim) *bond_dim = state->state.bond_dim();
  });
}

void pepsmc_state_free(pepsmc_state* state) { delete state; }

pepsmc_status pepsmc_run_ed(const pepsmc_config* config,
                            double* energy_per_site, long* basis_dim,
                            long* iterations) {
  if (!config) return null_error("config");
  if (!energy_per_site) return null_error("energy_per_site");
  return guarded([&] {
    pepsmc::EdOptions opts;
    opts.seed = config->cfg.seed;
    opts.threads = config->cfg.threads;
    pepsmc::EdResult res = pepsmc::exact_ground_energy(
        config->cfg.lattice, config->cfg.sector, opts);
    *energy_per_site =
        res.energy / static_cast<double>(config->cfg.lattice.sites());
    if (basis_dim) *basis_dim = res.basis_dim;
    if (iterations) *iterations = res.iterations;
  });
}

pepsmc_status pepsmc_run_simple_update(const pepsmc_config* config,
                                       pepsmc_state** out, char** log_csv) {
  if (!config) return null_error("config");
  if (!out) return null_error("out");
  return guarded([&] {
    pepsmc::SuResult res =
        pepsmc::su_prepare(config->cfg.lattice, config->cfg.bond_dim,
                           config->cfg.seed, config->cfg.su);
    if (log_csv) *log_csv = dup_string(pepsmc::su_log_csv(res.log));
    *out = new pepsmc_state{std::move(res.state)};
  });
}

pepsmc_status pepsmc_run_gradient_opt(const pepsmc_config* config,
                                      const pepsmc_state* initial,
                                      const char* checkpoint_prefix,
                                      pepsmc_state** out, char** trace_csv,
                                      double* best_energy) {
  if (!config) return null_error("config");
  if (!initial) return null_error("initial");
  if (!out) return null_error("out");
  return guarded([&] {
    pepsmc::GoResult res = pepsmc::run_go(
        initial->state, config->cfg.go, config->cfg.mc,
        checkpoint_prefix ? checkpoint_prefix : "");
    if (trace_csv) *trace_csv = dup_string(pepsmc::go_trace_csv(res.trace));
    if (best_energy) *best_energy = res.best_energy;
    *out = new pepsmc_state{std::move(res.state)};
  });
}

pepsmc_status pepsmc_measure_energy(const pepsmc_config* config,
                                    const pepsmc_state* state, double* mean,
                                    double* std_error) {
  if (!config) return null_error("config");
  if (!state) return null_error("state");
  if (!mean) return null_error("mean");
  return guarded([&] {
    pepsmc::Estimator est =
        pepsmc::sample_energy(state->state, config->cfg.mc);
    *mean = est.mean;
    if (std_error) *std_error = est.std_error;
  });
}

pepsmc_status pepsmc_measure_correlations(const pepsmc_config* config,
                                          const pepsmc_state* state,
                                          long margin, char** csv) {
  if (!config) return null_error("config");
  if (!state) return null_error("state");
  if (!csv) return null_error("csv");
  return guarded([&] {
    pepsmc::CorrelationResult res = pepsmc::spin_correlation(
        state->state, pepsmc::window_pairs(state->state.spec(), margin),
        config->cfg.mc);
    *csv = dup_string(pepsmc::correlation_csv(res));
  });
}

pepsmc_status pepsmc_measure_staggered(const pepsmc_config* config,
                                       const pepsmc_state* state, long margin,
                                       double* value, double* std_error) {
  if (!config) return null_error("config");
  if (!state) return null_error("state");
  if (!value) return null_error("value");
  return guarded([&] {
    pepsmc::Estimator est =
        pepsmc::staggered_magnetization(state->state, margin, config->cfg.mc);
    *value = est.mean;
    if (std_error) *std_error = est.std_error;
  });
}

pepsmc_status pepsmc_amplitude(const pepsmc_config* config,
                               const pepsmc_state* state, const int* spins,
                               double* log_magnitude, int* sign) {
  if (!config) return null_error("config");
  if (!state) return null_error("state");
  if (!spins) return null_error("spins");
  if (!log_magnitude) return null_error("log_magnitude");
  if (!sign) return null_error("sign");
  return guarded([&] {
    const pepsmc::LatticeSpec& spec = state->state.spec();
    pepsmc::SpinConfig cfg(spec.rows, spec.cols);
    for (long r = 0; r < spec.rows; ++r)
      for (long c = 0; c < spec.cols; ++c) {
        const int s = spins[r * spec.cols + c];
        if (s != 1 && s != -1)
          throw std::invalid_argument("spins must be +-1");
        cfg.set_spin(r, c, s);
      }
    pepsmc::Amplitude w = pepsmc::amplitude(
        state->state, cfg,
        config->cfg.mc.effective_dc(state->state.bond_dim()));
    *log_magnitude = w.log_magnitude;
    *sign = w.sign;
  });
}

pepsmc_status pepsmc_bench_amplitude(const pepsmc_config* config,
                                     long repetitions,
                                     double* seconds_per_call) {
  if (!config) return null_error("config");
  if (!seconds_per_call) return null_error("seconds_per_call");
  return guarded([&] {
    if (repetitions < 1) throw std::invalid_argument("repetitions < 1");
    pepsmc::PepsState state = pepsmc::PepsState::random(
        config->cfg.lattice, config->cfg.bond_dim, config->cfg.seed);
    const pepsmc::SpinConfig cfg =
        pepsmc::sector_start_config(config->cfg.lattice, config->cfg.sector);
    const long dc = config->cfg.mc.effective_dc(state.bond_dim());
    pepsmc::amplitude(state, cfg, dc);  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (long i = 0; i < repetitions; ++i) pepsmc::amplitude(state, cfg, dc);
    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    *seconds_per_call = total / static_cast<double>(repetitions);
  });
}

}  // extern "C"
