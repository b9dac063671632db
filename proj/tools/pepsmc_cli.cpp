// Command-line front end; talks to the engine exclusively through the C API.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pepsmc/capi.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) {
  std::cerr << "error: " << what;
  const char* detail = pepsmc_last_error();
  if (detail && *detail) std::cerr << ": " << detail;
  std::cerr << '\n';
  std::exit(1);
}

void check(pepsmc_status status, const std::string& what) {
  if (status != PEPSMC_OK) fail(what);
}

struct ConfigDeleter {
  void operator()(pepsmc_config* c) const { pepsmc_config_free(c); }
};
struct StateDeleter {
  void operator()(pepsmc_state* s) const { pepsmc_state_free(s); }
};
using ConfigPtr = std::unique_ptr<pepsmc_config, ConfigDeleter>;
using StatePtr = std::unique_ptr<pepsmc_state, StateDeleter>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  pepsmc_string_free(s);
  return out;
}

ConfigPtr load_config(const std::string& path, int threads) {
  pepsmc_config* cfg = nullptr;
  check(pepsmc_config_read(path.c_str(), &cfg), "reading config " + path);
  if (threads >= 0)
    check(pepsmc_config_set_threads(cfg, threads), "setting threads");
  return ConfigPtr(cfg);
}

StatePtr load_state(const std::string& path) {
  pepsmc_state* state = nullptr;
  check(pepsmc_state_load(path.c_str(), &state), "loading checkpoint " + path);
  return StatePtr(state);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  out << content;
}

// Replayable record of a run: the resolved config plus what was produced.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    const pepsmc_config* cfg,
                    const std::vector<std::string>& artifacts) {
  char* canon = nullptr;
  check(pepsmc_config_serialize(cfg, &canon), "serializing config");
  json manifest = {{"version", pepsmc_version()},
                   {"command", command},
                   {"config", take_string(canon)},
                   {"artifacts", artifacts}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  fs::create_directories(dir);
  return dir;
}

long config_sites(const pepsmc_config* cfg) {
  // rows*cols from the canonical serialization.
  const std::string canon = [&] {
    char* s = nullptr;
    check(pepsmc_config_serialize(cfg, &s), "serializing config");
    return take_string(s);
  }();
  long rows = 0, cols = 0;
  std::istringstream in(canon);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("rows=", 0) == 0) rows = std::stol(line.substr(5));
    if (line.rfind("cols=", 0) == 0) cols = std::stol(line.substr(5));
  }
  return rows * cols;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-PEPS ground-state engine for the J1-J2 model"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path, checkpoint_path, out_dir;
  int threads = -1;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--checkpoint", checkpoint_path, "PEPS checkpoint file");
  app.add_option("--out", out_dir, "output directory (default: .)");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* cmd_ed = app.add_subcommand("ed", "exact ground energy (small lattices)");
  auto* cmd_su = app.add_subcommand("su", "simple-update evolution");
  auto* cmd_go = app.add_subcommand(
      "go", "gradient optimization from a checkpoint (or SU when none given)");
  auto* cmd_measure =
      app.add_subcommand("measure", "energy, correlations, m^2_s");
  long margin = 1;
  cmd_measure->add_option("--margin", margin,
                          "bulk-window margin for correlations and m^2_s");
  auto* cmd_amp = app.add_subcommand("amp", "W(S) for one spin configuration");
  std::string spins_text;
  cmd_amp->add_option("--spins", spins_text,
                      "row-major spin string, e.g. +-+-")
      ->required();
  auto* cmd_bench =
      app.add_subcommand("bench", "amplitude cost vs boundary cutoff");
  long reps = 20;
  cmd_bench->add_option("--reps", reps, "evaluations per timing point");

  CLI11_PARSE(app, argc, argv);

  if (config_path.empty()) fail("--config is required");
  ConfigPtr cfg = load_config(config_path, threads);
  const fs::path dir = prepare_out_dir(out_dir);
  std::cout.precision(10);

  if (cmd_ed->parsed()) {
    double e = 0.0;
    long dim = 0, iters = 0;
    check(pepsmc_run_ed(cfg.get(), &e, &dim, &iters), "ed");
    std::cout << "energy_per_site " << e << "\n"
              << "energy_total " << e * static_cast<double>(config_sites(cfg.get()))
              << "\nbasis_dim " << dim << "\niterations " << iters << "\n";
    write_manifest(dir, "ed", cfg.get(), {});
    return 0;
  }

  if (cmd_su->parsed()) {
    pepsmc_state* state = nullptr;
    char* log = nullptr;
    check(pepsmc_run_simple_update(cfg.get(), &state, &log), "su");
    StatePtr su(state);
    const fs::path ckpt = dir / "su.peps";
    check(pepsmc_state_save(su.get(), ckpt.string().c_str()),
          "saving checkpoint");
    write_file(dir / "su_log.csv", take_string(log));
    double e = 0.0, err = 0.0;
    check(pepsmc_measure_energy(cfg.get(), su.get(), &e, &err), "measure");
    const double n = static_cast<double>(config_sites(cfg.get()));
    std::cout << "energy_per_site " << e / n << " +- " << err / n << "\n"
              << "checkpoint " << ckpt.string() << "\n";
    write_manifest(dir, "su", cfg.get(), {"su.peps", "su_log.csv"});
    return 0;
  }

  if (cmd_go->parsed()) {
    StatePtr initial;
    if (!checkpoint_path.empty()) {
      initial = load_state(checkpoint_path);
    } else {
      pepsmc_state* state = nullptr;
      check(pepsmc_run_simple_update(cfg.get(), &state, nullptr), "su start");
      initial.reset(state);
    }
    pepsmc_state* best = nullptr;
    char* trace = nullptr;
    double best_energy = 0.0;
    const std::string prefix = (dir / "go_best").string();
    check(pepsmc_run_gradient_opt(cfg.get(), initial.get(), prefix.c_str(),
                                  &best, &trace, &best_energy),
          "go");
    StatePtr out(best);
    const fs::path ckpt = dir / "go.peps";
    check(pepsmc_state_save(out.get(), ckpt.string().c_str()),
          "saving checkpoint");
    write_file(dir / "go_trace.csv", take_string(trace));
    const double n = static_cast<double>(config_sites(cfg.get()));
    std::cout << "best_energy_per_site " << best_energy / n << "\n"
              << "checkpoint " << ckpt.string() << "\n";
    write_manifest(dir, "go", cfg.get(), {"go.peps", "go_trace.csv"});
    return 0;
  }

  if (cmd_measure->parsed()) {
    if (checkpoint_path.empty()) fail("measure needs --checkpoint");
    StatePtr state = load_state(checkpoint_path);
    double e = 0.0, err = 0.0;
    check(pepsmc_measure_energy(cfg.get(), state.get(), &e, &err), "energy");
    long rows = 0, cols = 0;
    check(pepsmc_state_shape(state.get(), &rows, &cols, nullptr), "shape");
    const double n = static_cast<double>(rows * cols);
    char* csv = nullptr;
    check(pepsmc_measure_correlations(cfg.get(), state.get(), margin, &csv),
          "correlations");
    write_file(dir / "correlations.csv", take_string(csv));
    double m2 = 0.0, m2_err = 0.0;
    check(pepsmc_measure_staggered(cfg.get(), state.get(), margin, &m2,
                                   &m2_err),
          "staggered magnetization");
    std::cout << "energy_per_site " << e / n << " +- " << err / n << "\n"
              << "m2_staggered " << m2 << " +- " << m2_err << "\n";
    write_manifest(dir, "measure", cfg.get(), {"correlations.csv"});
    return 0;
  }

  if (cmd_amp->parsed()) {
    if (checkpoint_path.empty()) fail("amp needs --checkpoint");
    StatePtr state = load_state(checkpoint_path);
    long rows = 0, cols = 0;
    check(pepsmc_state_shape(state.get(), &rows, &cols, nullptr), "shape");
    if (static_cast<long>(spins_text.size()) != rows * cols)
      fail("--spins needs one +/- per site");
    std::vector<int> spins;
    for (char ch : spins_text) {
      if (ch != '+' && ch != '-') fail("--spins characters must be + or -");
      spins.push_back(ch == '+' ? 1 : -1);
    }
    double log_mag = 0.0;
    int sign = 0;
    check(pepsmc_amplitude(cfg.get(), state.get(), spins.data(), &log_mag,
                           &sign),
          "amplitude");
    std::cout << "sign " << sign << "\nlog_magnitude " << log_mag << "\n"
              << "value " << (sign == 0 ? 0.0 : sign * std::exp(log_mag))
              << "\n";
    return 0;
  }

  if (cmd_bench->parsed()) {
    // Time amplitude evaluation while doubling the boundary cutoff, to show
    // the O(D^4 Dc^2) row-absorb cost curve.
    char* canon_raw = nullptr;
    check(pepsmc_config_serialize(cfg.get(), &canon_raw), "serialize");
    const std::string canon = take_string(canon_raw);
    long d = 2;
    std::istringstream in(canon);
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("D=", 0) == 0) d = std::stol(line.substr(2));
    std::cout << "Dc,seconds_per_amplitude\n";
    for (long dc : {d, 2 * d, 3 * d, 4 * d}) {
      pepsmc_config* probe = nullptr;
      const std::string text = canon + "Dc=" + std::to_string(dc) + "\n";
      check(pepsmc_config_parse(text.c_str(), &probe), "bench config");
      ConfigPtr holder(probe);
      double per_call = 0.0;
      check(pepsmc_bench_amplitude(holder.get(), reps, &per_call), "bench");
      std::cout << dc << ',' << per_call << "\n";
    }
    return 0;
  }

  return 0;
}
