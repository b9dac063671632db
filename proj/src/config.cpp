#include "pepsmc/config.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace pepsmc {

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value '" + value + "' for key '" +
                              key + "'");
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value);
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(key, value);
  } catch (const std::out_of_range&) {
    bad_value(key, value);
  }
}

long parse_long(const std::string& key, const std::string& value) {
  long x = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), x);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    bad_value(key, value);
  return x;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  uint64_t x = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), x);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    bad_value(key, value);
  return x;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

// Shortest exact decimal form (round-trips through parse_double).
std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace

SuSchedule parse_su_schedule(const std::string& text) {
  if (text == "standard") return SuSchedule::standard();
  SuSchedule schedule;
  for (const std::string& part : split(text, ';')) {
    const std::vector<std::string> f = split(part, ':');
    if (f.size() != 3) bad_value("su.schedule", text);
    SuStage stage;
    stage.dtau = parse_double("su.schedule", f[0]);
    stage.convergence_tol = parse_double("su.schedule", f[1]);
    stage.max_sweeps = parse_long("su.schedule", f[2]);
    schedule.stages.push_back(stage);
  }
  schedule.validate();
  return schedule;
}

GoSchedule parse_go_schedule(const std::string& text) {
  if (text == "desk") return GoSchedule::desk();
  if (text == "paper") return GoSchedule::paper();
  GoSchedule schedule;
  for (const std::string& part : split(text, ';')) {
    const std::vector<std::string> f = split(part, ':');
    if (f.size() != 5) bad_value("go.schedule", text);
    GoPhase phase;
    phase.steps = parse_long("go.schedule", f[0]);
    phase.dt_start = parse_double("go.schedule", f[1]);
    phase.decay = parse_double("go.schedule", f[2]);
    phase.m_start = parse_long("go.schedule", f[3]);
    phase.m_end = parse_long("go.schedule", f[4]);
    schedule.phases.push_back(phase);
  }
  schedule.validate();
  return schedule;
}

std::string format_su_schedule(const SuSchedule& schedule) {
  std::string out;
  for (size_t i = 0; i < schedule.stages.size(); ++i) {
    const SuStage& s = schedule.stages[i];
    if (i) out += ';';
    out += format_double(s.dtau) + ':' + format_double(s.convergence_tol) +
           ':' + std::to_string(s.max_sweeps);
  }
  return out;
}

std::string format_go_schedule(const GoSchedule& schedule) {
  std::string out;
  for (size_t i = 0; i < schedule.phases.size(); ++i) {
    const GoPhase& p = schedule.phases[i];
    if (i) out += ';';
    out += std::to_string(p.steps) + ':' + format_double(p.dt_start) + ':' +
           format_double(p.decay) + ':' + std::to_string(p.m_start) + ':' +
           std::to_string(p.m_end);
  }
  return out;
}

void RunConfig::validate() const {
  lattice.validate();
  if (bond_dim < 1) throw std::invalid_argument("config: D < 1");
  if (cutoff != 0 && cutoff < bond_dim)
    throw std::invalid_argument("config: Dc < D");
  if (threads < 0) throw std::invalid_argument("config: threads < 0");
  if (out_dir.empty()) throw std::invalid_argument("config: empty out_dir");
  mc.validate();
  su.validate();
  go.validate();
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "rows") {
      cfg.lattice.rows = parse_long(key, value);
    } else if (key == "cols") {
      cfg.lattice.cols = parse_long(key, value);
    } else if (key == "j1") {
      cfg.lattice.j1 = parse_double(key, value);
    } else if (key == "j2") {
      cfg.lattice.j2 = parse_double(key, value);
    } else if (key == "D") {
      cfg.bond_dim = parse_long(key, value);
    } else if (key == "Dc") {
      cfg.cutoff = parse_long(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_u64(key, value);
    } else if (key == "sector") {
      cfg.sector = parse_long(key, value);
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(parse_long(key, value));
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "mc.sweeps") {
      cfg.mc.sweeps = parse_long(key, value);
    } else if (key == "mc.equilibration") {
      cfg.mc.equilibration_sweeps = parse_long(key, value);
    } else if (key == "mc.walkers") {
      cfg.mc.walkers = parse_long(key, value);
    } else if (key == "mc.bin_size") {
      cfg.mc.bin_size = parse_long(key, value);
    } else if (key == "mc.use_cache") {
      cfg.mc.use_cache = parse_bool(key, value);
    } else if (key == "su.schedule") {
      cfg.su = parse_su_schedule(value);
    } else if (key == "go.schedule") {
      cfg.go = parse_go_schedule(value);
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  // The sampler's coupled fields are owned by the top-level keys.
  cfg.mc.seed = cfg.seed;
  cfg.mc.sector_sz = cfg.sector;
  cfg.mc.dc = cfg.cutoff;
  cfg.validate();
  return cfg;
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream out;
  out << "rows=" << config.lattice.rows << '\n'
      << "cols=" << config.lattice.cols << '\n'
      << "j1=" << format_double(config.lattice.j1) << '\n'
      << "j2=" << format_double(config.lattice.j2) << '\n'
      << "D=" << config.bond_dim << '\n'
      << "Dc=" << config.cutoff << '\n'
      << "seed=" << config.seed << '\n'
      << "sector=" << config.sector << '\n'
      << "threads=" << config.threads << '\n'
      << "out_dir=" << config.out_dir << '\n'
      << "mc.sweeps=" << config.mc.sweeps << '\n'
      << "mc.equilibration=" << config.mc.equilibration_sweeps << '\n'
      << "mc.walkers=" << config.mc.walkers << '\n'
      << "mc.bin_size=" << config.mc.bin_size << '\n'
      << "mc.use_cache=" << (config.mc.use_cache ? "true" : "false") << '\n'
      << "su.schedule=" << format_su_schedule(config.su) << '\n'
      << "go.schedule=" << format_go_schedule(config.go) << '\n';
  return out.str();
}

}  // namespace pepsmc
