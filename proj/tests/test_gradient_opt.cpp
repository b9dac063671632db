#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "pepsmc/gradient_opt.hpp"
#include "pepsmc/monte_carlo.hpp"
#include "pepsmc/rng.hpp"
#include "pepsmc/simple_update.hpp"

using namespace pepsmc;

namespace {

std::vector<DenseTensor> constant_gradient(const PepsState& state,
                                           double value) {
  std::vector<DenseTensor> grad;
  const LatticeSpec& spec = state.spec();
  for (long r = 0; r < spec.rows; ++r)
    for (long c = 0; c < spec.cols; ++c) {
      DenseTensor g(state.site(r, c).dims());
      for (double& x : g.storage()) x = value;
      grad.push_back(std::move(g));
    }
  return grad;
}

}  // namespace

TEST_CASE("schedule validation and defaults") {
  CHECK_NOTHROW(GoSchedule::desk().validate());
  CHECK_NOTHROW(GoSchedule::paper().validate());
  CHECK(GoSchedule::desk().total_steps() == 120);
  CHECK(GoSchedule::paper().total_steps() == 120);
  GoSchedule bad{{{10, -0.1, 1.0, 100, -1}}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {{{10, 0.1, 1.5, 100, -1}}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(GoSchedule{}.validate(), std::invalid_argument);
}

TEST_CASE("zero gradient leaves the state unchanged") {
  PepsState state = PepsState::random({2, 2, 1.0, 0.0}, 2, 5);
  state.rescale();
  auto rng = make_rng(1);
  PepsState next = go_step(state, constant_gradient(state, 0.0), 0.01, rng);
  for (long r = 0; r < 2; ++r)
    for (long c = 0; c < 2; ++c) CHECK(next.site(r, c) == state.site(r, c));
}

TEST_CASE("positive gradient moves every element down by less than dt") {
  PepsState state = PepsState::random({2, 2, 1.0, 0.0}, 2, 7);
  state.rescale();
  const double dt = 0.001;
  auto rng = make_rng(2);
  PepsState next = go_step(state, constant_gradient(state, 2.5), dt, rng);
  for (long r = 0; r < 2; ++r)
    for (long c = 0; c < 2; ++c) {
      // go_step rescales afterwards, so check the invariant modulo an
      // unknown positive factor f: a_k - f*b_k must lie in (0, dt) for
      // every element, i.e. the feasible f-interval is non-empty.
      const DenseTensor& a = state.site(r, c);
      const DenseTensor& b = next.site(r, c);
      double lo = 0.0, hi = 1e300;
      for (long k = 0; k < a.size(); ++k) {
        const double ak = a.storage()[static_cast<size_t>(k)];
        const double bk = b.storage()[static_cast<size_t>(k)];
        if (bk > 0.0) {
          hi = std::min(hi, ak / bk);             // a - f b > 0
          lo = std::max(lo, (ak - dt) / bk);      // a - f b < dt
        } else if (bk < 0.0) {
          lo = std::max(lo, ak / bk);
          hi = std::min(hi, (ak - dt) / bk);
        } else {
          CHECK(ak > 0.0);
          CHECK(ak < dt);
        }
      }
      CHECK(lo < hi);  // consistent factor exists
    }
}

TEST_CASE("update depends only on gradient signs") {
  PepsState state = PepsState::random({2, 3, 1.0, 0.0}, 2, 11);
  state.rescale();
  std::vector<DenseTensor> grad;
  auto grad_rng = make_rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (long r = 0; r < 2; ++r)
    for (long c = 0; c < 3; ++c) {
      DenseTensor g(state.site(r, c).dims());
      for (double& x : g.storage()) x = dist(grad_rng);
      grad.push_back(std::move(g));
    }
  std::vector<DenseTensor> scaled = grad;
  for (DenseTensor& g : scaled) g.scale(3.7);

  auto rng_a = make_rng(4);
  auto rng_b = make_rng(4);
  PepsState a = go_step(state, grad, 0.002, rng_a);
  PepsState b = go_step(state, scaled, 0.002, rng_b);
  for (long r = 0; r < 2; ++r)
    for (long c = 0; c < 3; ++c) CHECK(a.site(r, c) == b.site(r, c));
}

TEST_CASE("shape mismatch and non-finite gradients are rejected") {
  PepsState state = PepsState::random({2, 2, 1.0, 0.0}, 2, 13);
  auto rng = make_rng(5);
  std::vector<DenseTensor> wrong = constant_gradient(state, 1.0);
  wrong.pop_back();
  CHECK_THROWS_AS(go_step(state, wrong, 0.01, rng), std::invalid_argument);
  std::vector<DenseTensor> inf = constant_gradient(state, 1.0);
  inf[0].storage()[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(go_step(state, inf, 0.01, rng), std::runtime_error);
}

TEST_CASE("optimization lowers the energy of an SU state") {
  LatticeSpec spec{2, 3, 1.0, 0.0};
  SuResult su = su_prepare(spec, 2, 3, SuSchedule::standard());
  const double e_su = exact_sector_energy(su.state, 8);

  GoSchedule small{{{12, 0.02, 1.0, 800, -1}, {8, 0.005, 1.0, 2000, -1}}};
  McParams mc;
  mc.walkers = 4;
  mc.bin_size = 50;
  mc.seed = 21;
  GoResult res = run_go(su.state, small, mc);
  CHECK(res.trace.size() == 20);
  const double e_go = exact_sector_energy(res.state, 8);
  CHECK(e_go < e_su);
  CHECK(res.best_energy <= res.trace.front().energy);
}

TEST_CASE("run is deterministic") {
  LatticeSpec spec{2, 2, 1.0, 0.0};
  PepsState state = PepsState::random(spec, 2, 17);
  GoSchedule tiny{{{5, 0.01, 0.9, 200, 400}}};
  McParams mc;
  mc.walkers = 2;
  mc.bin_size = 50;
  mc.seed = 33;
  GoResult a = run_go(state, tiny, mc);
  GoResult b = run_go(state, tiny, mc);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].energy == b.trace[i].energy);
    CHECK(a.trace[i].dt == b.trace[i].dt);
    CHECK(a.trace[i].samples == b.trace[i].samples);
  }
  for (long r = 0; r < 2; ++r)
    for (long c = 0; c < 2; ++c)
      CHECK(a.state.site(r, c) == b.state.site(r, c));
}

TEST_CASE("sample ramp and decay show up in the trace") {
  LatticeSpec spec{2, 2, 1.0, 0.0};
  PepsState state = PepsState::random(spec, 2, 19);
  GoSchedule sched{{{3, 0.01, 1.0, 100, 300}, {3, 0.01, 0.5, 100, -1}}};
  McParams mc;
  mc.walkers = 1;
  mc.bin_size = 50;
  mc.seed = 1;
  GoResult res = run_go(state, sched, mc);
  REQUIRE(res.trace.size() == 6);
  CHECK(res.trace[0].samples == 100);
  CHECK(res.trace[1].samples == 200);
  CHECK(res.trace[2].samples == 300);
  CHECK(res.trace[3].dt == doctest::Approx(0.01));
  CHECK(res.trace[4].dt == doctest::Approx(0.005));
  CHECK(res.trace[5].dt == doctest::Approx(0.0025));
}

TEST_CASE("best checkpoints are written with step suffixes") {
  namespace fs = std::filesystem;
  const std::string prefix = "go_ckpt_test";
  for (const auto& entry : fs::directory_iterator("."))
    if (entry.path().filename().string().starts_with(prefix))
      fs::remove(entry.path());

  LatticeSpec spec{2, 2, 1.0, 0.0};
  PepsState state = PepsState::random(spec, 2, 23);
  GoSchedule tiny{{{4, 0.01, 1.0, 100, -1}}};
  McParams mc;
  mc.walkers = 1;
  mc.bin_size = 50;
  mc.seed = 2;
  GoResult res = run_go(state, tiny, mc, prefix);
  std::ostringstream best;
  best << prefix << "_step";
  best.width(3);
  best.fill('0');
  best << res.best_step << ".peps";
  CHECK(fs::exists(best.str()));
  PepsState loaded = PepsState::load(best.str());
  for (long r = 0; r < 2; ++r)
    for (long c = 0; c < 2; ++c)
      CHECK(loaded.site(r, c) == res.state.site(r, c));
  for (const auto& entry : fs::directory_iterator("."))
    if (entry.path().filename().string().starts_with(prefix))
      fs::remove(entry.path());
}

TEST_CASE("trace csv") {
  std::vector<GoStepRecord> trace = {{0, 0.005, 2000, -1.0, 0.01, 0.2}};
  std::string csv = go_trace_csv(trace);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,dt,samples,energy,std_error,seconds");
  std::getline(in, line);
  CHECK(line.substr(0, 2) == "0,");
}
