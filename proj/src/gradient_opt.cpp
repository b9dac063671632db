#include "pepsmc/gradient_opt.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pepsmc/rng.hpp"

namespace pepsmc {

void GoSchedule::validate() const {
  if (phases.empty()) throw std::invalid_argument("GoSchedule: no phases");
  for (const GoPhase& p : phases) {
    if (p.steps < 1) throw std::invalid_argument("GoSchedule: steps < 1");
    if (p.dt_start <= 0.0)
      throw std::invalid_argument("GoSchedule: step size <= 0");
    if (p.decay <= 0.0 || p.decay > 1.0)
      throw std::invalid_argument("GoSchedule: decay outside (0, 1]");
    if (p.m_start < 1 || (p.m_end >= 0 && p.m_end < 1))
      throw std::invalid_argument("GoSchedule: sample budget < 1");
  }
}

long GoSchedule::total_steps() const {
  long n = 0;
  for (const GoPhase& p : phases) n += p.steps;
  return n;
}

GoSchedule GoSchedule::paper() {
  return {{{50, 0.005, 1.0, 50000, 100000},
           {50, 0.005 * 0.968, 0.968, 100000, -1},
           {20, 0.001, 1.0, 500000, -1}}};
}

GoSchedule GoSchedule::desk() {
  return {{{50, 0.005, 1.0, 1000, 2000},
           {50, 0.005 * 0.968, 0.968, 2000, -1},
           {20, 0.001, 1.0, 8000, -1}}};
}

PepsState go_step(const PepsState& state,
                  const std::vector<DenseTensor>& gradient, double dt,
                  std::mt19937_64& rng) {
  const LatticeSpec& spec = state.spec();
  if (gradient.size() != static_cast<size_t>(spec.sites()))
    throw std::invalid_argument("go_step: gradient grid size mismatch");
  PepsState next = state;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (long r = 0; r < spec.rows; ++r)
    for (long c = 0; c < spec.cols; ++c) {
      const DenseTensor& g = gradient[static_cast<size_t>(r * spec.cols + c)];
      DenseTensor& a = next.site(r, c);
      if (g.dims() != a.dims())
        throw std::invalid_argument("go_step: gradient shape mismatch");
      if (!g.all_finite())
        throw std::runtime_error("go_step: non-finite gradient");
      for (long k = 0; k < a.size(); ++k) {
        const double p = unit(rng);  // always drawn: stream layout fixed
        const double gk = g.storage()[static_cast<size_t>(k)];
        if (gk > 0.0)
          a.storage()[static_cast<size_t>(k)] -= p * dt;
        else if (gk < 0.0)
          a.storage()[static_cast<size_t>(k)] += p * dt;
      }
    }
  next.rescale();
  return next;
}

GoResult run_go(const PepsState& initial, const GoSchedule& schedule,
                const McParams& mc, const std::string& checkpoint_prefix) {
  schedule.validate();
  mc.validate();

  GoResult res;
  PepsState current = initial;
  current.rescale();
  res.state = current;
  res.best_energy = 1e300;
  auto rng = make_rng(derive_seed(mc.seed, 0x676f7374 /* "gost" */));

  long step = 0;
  for (const GoPhase& phase : schedule.phases) {
    double dt = phase.dt_start;
    for (long n = 0; n < phase.steps; ++n, ++step) {
      long m = phase.m_start;
      if (phase.m_end >= 0 && phase.steps > 1)
        m += (phase.m_end - phase.m_start) * n / (phase.steps - 1);

      McParams params = mc;
      params.seed = derive_seed(mc.seed, 0x676f6d63 /* "gomc" */,
                                static_cast<uint64_t>(step));
      // Distribute the sample budget over walkers in whole bins.
      long sweeps = (m + params.walkers - 1) / params.walkers;
      sweeps = ((sweeps + params.bin_size - 1) / params.bin_size) *
               params.bin_size;
      params.sweeps = sweeps;

      const auto t0 = std::chrono::steady_clock::now();
      GradientEstimate grad;
      try {
        grad = sample_gradient(current, params);
      } catch (const std::exception&) {
        grad = sample_gradient(current, params);  // one retry, then abort
      }
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      res.trace.push_back({step, dt, params.sweeps * params.walkers,
                           grad.energy.mean, grad.energy.std_error, seconds});

      if (grad.energy.mean < res.best_energy) {
        res.best_energy = grad.energy.mean;
        res.best_step = step;
        res.state = current;
        if (!checkpoint_prefix.empty()) {
          std::ostringstream name;
          name << checkpoint_prefix << "_step";
          name.width(3);
          name.fill('0');
          name << step << ".peps";
          res.state.save(name.str());
        }
      }

      current = go_step(current, grad.gradient, dt, rng);
      dt *= phase.decay;
    }
  }
  return res;
}

std::string go_trace_csv(const std::vector<GoStepRecord>& trace) {
  std::ostringstream out;
  out << "step,dt,samples,energy,std_error,seconds\n";
  out.precision(12);
  for (const GoStepRecord& r : trace)
    out << r.step << ',' << r.dt << ',' << r.samples << ',' << r.energy << ','
        << r.std_error << ',' << r.seconds << '\n';
  return out.str();
}

}  // namespace pepsmc
