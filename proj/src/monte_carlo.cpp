#include "pepsmc/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "pepsmc/ed.hpp"
#include "pepsmc/rng.hpp"

namespace pepsmc {

namespace {

constexpr uint64_t kMcTag = 0x6d636d63;  // "mcmc"

Estimator estimator_from_bins(const std::vector<double>& bins) {
  Estimator est;
  est.n_bins = static_cast<long>(bins.size());
  if (bins.empty()) return est;
  double sum = 0.0;
  for (double b : bins) sum += b;
  est.mean = sum / static_cast<double>(bins.size());
  if (bins.size() > 1) {
    double var = 0.0;
    for (double b : bins) var += (b - est.mean) * (b - est.mean);
    var /= static_cast<double>(bins.size() - 1);
    est.std_error = std::sqrt(var / static_cast<double>(bins.size()));
  }
  return est;
}

}  // namespace

void McParams::validate() const {
  if (sweeps < 1 || walkers < 1 || bin_size < 1)
    throw std::invalid_argument("McParams: counts must be positive");
  if (sweeps % bin_size != 0)
    throw std::invalid_argument("McParams: bin_size must divide sweeps");
  if (equilibration_sweeps < -1)
    throw std::invalid_argument("McParams: bad equilibration");
  if (dc < 0) throw std::invalid_argument("McParams: Dc < 0");
}

long McParams::effective_equilibration() const {
  return equilibration_sweeps >= 0 ? equilibration_sweeps
                                   : std::max<long>(1, sweeps / 10);
}

long McParams::effective_dc(long bond_dim) const {
  return dc > 0 ? dc : 2 * bond_dim;
}

ExchangeProposal propose_exchange(const SpinConfig& config,
                                  const BondLists& bonds,
                                  std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> pick(0, bonds.nn.size() - 1);
  const Bond& b = bonds.nn[pick(rng)];
  ExchangeProposal prop;
  prop.a = b.a;
  prop.b = b.b;
  prop.valid = config.spin(b.a.row, b.a.col) != config.spin(b.b.row, b.b.col);
  return prop;
}

bool metropolis_step(SingleLayerCache& cache, const BondLists& bonds,
                     std::mt19937_64& rng) {
  ExchangeProposal prop = propose_exchange(cache.config(), bonds, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);  // drawn unconditionally: stable stream layout
  if (!prop.valid) return false;
  const double ratio = cache.ratio_for_swap(prop.a, prop.b);
  if (ratio == 0.0) return false;  // W(S') = 0: always rejected
  if (ratio * ratio >= u) {
    cache.commit_swap(prop.a, prop.b);
    return true;
  }
  return false;
}

double local_energy(const PepsState& state, const SpinConfig& config,
                    long Dc) {
  const LatticeSpec& spec = state.spec();
  BondLists bonds = build_bonds(spec);
  Amplitude w = amplitude(state, config, Dc);
  if (w.sign == 0) throw std::runtime_error("local_energy: W(S) = 0");
  double e = 0.0;
  for (const Bond& b : bonds.all()) {
    const int si = config.spin(b.a.row, b.a.col);
    const int sj = config.spin(b.b.row, b.b.col);
    e += b.coupling * si * sj / 4.0;
    if (si != sj) {
      SpinConfig swapped = config;
      swapped.swap_spins(b.a, b.b);
      e += 0.5 * b.coupling * amplitude(state, swapped, Dc).ratio(w);
    }
  }
  return e;
}

double local_energy_cached(SingleLayerCache& cache, const BondLists& bonds) {
  const SpinConfig& config = cache.config();
  double e = 0.0;
  for (const Bond& b : bonds.all()) {
    const int si = config.spin(b.a.row, b.a.col);
    const int sj = config.spin(b.b.row, b.b.col);
    e += b.coupling * si * sj / 4.0;
    if (si != sj) {
      auto [w, w_swapped] = cache.pair_for_swap(b.a, b.b);
      if (w.sign == 0)
        throw std::runtime_error("local_energy_cached: W(S) = 0");
      e += 0.5 * b.coupling * w_swapped.ratio(w);
    }
  }
  return e;
}

SpinConfig sector_start_config(const LatticeSpec& spec, long sector_sz) {
  spec.validate();
  if (spec.sites() % 2 != 0)
    throw std::invalid_argument("sector_start_config: odd site count");
  const long n_up = spec.sites() / 2 + sector_sz;
  if (n_up < 0 || n_up > spec.sites())
    throw std::invalid_argument("sector_start_config: empty sector");
  // Checkerboard, then flip the first few sites as needed to hit n_up.
  SpinConfig cfg(spec.rows, spec.cols);
  long ups = 0;
  for (long r = 0; r < spec.rows; ++r)
    for (long c = 0; c < spec.cols; ++c) {
      const int s = (r + c) % 2 == 0 ? 1 : -1;
      cfg.set_spin(r, c, s);
      if (s == 1) ++ups;
    }
  for (long r = 0; r < spec.rows && ups != n_up; ++r)
    for (long c = 0; c < spec.cols && ups != n_up; ++c) {
      if (ups < n_up && cfg.spin(r, c) == -1) {
        cfg.set_spin(r, c, 1);
        ++ups;
      } else if (ups > n_up && cfg.spin(r, c) == 1) {
        cfg.set_spin(r, c, -1);
        --ups;
      }
    }
  return cfg;
}

namespace {

struct WalkerEnergyResult {
  std::vector<double> bins;
  std::vector<double> bin_acceptance;
  long accepted = 0;
  long proposals = 0;
};

WalkerEnergyResult run_energy_walker(const PepsState& state,
                                     const McParams& params, long walker) {
  const LatticeSpec& spec = state.spec();
  BondLists bonds = build_bonds(spec);
  const long Dc = params.effective_dc(state.bond_dim());
  auto rng = make_rng(derive_seed(params.seed, kMcTag,
                                  static_cast<uint64_t>(walker), 1));
  SingleLayerCache cache(state, sector_start_config(spec, params.sector_sz),
                         Dc, params.use_cache);
  if (cache.amplitude_current().sign == 0)
    throw std::runtime_error("sample_energy: start config has W = 0");

  const long moves_per_sweep = spec.sites();
  for (long s = 0; s < params.effective_equilibration(); ++s)
    for (long m = 0; m < moves_per_sweep; ++m)
      metropolis_step(cache, bonds, rng);

  WalkerEnergyResult res;
  double bin_sum = 0.0;
  long bin_accepted = 0;
  for (long s = 1; s <= params.sweeps; ++s) {
    for (long m = 0; m < moves_per_sweep; ++m) {
      const bool ok = metropolis_step(cache, bonds, rng);
      res.accepted += ok;
      bin_accepted += ok;
      ++res.proposals;
    }
    bin_sum += local_energy_cached(cache, bonds);
    if (s % params.bin_size == 0) {
      res.bins.push_back(bin_sum / static_cast<double>(params.bin_size));
      res.bin_acceptance.push_back(
          static_cast<double>(bin_accepted) /
          static_cast<double>(params.bin_size * moves_per_sweep));
      bin_sum = 0.0;
      bin_accepted = 0;
    }
  }
  return res;
}

}  // namespace

Estimator sample_energy(const PepsState& state, const McParams& params,
                        std::vector<McBinRecord>* diagnostics) {
  params.validate();
  std::vector<WalkerEnergyResult> results(
      static_cast<size_t>(params.walkers));
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (long w = 0; w < params.walkers; ++w)
    pool.emplace_back([&, w] {
      try {
        results[static_cast<size_t>(w)] = run_energy_walker(state, params, w);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  std::vector<double> bins;
  for (long w = 0; w < params.walkers; ++w) {
    const WalkerEnergyResult& r = results[static_cast<size_t>(w)];
    bins.insert(bins.end(), r.bins.begin(), r.bins.end());
    if (diagnostics)
      for (size_t i = 0; i < r.bins.size(); ++i)
        diagnostics->push_back({w, static_cast<long>(i), r.bins[i],
                                r.bin_acceptance[i]});
  }
  return estimator_from_bins(bins);
}

namespace {

struct GradAccum {
  std::vector<DenseTensor> delta;    // sum of Delta
  std::vector<DenseTensor> delta_e;  // sum of Delta * E
  double e_sum = 0.0;
  long n = 0;

  explicit GradAccum(const PepsState& state) {
    const LatticeSpec& spec = state.spec();
    for (long r = 0; r < spec.rows; ++r)
      for (long c = 0; c < spec.cols; ++c) {
        delta.emplace_back(state.site(r, c).dims());
        delta_e.emplace_back(state.site(r, c).dims());
      }
  }

  void merge(const GradAccum& other) {
    for (size_t i = 0; i < delta.size(); ++i) {
      for (long k = 0; k < delta[i].size(); ++k) {
        delta[i].storage()[static_cast<size_t>(k)] +=
            other.delta[i].storage()[static_cast<size_t>(k)];
        delta_e[i].storage()[static_cast<size_t>(k)] +=
            other.delta_e[i].storage()[static_cast<size_t>(k)];
      }
    }
    e_sum += other.e_sum;
    n += other.n;
  }

  // Eq. 3 assembled from the accumulated sums.
  std::vector<DenseTensor> assemble() const {
    std::vector<DenseTensor> grad;
    const double inv = 1.0 / static_cast<double>(n);
    const double e_mean = e_sum * inv;
    for (size_t i = 0; i < delta.size(); ++i) {
      DenseTensor g(delta[i].dims());
      for (long k = 0; k < g.size(); ++k)
        g.storage()[static_cast<size_t>(k)] =
            2.0 * delta_e[i].storage()[static_cast<size_t>(k)] * inv -
            2.0 * delta[i].storage()[static_cast<size_t>(k)] * inv * e_mean;
      grad.push_back(std::move(g));
    }
    return grad;
  }
};

// Accumulate Delta(S) = B(S)/W(S) and Delta*E into acc for one sample.
void accumulate_sample(GradAccum& acc, const PepsState& state,
                       SingleLayerCache& cache, const BondLists& bonds) {
  EnvGrid env = cache.environments();
  if (env.w.sign == 0)
    throw std::runtime_error("sample_gradient: W(S) = 0 at a sample");
  const double e = local_energy_cached(cache, bonds);
  const SpinConfig& cfg = cache.config();
  const LatticeSpec& spec = state.spec();
  for (long r = 0; r < spec.rows; ++r)
    for (long c = 0; c < spec.cols; ++c) {
      const size_t site = static_cast<size_t>(r * spec.cols + c);
      const DenseTensor& b = env.at(r, c);  // (l, r, u, d), normalized
      const double factor =
          env.w.sign * std::exp(env.log_at(r, c) - env.w.log_magnitude);
      const long level = cfg.level(r, c);
      DenseTensor& d = acc.delta[site];
      DenseTensor& de = acc.delta_e[site];
      // Only the sampled physical slice of Delta is nonzero.
      const long phys = d.dims().back();
      for (long k = 0; k < b.size(); ++k) {
        const double v = factor * b.storage()[static_cast<size_t>(k)];
        const size_t flat = static_cast<size_t>(k * phys + level);
        d.storage()[flat] += v;
        de.storage()[flat] += v * e;
      }
    }
  acc.e_sum += e;
  acc.n += 1;
}

struct WalkerGradResult {
  GradAccum total;
  std::vector<DenseTensor> bin_sum;   // sum over bins of per-bin gradient
  std::vector<DenseTensor> bin_sum2;  // and of its square
  std::vector<double> bins;
  std::vector<double> bin_acceptance;
  long accepted = 0;
  long proposals = 0;

  explicit WalkerGradResult(const PepsState& state) : total(state) {
    for (const DenseTensor& t : total.delta) {
      bin_sum.emplace_back(t.dims());
      bin_sum2.emplace_back(t.dims());
    }
  }
};

WalkerGradResult run_gradient_walker(const PepsState& state,
                                     const McParams& params, long walker) {
  const LatticeSpec& spec = state.spec();
  BondLists bonds = build_bonds(spec);
  const long Dc = params.effective_dc(state.bond_dim());
  auto rng = make_rng(derive_seed(params.seed, kMcTag,
                                  static_cast<uint64_t>(walker), 2));
  SingleLayerCache cache(state, sector_start_config(spec, params.sector_sz),
                         Dc, params.use_cache);
  if (cache.amplitude_current().sign == 0)
    throw std::runtime_error("sample_gradient: start config has W = 0");

  const long moves_per_sweep = spec.sites();
  for (long s = 0; s < params.effective_equilibration(); ++s)
    for (long m = 0; m < moves_per_sweep; ++m)
      metropolis_step(cache, bonds, rng);

  WalkerGradResult res(state);
  GradAccum bin_acc(state);
  long bin_accepted = 0;
  for (long s = 1; s <= params.sweeps; ++s) {
    for (long m = 0; m < moves_per_sweep; ++m) {
      const bool ok = metropolis_step(cache, bonds, rng);
      res.accepted += ok;
      bin_accepted += ok;
      ++res.proposals;
    }
    accumulate_sample(bin_acc, state, cache, bonds);
    if (s % params.bin_size == 0) {
      std::vector<DenseTensor> g = bin_acc.assemble();
      for (size_t i = 0; i < g.size(); ++i)
        for (long k = 0; k < g[i].size(); ++k) {
          const double x = g[i].storage()[static_cast<size_t>(k)];
          res.bin_sum[i].storage()[static_cast<size_t>(k)] += x;
          res.bin_sum2[i].storage()[static_cast<size_t>(k)] += x * x;
        }
      res.bins.push_back(bin_acc.e_sum /
                         static_cast<double>(params.bin_size));
      res.bin_acceptance.push_back(
          static_cast<double>(bin_accepted) /
          static_cast<double>(params.bin_size * moves_per_sweep));
      res.total.merge(bin_acc);
      bin_acc = GradAccum(state);
      bin_accepted = 0;
    }
  }
  return res;
}

}  // namespace

GradientEstimate sample_gradient(const PepsState& state,
                                 const McParams& params,
                                 std::vector<McBinRecord>* diagnostics) {
  params.validate();
  std::vector<WalkerGradResult> results;
  results.reserve(static_cast<size_t>(params.walkers));
  for (long w = 0; w < params.walkers; ++w) results.emplace_back(state);
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (long w = 0; w < params.walkers; ++w)
    pool.emplace_back([&, w] {
      try {
        results[static_cast<size_t>(w)] =
            run_gradient_walker(state, params, w);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  GradientEstimate out;
  GradAccum total(state);
  std::vector<DenseTensor> bin_sum, bin_sum2;
  for (const DenseTensor& t : total.delta) {
    bin_sum.emplace_back(t.dims());
    bin_sum2.emplace_back(t.dims());
  }
  std::vector<double> bins;
  long accepted = 0, proposals = 0;
  for (long w = 0; w < params.walkers; ++w) {
    WalkerGradResult& r = results[static_cast<size_t>(w)];
    total.merge(r.total);
    for (size_t i = 0; i < bin_sum.size(); ++i)
      for (long k = 0; k < bin_sum[i].size(); ++k) {
        bin_sum[i].storage()[static_cast<size_t>(k)] +=
            r.bin_sum[i].storage()[static_cast<size_t>(k)];
        bin_sum2[i].storage()[static_cast<size_t>(k)] +=
            r.bin_sum2[i].storage()[static_cast<size_t>(k)];
      }
    bins.insert(bins.end(), r.bins.begin(), r.bins.end());
    accepted += r.accepted;
    proposals += r.proposals;
    if (diagnostics)
      for (size_t i = 0; i < r.bins.size(); ++i)
        diagnostics->push_back({w, static_cast<long>(i), r.bins[i],
                                r.bin_acceptance[i]});
  }

  out.gradient = total.assemble();
  out.energy = estimator_from_bins(bins);
  out.acceptance_rate = proposals > 0
                            ? static_cast<double>(accepted) /
                                  static_cast<double>(proposals)
                            : 0.0;
  const double nb = static_cast<double>(bins.size());
  for (size_t i = 0; i < bin_sum.size(); ++i) {
    DenseTensor se(bin_sum[i].dims());
    if (nb > 1.5) {
      for (long k = 0; k < se.size(); ++k) {
        const double mean =
            bin_sum[i].storage()[static_cast<size_t>(k)] / nb;
        const double var = std::max(
            0.0, bin_sum2[i].storage()[static_cast<size_t>(k)] / nb -
                     mean * mean);
        se.storage()[static_cast<size_t>(k)] =
            std::sqrt(var / (nb - 1.0));
      }
    }
    out.gradient_std_error.push_back(std::move(se));
  }
  return out;
}

namespace {

constexpr int kChunks = 64;  // fixed partition: thread-count independent sums

std::vector<uint64_t> enumeration_codes(const LatticeSpec& spec,
                                        long sector_sz, bool full_space) {
  if (full_space) {
    std::vector<uint64_t> codes(size_t{1} << spec.sites());
    for (uint64_t i = 0; i < codes.size(); ++i) codes[i] = i;
    return codes;
  }
  if (spec.sites() % 2 != 0)
    throw std::invalid_argument("exact summation: odd site count");
  return sector_basis(spec.sites(), spec.sites() / 2 + sector_sz);
}

std::vector<Amplitude> all_amplitudes(const PepsState& state,
                                      const std::vector<uint64_t>& codes,
                                      long Dc, int threads) {
  const LatticeSpec& spec = state.spec();
  std::vector<Amplitude> amp(codes.size());
  int n = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  auto work = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i)
      amp[i] = amplitude(
          state, SpinConfig::from_bit_code(spec.rows, spec.cols, codes[i]),
          Dc);
  };
  if (n == 1) {
    work(0, codes.size());
  } else {
    std::vector<std::thread> pool;
    const size_t chunk = (codes.size() + n - 1) / static_cast<size_t>(n);
    for (int t = 0; t < n; ++t) {
      const size_t begin = static_cast<size_t>(t) * chunk;
      const size_t end = std::min(codes.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return amp;
}

long lookup(const std::vector<uint64_t>& codes, uint64_t code,
            bool full_space) {
  if (full_space) return static_cast<long>(code);
  const auto it = std::lower_bound(codes.begin(), codes.end(), code);
  return static_cast<long>(it - codes.begin());
}

double exact_energy_impl(const PepsState& state, long Dc, long sector_sz,
                         bool full_space, int threads) {
  const LatticeSpec& spec = state.spec();
  if (spec.sites() > 24)
    throw std::invalid_argument("exact summation: > 24 sites");
  std::vector<uint64_t> codes = enumeration_codes(spec, sector_sz, full_space);
  std::vector<Amplitude> amp = all_amplitudes(state, codes, Dc, threads);
  double lmax = -1e300;
  for (const Amplitude& a : amp)
    if (a.sign != 0) lmax = std::max(lmax, a.log_magnitude);
  if (lmax == -1e300)
    throw std::runtime_error("exact summation: all amplitudes vanish");
  BondLists bonds = build_bonds(spec);

  std::vector<double> num(kChunks, 0.0), den(kChunks, 0.0);
  int n = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  const size_t per = (codes.size() + kChunks - 1) / kChunks;
  auto work_chunk = [&](int chunk) {
    const size_t begin = static_cast<size_t>(chunk) * per;
    const size_t end = std::min(codes.size(), begin + per);
    for (size_t i = begin; i < end; ++i) {
      if (amp[i].sign == 0) continue;
      const SpinConfig cfg =
          SpinConfig::from_bit_code(spec.rows, spec.cols, codes[i]);
      const double w2 = std::exp(2.0 * (amp[i].log_magnitude - lmax));
      double e = 0.0;
      for (const Bond& b : bonds.all()) {
        const int si = cfg.spin(b.a.row, b.a.col);
        const int sj = cfg.spin(b.b.row, b.b.col);
        e += b.coupling * si * sj / 4.0;
        if (si != sj) {
          SpinConfig swapped = cfg;
          swapped.swap_spins(b.a, b.b);
          e += 0.5 * b.coupling *
               amp[static_cast<size_t>(
                       lookup(codes, swapped.bit_code(), full_space))]
                   .ratio(amp[i]);
        }
      }
      num[static_cast<size_t>(chunk)] += w2 * e;
      den[static_cast<size_t>(chunk)] += w2;
    }
  };
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < n; ++t)
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < kChunks; c = next.fetch_add(1))
        work_chunk(c);
    });
  for (auto& th : pool) th.join();
  double tn = 0.0, td = 0.0;
  for (int c = 0; c < kChunks; ++c) {
    tn += num[static_cast<size_t>(c)];
    td += den[static_cast<size_t>(c)];
  }
  if (td == 0.0) throw std::runtime_error("exact summation: zero norm");
  return tn / td;
}

}  // namespace

double exact_sector_energy(const PepsState& state, long Dc, long sector_sz,
                           int threads) {
  return exact_energy_impl(state, Dc, sector_sz, false, threads);
}

double exact_full_energy(const PepsState& state, long Dc, int threads) {
  if (state.spec().sites() > 16)
    throw std::invalid_argument("exact_full_energy: > 16 sites");
  return exact_energy_impl(state, Dc, 0, true, threads);
}

std::vector<DenseTensor> exact_sector_gradient(const PepsState& state, long Dc,
                                               double* energy_out,
                                               long sector_sz, int threads) {
  const LatticeSpec& spec = state.spec();
  if (spec.sites() > 24)
    throw std::invalid_argument("exact_sector_gradient: > 24 sites");
  std::vector<uint64_t> codes = enumeration_codes(spec, sector_sz, false);
  std::vector<Amplitude> amp = all_amplitudes(state, codes, Dc, threads);
  double lmax = -1e300;
  for (const Amplitude& a : amp)
    if (a.sign != 0) lmax = std::max(lmax, a.log_magnitude);
  if (lmax == -1e300)
    throw std::runtime_error("exact_sector_gradient: all amplitudes vanish");
  BondLists bonds = build_bonds(spec);
  const long sites = spec.sites();

  struct Acc {
    std::vector<DenseTensor> delta, delta_e;
    double e_sum = 0.0, norm = 0.0;
  };
  std::vector<Acc> acc(kChunks);
  for (int c = 0; c < kChunks; ++c)
    for (long r = 0; r < spec.rows; ++r)
      for (long cc = 0; cc < spec.cols; ++cc) {
        acc[static_cast<size_t>(c)].delta.emplace_back(
            state.site(r, cc).dims());
        acc[static_cast<size_t>(c)].delta_e.emplace_back(
            state.site(r, cc).dims());
      }

  const size_t per = (codes.size() + kChunks - 1) / kChunks;
  auto work_chunk = [&](int chunk) {
    Acc& a = acc[static_cast<size_t>(chunk)];
    const size_t begin = static_cast<size_t>(chunk) * per;
    const size_t end = std::min(codes.size(), begin + per);
    for (size_t i = begin; i < end; ++i) {
      if (amp[i].sign == 0) continue;
      const SpinConfig cfg =
          SpinConfig::from_bit_code(spec.rows, spec.cols, codes[i]);
      const double w2 = std::exp(2.0 * (amp[i].log_magnitude - lmax));
      double e = 0.0;
      for (const Bond& b : bonds.all()) {
        const int si = cfg.spin(b.a.row, b.a.col);
        const int sj = cfg.spin(b.b.row, b.b.col);
        e += b.coupling * si * sj / 4.0;
        if (si != sj) {
          SpinConfig swapped = cfg;
          swapped.swap_spins(b.a, b.b);
          e += 0.5 * b.coupling *
               amp[static_cast<size_t>(lookup(codes, swapped.bit_code(),
                                              false))]
                   .ratio(amp[i]);
        }
      }
      EnvGrid env = single_layer_environments(state, cfg, Dc);
      for (long r = 0; r < spec.rows; ++r)
        for (long cc = 0; cc < spec.cols; ++cc) {
          const size_t site = static_cast<size_t>(r * spec.cols + cc);
          const DenseTensor& b = env.at(r, cc);
          const double factor = env.w.sign * std::exp(env.log_at(r, cc) -
                                                      env.w.log_magnitude);
          const long level = cfg.level(r, cc);
          const long phys = a.delta[site].dims().back();
          for (long k = 0; k < b.size(); ++k) {
            const double v =
                w2 * factor * b.storage()[static_cast<size_t>(k)];
            const size_t flat = static_cast<size_t>(k * phys + level);
            a.delta[site].storage()[flat] += v;
            a.delta_e[site].storage()[flat] += v * e;
          }
        }
      a.e_sum += w2 * e;
      a.norm += w2;
    }
  };
  int n = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < n; ++t)
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < kChunks; c = next.fetch_add(1))
        work_chunk(c);
    });
  for (auto& th : pool) th.join();

  Acc total;
  for (long r = 0; r < spec.rows; ++r)
    for (long cc = 0; cc < spec.cols; ++cc) {
      total.delta.emplace_back(state.site(r, cc).dims());
      total.delta_e.emplace_back(state.site(r, cc).dims());
    }
  for (int c = 0; c < kChunks; ++c) {
    const Acc& a = acc[static_cast<size_t>(c)];
    for (long s = 0; s < sites; ++s) {
      for (long k = 0; k < total.delta[static_cast<size_t>(s)].size(); ++k) {
        total.delta[static_cast<size_t>(s)].storage()[static_cast<size_t>(k)] +=
            a.delta[static_cast<size_t>(s)].storage()[static_cast<size_t>(k)];
        total.delta_e[static_cast<size_t>(s)]
            .storage()[static_cast<size_t>(k)] +=
            a.delta_e[static_cast<size_t>(s)]
                .storage()[static_cast<size_t>(k)];
      }
    }
    total.e_sum += a.e_sum;
    total.norm += a.norm;
  }
  if (total.norm == 0.0)
    throw std::runtime_error("exact_sector_gradient: zero norm");
  const double e_mean = total.e_sum / total.norm;
  if (energy_out) *energy_out = e_mean;
  std::vector<DenseTensor> grad;
  for (long s = 0; s < sites; ++s) {
    DenseTensor g(total.delta[static_cast<size_t>(s)].dims());
    for (long k = 0; k < g.size(); ++k)
      g.storage()[static_cast<size_t>(k)] =
          2.0 * total.delta_e[static_cast<size_t>(s)]
                    .storage()[static_cast<size_t>(k)] /
              total.norm -
          2.0 * total.delta[static_cast<size_t>(s)]
                    .storage()[static_cast<size_t>(k)] /
              total.norm * e_mean;
    grad.push_back(std::move(g));
  }
  return grad;
}

std::string mc_log_csv(const std::vector<McBinRecord>& records) {
  std::ostringstream out;
  out << "walker,bin,energy,acceptance\n";
  out.precision(12);
  for (const McBinRecord& r : records)
    out << r.walker << ',' << r.bin << ',' << r.energy << ',' << r.acceptance
        << '\n';
  return out.str();
}

}  // namespace pepsmc
