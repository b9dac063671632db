#include "pepsmc/simple_update.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pepsmc {

namespace {

constexpr double kLambdaDrop = 1e-12;  // relative cutoff on kept weights

// Multiply (or divide) slice k along `axis` by w[k].
void scale_axis(DenseTensor& t, long axis, const std::vector<double>& w,
                bool invert) {
  if (static_cast<long>(w.size()) != t.dim(axis))
    throw std::invalid_argument("scale_axis: weight length mismatch");
  long inner = 1;
  for (long a = axis + 1; a < t.rank(); ++a) inner *= t.dim(a);
  const long nk = t.dim(axis);
  const long outer = t.size() / (inner * nk);
  double* p = t.data();
  for (long o = 0; o < outer; ++o)
    for (long k = 0; k < nk; ++k) {
      const double f = invert ? 1.0 / w[static_cast<size_t>(k)]
                              : w[static_cast<size_t>(k)];
      double* block = p + (o * nk + k) * inner;
      for (long i = 0; i < inner; ++i) block[i] *= f;
    }
}

std::vector<double> sqrt_vec(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::sqrt(v[i]);
  return out;
}

// Multiply (invert=false) or divide out sqrt(lambda) on every interior leg
// of site (r,c) except those listed in skip.
void apply_env_sqrt(DenseTensor& t, const SuEnvironment& env, long r, long c,
                    const std::vector<long>& skip, bool invert) {
  for (long leg = 0; leg < 4; ++leg) {
    bool skipped = false;
    for (long s : skip) skipped = skipped || (s == leg);
    if (skipped) continue;
    const std::vector<double>* lam = env.leg(r, c, leg);
    if (!lam) continue;
    scale_axis(t, leg, sqrt_vec(*lam), invert);
  }
}

// Keep the first k singular triplets.
void shrink_svd(SvdResult& svd, long k) {
  const long kfull = static_cast<long>(svd.singular_values.size());
  if (k >= kfull) return;
  // u: last axis sliced.
  std::vector<long> udims = svd.u.dims();
  const long rows = svd.u.size() / kfull;
  udims.back() = k;
  DenseTensor u(udims);
  for (long rr = 0; rr < rows; ++rr)
    for (long j = 0; j < k; ++j)
      u.storage()[static_cast<size_t>(rr * k + j)] =
          svd.u.storage()[static_cast<size_t>(rr * kfull + j)];
  // vt: first axis sliced (contiguous).
  std::vector<long> vdims = svd.vt.dims();
  const long cols = svd.vt.size() / kfull;
  vdims.front() = k;
  DenseTensor vt(vdims);
  std::copy(svd.vt.storage().begin(),
            svd.vt.storage().begin() + k * cols, vt.storage().begin());
  svd.u = std::move(u);
  svd.vt = std::move(vt);
  svd.singular_values.resize(static_cast<size_t>(k));
}

// Normalize singular values to max 1, dropping relatively tiny entries.
std::vector<double> normalized_lambda(SvdResult& svd) {
  if (svd.singular_values.empty() || svd.singular_values[0] <= 0.0)
    throw std::runtime_error("simple update: zero singular spectrum");
  const double s0 = svd.singular_values[0];
  long k = 0;
  while (k < static_cast<long>(svd.singular_values.size()) &&
         svd.singular_values[static_cast<size_t>(k)] > kLambdaDrop * s0)
    ++k;
  shrink_svd(svd, k);
  std::vector<double> lam(svd.singular_values);
  for (double& x : lam) x /= s0;
  return lam;
}

}  // namespace

SuEnvironment SuEnvironment::ones(const PepsState& state) {
  SuEnvironment env;
  env.rows_ = state.spec().rows;
  env.cols_ = state.spec().cols;
  env.h_.resize(static_cast<size_t>(env.rows_ * env.cols_));
  env.v_.resize(static_cast<size_t>(env.rows_ * env.cols_));
  for (long r = 0; r < env.rows_; ++r)
    for (long c = 0; c < env.cols_; ++c) {
      if (c + 1 < env.cols_)
        env.horizontal(r, c).assign(
            static_cast<size_t>(state.site(r, c).dim(1)), 1.0);
      if (r + 1 < env.rows_)
        env.vertical(r, c).assign(
            static_cast<size_t>(state.site(r, c).dim(3)), 1.0);
    }
  return env;
}

std::vector<double>& SuEnvironment::horizontal(long r, long c) {
  if (c + 1 >= cols_) throw std::out_of_range("SuEnvironment: edge bond");
  return h_[static_cast<size_t>(r * cols_ + c)];
}
const std::vector<double>& SuEnvironment::horizontal(long r, long c) const {
  return const_cast<SuEnvironment*>(this)->horizontal(r, c);
}
std::vector<double>& SuEnvironment::vertical(long r, long c) {
  if (r + 1 >= rows_) throw std::out_of_range("SuEnvironment: edge bond");
  return v_[static_cast<size_t>(r * cols_ + c)];
}
const std::vector<double>& SuEnvironment::vertical(long r, long c) const {
  return const_cast<SuEnvironment*>(this)->vertical(r, c);
}

const std::vector<double>* SuEnvironment::leg(long r, long c, long leg) const {
  switch (leg) {
    case 0:
      return c > 0 ? &horizontal(r, c - 1) : nullptr;
    case 1:
      return c + 1 < cols_ ? &horizontal(r, c) : nullptr;
    case 2:
      return r > 0 ? &vertical(r - 1, c) : nullptr;
    case 3:
      return r + 1 < rows_ ? &vertical(r, c) : nullptr;
    default:
      throw std::out_of_range("SuEnvironment::leg");
  }
}

void SuSchedule::validate() const {
  if (stages.empty()) throw std::invalid_argument("SuSchedule: no stages");
  double prev = 1e300;
  for (const SuStage& st : stages) {
    if (st.dtau <= 0.0 || st.dtau >= prev)
      throw std::invalid_argument("SuSchedule: dtau must strictly decrease");
    if (st.convergence_tol <= 0.0 || st.max_sweeps < 1)
      throw std::invalid_argument("SuSchedule: bad tolerance or sweep cap");
    prev = st.dtau;
  }
}

SuSchedule SuSchedule::standard() {
  return {{{0.01, 1e-6, 2000}, {0.001, 1e-6, 2000}}};
}

DenseTensor trotter_gate(double coupling, double dtau) {
  if (dtau <= 0.0) throw std::invalid_argument("trotter_gate: dtau <= 0");
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
  for (long li = 0; li < 2; ++li)
    for (long lj = 0; lj < 2; ++lj) {
      const double si = li == 0 ? 1.0 : -1.0;
      const double sj = lj == 0 ? 1.0 : -1.0;
      h(2 * li + lj, 2 * li + lj) = si * sj / 4.0;
    }
  h(1, 2) = h(2, 1) = 0.5;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(-dtau * coupling * h);
  Eigen::Matrix4d g =
      es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
      es.eigenvectors().transpose();
  DenseTensor out({2, 2, 2, 2});
  for (long a = 0; a < 4; ++a)
    for (long b = 0; b < 4; ++b)
      out.storage()[static_cast<size_t>(a * 4 + b)] = g(a, b);
  return out;
}

SuUpdateResult su_bond_update(PepsState& state, SuEnvironment& env,
                              const Bond& bond, const DenseTensor& gate,
                              long D) {
  const bool horizontal = bond.a.row == bond.b.row;
  const long r = bond.a.row, c = bond.a.col;
  if ((horizontal && (bond.b.row != r || bond.b.col != c + 1)) ||
      (!horizontal && (bond.b.col != c || bond.b.row != r + 1)))
    throw std::invalid_argument("su_bond_update: not a canonical NN bond");

  DenseTensor& a = state.site(r, c);
  DenseTensor& b = state.site(bond.b.row, bond.b.col);
  const long leg_a = horizontal ? 1 : 3;
  const long leg_b = horizontal ? 0 : 2;
  apply_env_sqrt(a, env, r, c, {leg_a}, false);
  apply_env_sqrt(b, env, bond.b.row, bond.b.col, {leg_b}, false);

  DenseTensor theta = contract(a, {leg_a}, b, {leg_b});
  DenseTensor g = contract(theta, {3, 7}, gate, {0, 1});
  g = permute(g, {0, 1, 2, 6, 3, 4, 5, 7});
  SvdResult svd = svd_truncate(g, 4, D);
  std::vector<double> lambda = normalized_lambda(svd);
  const double s0 = svd.singular_values[0];

  std::vector<double> w(lambda.size());
  for (size_t i = 0; i < w.size(); ++i) w[i] = std::sqrt(lambda[i] * s0);
  scale_axis(svd.u, 4, w, false);
  scale_axis(svd.vt, 0, w, false);

  a = permute(svd.u, horizontal ? std::vector<long>{0, 4, 1, 2, 3}
                                : std::vector<long>{0, 1, 2, 4, 3});
  b = permute(svd.vt, horizontal ? std::vector<long>{0, 1, 2, 3, 4}
                                 : std::vector<long>{1, 2, 0, 3, 4});
  if (horizontal)
    env.horizontal(r, c) = lambda;
  else
    env.vertical(r, c) = lambda;

  apply_env_sqrt(a, env, r, c, {leg_a}, true);
  apply_env_sqrt(b, env, bond.b.row, bond.b.col, {leg_b}, true);
  if (!a.all_finite() || !b.all_finite())
    throw std::runtime_error("su_bond_update: non-finite tensors");
  return {svd.truncation_error};
}

SuUpdateResult su_nnn_update(PepsState& state, SuEnvironment& env,
                             const Bond& bond, const DenseTensor& gate,
                             long D) {
  const long r = bond.a.row, c = bond.a.col;
  const bool down_right = bond.b.col == c + 1;
  if (bond.b.row != r + 1 ||
      (bond.b.col != c + 1 && bond.b.col != c - 1))
    throw std::invalid_argument("su_nnn_update: not a canonical NNN bond");

  // Intermediate site in the top row; the cluster's two internal bonds are
  // A-M (horizontal) and M-B (vertical).
  const long mc = down_right ? c + 1 : c - 1;
  DenseTensor& ta = state.site(r, c);
  DenseTensor& tm = state.site(r, mc);
  DenseTensor& tb = state.site(r + 1, mc);

  const long a_int = down_right ? 1 : 0;   // A's leg toward M
  const long m_int_a = down_right ? 0 : 1; // M's leg toward A
  apply_env_sqrt(ta, env, r, c, {a_int}, false);
  apply_env_sqrt(tm, env, r, mc, {m_int_a, 3}, false);
  apply_env_sqrt(tb, env, r + 1, mc, {2}, false);

  // t1: (A ext x3, A.s, M ext x2, M.d, M.s); t2 replaces M.d by B's legs.
  DenseTensor t1 = contract(ta, {a_int}, tm, {m_int_a});
  DenseTensor t2 = contract(t1, {6}, tb, {2});
  // t2 legs: Ae0, Ae1, Ae2, A.s, Me0, Me1, M.s, B.l, B.r, B.d, B.s
  DenseTensor g = contract(t2, {3, 10}, gate, {0, 1});
  g = permute(g, {0, 1, 2, 9, 3, 4, 5, 6, 7, 8, 10});

  SvdResult svd1 = svd_truncate(g, 4, D);
  std::vector<double> lam1 = normalized_lambda(svd1);
  const double s1 = svd1.singular_values[0];
  std::vector<double> w1(lam1.size());
  for (size_t i = 0; i < w1.size(); ++i) w1[i] = std::sqrt(lam1[i] * s1);
  scale_axis(svd1.u, 4, w1, false);
  scale_axis(svd1.vt, 0, w1, false);

  // A': externals in original order with the new bond inserted at a_int.
  ta = permute(svd1.u, down_right ? std::vector<long>{0, 4, 1, 2, 3}
                                  : std::vector<long>{4, 0, 1, 2, 3});

  // Second cut M | B with full lam1 on the fresh bond during the SVD.
  DenseTensor rem = svd1.vt;  // (k1, Me0, Me1, M.s, B.l, B.r, B.d, B.s')
  scale_axis(rem, 0, sqrt_vec(lam1), false);
  SvdResult svd2 = svd_truncate(rem, 4, D);
  std::vector<double> lam2 = normalized_lambda(svd2);
  const double s2 = svd2.singular_values[0];
  std::vector<double> w2(lam2.size());
  for (size_t i = 0; i < w2.size(); ++i) w2[i] = std::sqrt(lam2[i] * s2);
  scale_axis(svd2.u, 4, w2, false);
  scale_axis(svd2.vt, 0, w2, false);
  scale_axis(svd2.u, 0, sqrt_vec(lam1), true);

  // M legs in svd2.u: (k1, Me0, Me1, M.s, k2); externals Me0/Me1 are (r,u)
  // when A sits to the left, (l,u) when A sits to the right.
  tm = permute(svd2.u, down_right ? std::vector<long>{0, 1, 2, 4, 3}
                                  : std::vector<long>{1, 0, 2, 4, 3});
  tb = permute(svd2.vt, {1, 2, 0, 3, 4});

  if (down_right)
    env.horizontal(r, c) = lam1;
  else
    env.horizontal(r, mc) = lam1;
  env.vertical(r, mc) = lam2;

  apply_env_sqrt(ta, env, r, c, {a_int}, true);
  apply_env_sqrt(tm, env, r, mc, {m_int_a, 3}, true);
  apply_env_sqrt(tb, env, r + 1, mc, {2}, true);
  if (!ta.all_finite() || !tm.all_finite() || !tb.all_finite())
    throw std::runtime_error("su_nnn_update: non-finite tensors");
  const double e1 = svd1.truncation_error, e2 = svd2.truncation_error;
  return {std::sqrt(e1 * e1 + e2 * e2)};
}

double su_sweep(PepsState& state, SuEnvironment& env,
                const DenseTensor& j1_gate, const DenseTensor* j2_gate,
                long D) {
  const LatticeSpec& spec = state.spec();
  double worst = 0.0;
  for (long r = 0; r < spec.rows; ++r)
    for (long c = 0; c + 1 < spec.cols; ++c)
      worst = std::max(worst, su_bond_update(state, env,
                                             {{r, c}, {r, c + 1}, spec.j1},
                                             j1_gate, D)
                                  .truncation_error);
  for (long r = 0; r + 1 < spec.rows; ++r)
    for (long c = 0; c < spec.cols; ++c)
      worst = std::max(worst, su_bond_update(state, env,
                                             {{r, c}, {r + 1, c}, spec.j1},
                                             j1_gate, D)
                                  .truncation_error);
  if (j2_gate) {
    for (long r = 0; r + 1 < spec.rows; ++r)
      for (long c = 0; c < spec.cols; ++c) {
        if (c + 1 < spec.cols)
          worst = std::max(worst,
                           su_nnn_update(state, env,
                                         {{r, c}, {r + 1, c + 1}, spec.j2},
                                         *j2_gate, D)
                               .truncation_error);
        if (c - 1 >= 0)
          worst = std::max(worst,
                           su_nnn_update(state, env,
                                         {{r, c}, {r + 1, c - 1}, spec.j2},
                                         *j2_gate, D)
                               .truncation_error);
      }
  }
  return worst;
}

namespace {

double max_relative_change(const PepsState& now, const PepsState& before) {
  double worst = 0.0;
  const LatticeSpec& spec = now.spec();
  for (long r = 0; r < spec.rows; ++r)
    for (long c = 0; c < spec.cols; ++c) {
      const DenseTensor& a = now.site(r, c);
      const DenseTensor& b = before.site(r, c);
      if (a.dims() != b.dims()) return 1.0;
      double diff = 0.0;
      for (long i = 0; i < a.size(); ++i) {
        const double d = a.storage()[static_cast<size_t>(i)] -
                         b.storage()[static_cast<size_t>(i)];
        diff += d * d;
      }
      const double ref = b.frobenius_norm();
      worst = std::max(worst, std::sqrt(diff) / (ref > 0.0 ? ref : 1.0));
    }
  return worst;
}

}  // namespace

SuResult run_simple_update(const PepsState& initial,
                           const SuSchedule& schedule) {
  schedule.validate();
  SuResult res;
  res.state = initial;
  res.state.rescale();
  const LatticeSpec& spec = res.state.spec();
  const long D = res.state.bond_dim();
  SuEnvironment env = SuEnvironment::ones(res.state);

  res.converged = true;
  for (size_t stage = 0; stage < schedule.stages.size(); ++stage) {
    const SuStage& st = schedule.stages[stage];
    const DenseTensor j1_gate = trotter_gate(spec.j1, st.dtau);
    DenseTensor j2_gate_store;
    const DenseTensor* j2_gate = nullptr;
    if (spec.j2 != 0.0 && spec.rows > 1 && spec.cols > 1) {
      j2_gate_store = trotter_gate(spec.j2, st.dtau);
      j2_gate = &j2_gate_store;
    }
    bool stage_converged = false;
    for (long sweep = 1; sweep <= st.max_sweeps; ++sweep) {
      PepsState before = res.state;
      const double trunc = su_sweep(res.state, env, j1_gate, j2_gate, D);
      res.state.rescale();
      const double change = max_relative_change(res.state, before);
      res.log.push_back({static_cast<long>(stage), sweep, st.dtau, change,
                         trunc});
      if (change < st.convergence_tol) {
        stage_converged = true;
        break;
      }
    }
    res.converged = res.converged && stage_converged;
  }
  return res;
}

SuResult su_prepare(const LatticeSpec& spec, long target_bond_dim,
                    uint64_t seed, const SuSchedule& schedule) {
  if (target_bond_dim < 1)
    throw std::invalid_argument("su_prepare: bond dimension < 1");
  const long start = std::min<long>(2, target_bond_dim);
  SuResult res = run_simple_update(PepsState::random(spec, start, seed),
                                   schedule);
  for (long d = start + 1; d <= target_bond_dim; ++d) {
    PepsState grown =
        res.state.grow_bond_dimension(d, 1e-3, seed + static_cast<uint64_t>(d));
    SuResult next = run_simple_update(grown, schedule);
    next.log.insert(next.log.begin(), res.log.begin(), res.log.end());
    next.converged = next.converged && res.converged;
    res = std::move(next);
  }
  return res;
}

std::string su_log_csv(const std::vector<SuSweepRecord>& log) {
  std::ostringstream out;
  out << "stage,sweep,dtau,max_rel_change,max_truncation_error\n";
  out.precision(12);
  for (const SuSweepRecord& rec : log)
    out << rec.stage << ',' << rec.sweep << ',' << rec.dtau << ','
        << rec.max_rel_change << ',' << rec.max_truncation_error << '\n';
  return out.str();
}

}  // namespace pepsmc
