#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pepsmc/lattice.hpp"
#include "pepsmc/monte_carlo.hpp"
#include "pepsmc/peps.hpp"

namespace pepsmc {

struct SitePair {
  Site i;
  Site j;
  bool operator==(const SitePair&) const = default;
};

// Two-point estimates <S_i . S_j>, one Estimator per requested pair.
// The i == j entries are exactly S(S+1) = 3/4 with zero variance.
struct CorrelationResult {
  std::vector<SitePair> pairs;
  std::vector<Estimator> values;
  double acceptance_rate = 0.0;
};

// All unordered site pairs (i <= j in row-major order, i == j included)
// of the bulk window obtained by trimming `margin` rows and columns from
// every edge. Throws when the window is empty.
std::vector<SitePair> window_pairs(const LatticeSpec& spec, long margin);

// Per sample, <S_i . S_j> is estimated as s_i s_j / 4 plus, for anti-aligned
// pairs, (1/2) W(S with i,j exchanged) / W(S); averaged over the W^2 walk
// with binned errors, walker-parallel like sample_energy.
CorrelationResult spin_correlation(const PepsState& state,
                                   const std::vector<SitePair>& pairs,
                                   const McParams& mc);

// m^2_s(pi,pi) over the bulk window: (1/N^2) sum_{i,j in window}
// <S_i . S_j> (-1)^(parity(i)+parity(j)) with parity = (row+col) mod 2 and
// N the window site count. The mean is assembled from the window's pair
// estimates (same samples as spin_correlation under identical params); the
// std_error comes from binning the staggered scalar itself.
Estimator staggered_magnetization(const PepsState& state, long window_margin,
                                  const McParams& mc);

struct FitPoint {
  double length = 0.0;     // linear system size L
  double value = 0.0;
  double std_error = 0.0;  // <= 0: unknown, fit falls back to unit weights
};

// Least-squares fit value(L) = a + b/L + c/L^2; returns (a, std error of a).
// Points with positive errors are weighted 1/sigma^2 and the error comes
// straight from the covariance; otherwise unit weights are used and the
// covariance is scaled by the residual variance.
std::pair<double, double> quadratic_extrapolation(
    const std::vector<FitPoint>& points);

// CSV: i_row,i_col,j_row,j_col,value,stderr
std::string correlation_csv(const CorrelationResult& result);

}  // namespace pepsmc
