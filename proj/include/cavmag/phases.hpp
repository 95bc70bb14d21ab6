#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cavmag/errors.hpp"
#include "cavmag/observables.hpp"
#include "cavmag/params.hpp"

namespace cavmag {

enum class PhaseLabel { AF, FM, AFz_IAFx, FMz_IAFx, Indeterminate };

inline std::string_view to_string(PhaseLabel label) {
  switch (label) {
    case PhaseLabel::AF: return "AF";
    case PhaseLabel::FM: return "FM";
    case PhaseLabel::AFz_IAFx: return "AFz_IAFx";
    case PhaseLabel::FMz_IAFx: return "FMz_IAFx";
    case PhaseLabel::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

/// Peaks closer than this to 0 or pi are reported exactly at the endpoint.
inline constexpr double kEndpointSnap = 0.02;
/// Heights within this (times max(1, |height|)) count as a tie.
inline constexpr double kPeakTie = 1e-12;

struct Peak {
  double theta = 0.0;   ///< in [0, pi]
  double height = 0.0;
};

struct PhasePoint {
  double t = 0.0, U_s = 0.0, U_l = 0.0;
  int L = 0;
  Peak z, x;
  PhaseLabel label = PhaseLabel::Indeterminate;
  bool degenerate = false;
};

namespace detail {

/// Index of -k for every grid point; throws unless the grid is mirror symmetric.
inline std::size_t mirror_index(const std::vector<double>& k, std::size_t i) {
  const std::size_t j = k.size() - 1 - i;
  if (std::abs(k[i] + k[j]) > 1e-12) throw ParameterError("k grid is not symmetric about 0");
  return j;
}

/// Symmetrized (k, S) samples with k >= 0, in increasing k.
inline std::vector<std::pair<double, double>> nonnegative_half(const StructureFactor& s) {
  if (s.k_grid.size() != s.values.size() || s.k_grid.empty())
    throw ParameterError("structure factor grid and values differ in length");
  std::vector<std::pair<double, double>> half;
  for (std::size_t i = 0; i < s.k_grid.size(); ++i) {
    const std::size_t j = mirror_index(s.k_grid, i);
    if (s.k_grid[i] < -1e-12) continue;
    half.emplace_back(std::abs(s.k_grid[i]), 0.5 * (s.values[i] + s.values[j]));
  }
  std::sort(half.begin(), half.end());
  return half;
}

inline double snap_endpoint(double theta, double eps) {
  if (theta <= eps) return 0.0;
  if (theta >= std::numbers::pi - eps) return std::numbers::pi;
  return theta;
}

inline bool at_zero(double theta) { return theta == 0.0; }
inline bool at_pi(double theta) { return theta == std::numbers::pi; }

}  // namespace detail

/// Highest peak of S over k in [0, pi] after averaging S(k) with S(-k).
/// Ties go to the smaller |k|; the position snaps to 0 or pi within `snap`.
inline Peak peak_position(const StructureFactor& s, double snap = kEndpointSnap) {
  const auto half = detail::nonnegative_half(s);
  Peak best{half.front().first, half.front().second};
  for (const auto& [k, v] : half)
    if (v > best.height + kPeakTie * std::max(1.0, std::abs(best.height))) best = {k, v};
  best.theta = detail::snap_endpoint(best.theta, snap);
  return best;
}

/// Phase label from snapped peak positions.
inline PhaseLabel classify(double theta_z, double theta_x) {
  using detail::at_pi, detail::at_zero;
  const bool x_incommensurate = !at_zero(theta_x) && !at_pi(theta_x);
  if (at_pi(theta_z)) {
    if (at_pi(theta_x)) return PhaseLabel::AF;
    if (x_incommensurate) return PhaseLabel::AFz_IAFx;
  } else if (at_zero(theta_z)) {
    if (at_zero(theta_x)) return PhaseLabel::FM;
    if (x_incommensurate) return PhaseLabel::FMz_IAFx;
  }
  return PhaseLabel::Indeterminate;
}

inline PhasePoint make_phase_point(const ModelParams& p, const StructureFactor& sz, const StructureFactor& sx,
                                   bool degenerate) {
  PhasePoint pt{p.t, p.U_s, p.U_l, p.L, peak_position(sz), peak_position(sx), PhaseLabel::Indeterminate, degenerate};
  pt.label = classify(pt.z.theta, pt.x.theta);
  return pt;
}

/// Grid steps around k = 0 left out when looking for the competing peak.
inline constexpr int kZeroNeighbourhood = 3;

/// S(0) minus the highest S(k) with |k| beyond a few grid steps: negative while a
/// finite-k peak dominates, positive once the ferromagnetic peak takes over.
inline double boundary_delta(const StructureFactor& s) {
  const auto half = detail::nonnegative_half(s);
  if (half.size() <= static_cast<std::size_t>(kZeroNeighbourhood) + 1)
    throw ParameterError("k grid too coarse for boundary detection");
  if (half.front().first > 1e-12) throw ParameterError("k grid does not contain k = 0");
  double other = -INFINITY;
  for (std::size_t i = kZeroNeighbourhood + 1; i < half.size(); ++i) other = std::max(other, half[i].second);
  return half.front().second - other;
}

/// Bisection stopping width: 1e-3 U_s, or 1e-3 t without on-site coupling.
inline double boundary_tolerance(double U_s, double t) {
  const double scale = U_s != 0.0 ? std::abs(U_s) : std::abs(t);
  return 1e-3 * (scale > 0.0 ? scale : 1.0);
}

struct BisectionResult {
  double root = 0.0;
  double lo = 0.0, hi = 0.0;
  int evaluations = 0;
};

/// Bisection for a sign change of `delta` in [lo, hi] down to a bracket of width `tol`.
inline BisectionResult bisect(const std::function<double(double)>& delta, double lo, double hi, double tol) {
  if (!(tol > 0.0)) throw ParameterError("bisection tolerance must be positive");
  if (lo > hi) std::swap(lo, hi);
  BisectionResult r{0.0, lo, hi, 2};
  double dlo = delta(lo);
  const double dhi = delta(hi);
  if (dlo == 0.0) return {lo, lo, lo, 2};
  if (dhi == 0.0) return {hi, hi, hi, 2};
  if ((dlo > 0.0) == (dhi > 0.0)) {
    std::ostringstream msg;
    msg << "no sign change in [" << lo << ", " << hi << "]: delta = " << dlo << ", " << dhi;
    throw BracketError(msg.str());
  }
  while (r.hi - r.lo >= tol) {
    const double mid = 0.5 * (r.lo + r.hi);
    const double d = delta(mid);
    ++r.evaluations;
    if (d == 0.0) {
      r.lo = r.hi = mid;
      break;
    }
    if ((d > 0.0) == (dlo > 0.0)) {
      r.lo = mid;
      dlo = d;
    } else {
      r.hi = mid;
    }
  }
  r.root = 0.5 * (r.lo + r.hi);
  return r;
}

/// Consecutive sample pairs whose delta values change sign.
inline std::vector<std::pair<double, double>> sign_change_brackets(const std::vector<double>& x,
                                                                   const std::vector<double>& delta) {
  if (x.size() != delta.size()) throw ParameterError("sample and delta lists differ in length");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    if ((delta[i] > 0.0) != (delta[i + 1] > 0.0)) out.emplace_back(x[i], x[i + 1]);
  return out;
}

struct ScalingFit {
  double a = 0.0, b = 0.0, c = 0.0;  ///< U_c(L) = a + b/L + c/L^2
  double residual = 0.0;             ///< Euclidean norm of the fit residuals
  std::vector<std::pair<int, double>> points;
};

/// Least-squares fit of U_c against a quadratic in 1/L.
inline ScalingFit scaling_fit(std::vector<std::pair<int, double>> points) {
  std::set<int> sizes;
  for (const auto& [L, u] : points) {
    if (L <= 0) throw ParameterError("scaling fit needs positive sizes");
    if (!std::isfinite(u)) throw ParameterError("scaling fit needs finite critical values");
    sizes.insert(L);
  }
  if (sizes.size() < 3)
    throw ParameterError("scaling fit needs at least three distinct sizes, got " + std::to_string(sizes.size()));
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double inv = 1.0 / points[static_cast<std::size_t>(i)].first;
    a.row(i) << 1.0, inv, inv * inv;
    y(i) = points[static_cast<std::size_t>(i)].second;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 3) throw ParameterError("scaling fit design matrix is rank deficient");
  const Eigen::Vector3d coef = qr.solve(y);
  ScalingFit fit{coef(0), coef(1), coef(2), (a * coef - y).norm(), std::move(points)};
  return fit;
}

}  // namespace cavmag
