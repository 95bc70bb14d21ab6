#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include "cavmag/errors.hpp"
#include "cavmag/params.hpp"

// Self-consistent cavity field for the free chain (U_s = 0).
//
// After c_{j,up} -> (-1)^(j+1) c_{j,up} (1-based j) the staggered spin flip B
// becomes the uniform flip F = sum_j (c+_{j,up} c_{j,dn} + h.c.).  The same gauge
// flips the sign of the spin-up hopping, so the single-particle matrix has +t on
// the up chain, -t on the down chain, and h = G (alpha + alpha*) on every
// on-site up-down element.  Undoing the gauge and rotating to spin-x gives two
// open chains with staggered potentials +h s_j and -h s_j, which is the
// decoupled prediction checked against the full 2L x 2L diagonalization.  The
// fixed-point loop fills the two chains directly and every reported fixed
// point is re-evaluated with the full matrix.

namespace cavmag {

struct MeanFieldParams {
  int L = 64;
  int N = 64;
  double t = 1.0;
  CavityParams cavity;
  double damping = 0.5;
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

struct SingleParticleSpectrum {
  Eigen::VectorXd energies;  ///< 2L ascending
  Eigen::MatrixXd orbitals;  ///< columns, modes ordered 2j + spin (up = 0)
};

struct MeanFieldState {
  std::complex<double> alpha{};
  Eigen::VectorXd single_particle_energies;
  int occupation = 0;
  double order_parameter = 0.0;  ///< Theta = <F> of the filled orbitals
  double energy = 0.0;           ///< <H_hop> + (U_l/L) Theta^2
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;  ///< |G Theta/(i kappa + delta_tilde) - alpha|
};

struct MeanFieldSolution {
  MeanFieldState best;
  std::vector<std::complex<double>> seeds;
  std::vector<MeanFieldState> runs;  ///< one per seed, converged or not
};

namespace detail {

inline void validate(const MeanFieldParams& p) {
  if (p.L < 2 || p.L > 4096) throw ParameterError("mean field: L must satisfy 2 <= L <= 4096");
  if (p.N < 0 || p.N > 2 * p.L) throw ParameterError("mean field: N must satisfy 0 <= N <= 2L");
  if (!std::isfinite(p.t)) throw ParameterError("mean field: t must be finite");
  validate(p.cavity);
  if (!(p.damping > 0.0 && p.damping <= 1.0)) throw ParameterError("mean field: damping must lie in (0, 1]");
  if (!(p.tolerance > 0.0)) throw ParameterError("mean field: tolerance must be positive");
  if (p.max_iterations < 1) throw ParameterError("mean field: max_iterations must be positive");
}

/// Spectrum of the open chain -t hopping plus on-site potential v_j.
inline Eigen::VectorXd chain_spectrum(int L, double t, const Eigen::VectorXd& onsite) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(onsite, Eigen::VectorXd::Constant(L - 1, -t), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Theta contribution <v|F|v> of one orbital.
inline double flip_expectation(const Eigen::Ref<const Eigen::VectorXd>& v) {
  double s = 0.0;
  for (Eigen::Index j = 0; 2 * j + 1 < v.size(); ++j) s += 2.0 * v(2 * j) * v(2 * j + 1);
  return s;
}

inline std::complex<double> cavity_response(const CavityParams& c) {
  return c.G / std::complex<double>(c.delta_tilde, c.kappa);
}

}  // namespace detail

/// Single-particle matrix in the gauged frame for on-site flip amplitude h.
inline Eigen::MatrixXd single_particle_matrix(int L, double t, double h) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * L, 2 * L);
  for (int j = 0; j < L; ++j) {
    m(2 * j, 2 * j + 1) = m(2 * j + 1, 2 * j) = h;
    if (j + 1 < L) {
      m(2 * j, 2 * j + 2) = m(2 * j + 2, 2 * j) = t;
      m(2 * j + 1, 2 * j + 3) = m(2 * j + 3, 2 * j + 1) = -t;
    }
  }
  return m;
}

/// Union of the two staggered-potential chain spectra, ascending.
inline Eigen::VectorXd decoupled_chain_energies(int L, double t, double h) {
  Eigen::VectorXd stagger(L);
  for (int j = 0; j < L; ++j) stagger(j) = j % 2 == 0 ? h : -h;
  Eigen::VectorXd out(2 * L);
  out << detail::chain_spectrum(L, t, stagger), detail::chain_spectrum(L, t, -stagger);
  std::sort(out.data(), out.data() + out.size());
  return out;
}

/// Diagonalizes the full 2L x 2L matrix at h = 2 G Re(alpha) and checks it
/// against the decoupled chains.
inline SingleParticleSpectrum single_particle_spectrum(int L, double t, double G, std::complex<double> alpha) {
  if (L < 2 || L > 4096) throw ParameterError("mean field: L must satisfy 2 <= L <= 4096");
  const double h = 2.0 * G * alpha.real();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(single_particle_matrix(L, t, h));
  if (es.info() != Eigen::Success) throw ConvergenceError("single-particle diagonalization failed", INFINITY);
  const Eigen::VectorXd chains = decoupled_chain_energies(L, t, h);
  const double scale = std::max({1.0, std::abs(t), std::abs(h)});
  const double mismatch = (es.eigenvalues() - chains).cwiseAbs().maxCoeff();
  if (mismatch > 1e-10 * scale) {
    std::ostringstream msg;
    msg << "full and decoupled single-particle spectra differ by " << mismatch;
    throw Error(msg.str());
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

namespace detail {

struct Filling {
  Eigen::VectorXd energies;  ///< 2L ascending
  double theta = 0.0;
  double band = 0.0;  ///< sum of the N lowest energies
};

/// Zero-temperature filling of the two spin-x chains.  Chain +- sees the
/// potential +-h s_j and contributes +-sum_j s_j |v_j|^2 per orbital to Theta.
inline Filling fill_chains(int L, int N, double t, double h) {
  Eigen::VectorXd stagger(L);
  for (int j = 0; j < L; ++j) stagger(j) = j % 2 == 0 ? 1.0 : -1.0;
  struct Level {
    double e, w;
  };
  std::vector<Level> levels;
  levels.reserve(2 * static_cast<std::size_t>(L));
  // For even L the reflection j -> L-1-j maps one chain onto the other with
  // the same weights, so a single diagonalization serves both.
  const bool mirror = L % 2 == 0;
  for (double sign : {1.0, -1.0}) {
    if (mirror && sign < 0.0) {
      for (std::size_t a = 0, n = levels.size(); a < n; ++a) levels.push_back(levels[a]);
      break;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(sign * h * stagger, Eigen::VectorXd::Constant(L - 1, -t), Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw ConvergenceError("chain diagonalization failed", INFINITY);
    for (Eigen::Index a = 0; a < L; ++a)
      levels.push_back({es.eigenvalues()(a), sign * es.eigenvectors().col(a).cwiseAbs2().dot(stagger)});
  }
  std::stable_sort(levels.begin(), levels.end(), [](const Level& a, const Level& b) { return a.e < b.e; });
  const std::size_t n = static_cast<std::size_t>(N);
  if (n > 0 && n < levels.size() && levels[n].e - levels[n - 1].e <= 1e-12) {
    // Orbitals at one energy are not mixed by B (different chains, or a
    // nondegenerate chain level), so the filling is ambiguous iff weights differ.
    const double ef = levels[n - 1].e;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& l : levels)
      if (std::abs(l.e - ef) <= 1e-12) {
        lo = std::min(lo, l.w);
        hi = std::max(hi, l.w);
      }
    if (hi - lo > 1e-10)
      throw FermiDegeneracyError("levels " + std::to_string(N) + " and " + std::to_string(N + 1) +
                                 " are degenerate with different spin-flip weights");
  }
  Filling f;
  f.energies.resize(static_cast<Eigen::Index>(levels.size()));
  for (std::size_t i = 0; i < levels.size(); ++i) {
    f.energies(static_cast<Eigen::Index>(i)) = levels[i].e;
    if (i < n) {
      f.theta += levels[i].w;
      f.band += levels[i].e;
    }
  }
  return f;
}

}  // namespace detail

/// Theta of the N lowest orbitals of the full 2L x 2L matrix; used to
/// cross-check reported fixed points.
inline double full_matrix_order_parameter(int L, int N, double t, double G, std::complex<double> alpha) {
  const auto sp = single_particle_spectrum(L, t, G, alpha);
  double theta = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) theta += detail::flip_expectation(sp.orbitals.col(i));
  return theta;
}

/// Filled-orbital data at fixed alpha: Theta, energy and the S3 residual.
inline MeanFieldState mf_evaluate(std::complex<double> alpha, const MeanFieldParams& p) {
  detail::validate(p);
  const double h = 2.0 * p.cavity.G * alpha.real();
  const auto f = detail::fill_chains(p.L, p.N, p.t, h);
  MeanFieldState s;
  s.alpha = alpha;
  s.single_particle_energies = f.energies;
  s.occupation = p.N;
  s.order_parameter = f.theta;
  const double coupling = p.cavity.implied_U_l(p.L) / static_cast<double>(p.L);
  s.energy = f.band - h * f.theta + coupling * f.theta * f.theta;
  s.residual = std::abs(detail::cavity_response(p.cavity) * f.theta - alpha);
  return s;
}

/// One damped update alpha <- (1 - gamma) alpha + gamma G Theta/(i kappa + delta_tilde).
/// The returned state carries the new alpha; Theta, energy and residual refer to the input alpha.
inline MeanFieldState mf_step(const MeanFieldState& state, const MeanFieldParams& p) {
  MeanFieldState next = mf_evaluate(state.alpha, p);
  const std::complex<double> target = detail::cavity_response(p.cavity) * next.order_parameter;
  next.alpha = (1.0 - p.damping) * state.alpha + p.damping * target;
  next.iterations = state.iterations + 1;
  return next;
}

/// Default seeds: 0 and +-0.1 sqrt(L) along the locked phase arg(1/(i kappa + delta_tilde)).
inline std::vector<std::complex<double>> default_seeds(const MeanFieldParams& p) {
  const std::complex<double> phase = std::polar(1.0, -std::arg(std::complex<double>(p.cavity.delta_tilde, p.cavity.kappa)));
  const double r = 0.1 * std::sqrt(static_cast<double>(p.L));
  return {0.0, r * phase, -r * phase};
}

/// Iterates from one seed.  The damping is halved whenever an update reverses
/// the direction of the previous one: at repulsive U_l the slope of the bare map
/// at alpha = 0 is below -1 and fixed damping 0.5 oscillates or diverges there.
inline MeanFieldState mf_iterate(std::complex<double> seed, const MeanFieldParams& p) {
  MeanFieldParams q = p;
  MeanFieldState state;
  state.alpha = seed;
  MeanFieldState best;
  best.residual = INFINITY;
  std::complex<double> previous_step{};
  for (int it = 0; it < p.max_iterations; ++it) {
    const MeanFieldState next = mf_step(state, q);
    MeanFieldState here = next;
    here.alpha = state.alpha;
    if (here.residual < best.residual) best = here;
    if (next.residual <= p.tolerance * std::max(1.0, std::abs(state.alpha))) {
      const double full = full_matrix_order_parameter(p.L, p.N, p.t, p.cavity.G, here.alpha);
      if (std::abs(full - here.order_parameter) > 1e-9 * std::max(1.0, std::abs(full))) {
        std::ostringstream msg;
        msg << "full-matrix Theta " << full << " disagrees with chain Theta " << here.order_parameter;
        throw Error(msg.str());
      }
      here.converged = true;
      return here;
    }
    const std::complex<double> step = next.alpha - state.alpha;
    if ((step * std::conj(previous_step)).real() < 0.0 && q.damping > 1e-3) q.damping *= 0.5;
    previous_step = step;
    state = next;
  }
  best.iterations = p.max_iterations;
  best.converged = false;
  return best;
}

/// Fixed point with the lowest energy among all converged seeds.
inline MeanFieldSolution mf_solve(const MeanFieldParams& p, std::vector<std::complex<double>> seeds = {}) {
  detail::validate(p);
  if (seeds.empty()) seeds = default_seeds(p);
  // alpha = 0 reproduces itself exactly: the filled levels come in +-h pairs.
  const MeanFieldState zero = mf_evaluate(0.0, p);
  if (zero.residual > 1e-12) {
    std::ostringstream msg;
    msg << "alpha = 0 is not a fixed point (residual " << zero.residual << ")";
    throw Error(msg.str());
  }
  MeanFieldSolution sol;
  sol.seeds = seeds;
  bool any = false;
  for (const auto& seed : seeds) {
    sol.runs.push_back(mf_iterate(seed, p));
    const MeanFieldState& r = sol.runs.back();
    if (!r.converged) continue;
    if (!any || r.energy < sol.best.energy - 1e-12 * std::max(1.0, std::abs(r.energy))) sol.best = r;
    any = true;
  }
  if (!any) {
    std::ostringstream msg;
    double best = INFINITY;
    msg << "mean field did not converge from any seed; best residuals:";
    for (const auto& r : sol.runs) {
      msg << ' ' << r.residual;
      best = std::min(best, r.residual);
    }
    throw ConvergenceError(msg.str(), best);
  }
  return sol;
}

/// Cavity constants for a mean-field sweep point: fixed |delta_tilde| and kappa,
/// detuning sign following U_l.
inline MeanFieldParams meanfield_point(int L, int N, double t, double U_l, double abs_delta_tilde, double kappa) {
  MeanFieldParams p;
  p.L = L;
  p.N = N;
  p.t = t;
  p.cavity = cavity_for(U_l, L, abs_delta_tilde, kappa);
  return p;
}

}  // namespace cavmag
