#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "cavmag/basis.hpp"
#include "cavmag/errors.hpp"
#include "cavmag/operators.hpp"
#include "cavmag/params.hpp"

namespace cavmag {

/// Normalization of C(r) at open boundaries: per_pair divides by the L - r
/// pairs actually summed, per_site by L.
enum class NormMode { per_pair, per_site };

struct SpinCorrelations {
  Axis alpha = Axis::z;
  std::vector<double> values;  ///< C(r), r = 0..L-1
  NormMode norm_mode = NormMode::per_pair;
};

struct StructureFactor {
  Axis alpha = Axis::z;
  std::vector<double> k_grid;
  std::vector<double> values;
};

struct PhotonObservables {
  double photon_number = 0.0;
  std::complex<double> mean_amplitude{};
  /// <da+ da>/<a+ a>; empty when the photon number is at most 1e-14.
  std::optional<double> fluctuation_ratio;
};

namespace detail {

inline void require_normalized(std::span<const double> psi) {
  double n = 0.0;
  for (double a : psi) n += a * a;
  if (std::abs(std::sqrt(n) - 1.0) > 1e-8) throw ParameterError("wavefunction is not normalized");
}

}  // namespace detail

/// Matrix M(l, j) = <s_l^a s_j^a> over 0-based sites.
///
/// Each single-site operator is applied once and M is the Gram matrix of the
/// L images.  For the y axis the images are R_l psi with R = i s^y real and
/// antisymmetric, so <s^y_l s^y_j> = (R_l psi).(R_j psi) as well.
inline Eigen::MatrixXd correlator_matrix(std::span<const double> psi, const FockBasis& basis, Axis alpha) {
  require_dim(basis, psi.size(), "correlator_matrix");
  detail::require_normalized(psi);
  const int L = basis.sites();
  const auto n = static_cast<Eigen::Index>(basis.dim());
  Eigen::MatrixXd images(n, L);
  for (int l = 0; l < L; ++l)
    apply_site_spin(basis, alpha, l, psi, std::span<double>(images.col(l).data(), basis.dim()));
  Eigen::MatrixXd m = images.transpose() * images;
  return 0.5 * (m + m.transpose());
}

/// <s_l^a s_j^a> for 1-based sites l, j.
inline double spin_correlator(std::span<const double> psi, const FockBasis& basis, Axis alpha, int l, int j) {
  if (l < 1 || l > basis.sites() || j < 1 || j > basis.sites()) throw ParameterError("site index out of range");
  require_dim(basis, psi.size(), "spin_correlator");
  detail::require_normalized(psi);
  std::vector<double> a(basis.dim()), b(basis.dim());
  apply_site_spin(basis, alpha, l - 1, psi, a);
  apply_site_spin(basis, alpha, j - 1, psi, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline SpinCorrelations correlation_function(const Eigen::MatrixXd& m, Axis alpha,
                                             NormMode mode = NormMode::per_pair) {
  const auto L = m.rows();
  SpinCorrelations c{alpha, std::vector<double>(static_cast<std::size_t>(L), 0.0), mode};
  for (Eigen::Index r = 0; r < L; ++r) {
    double sum = 0.0;
    for (Eigen::Index l = 0; l + r < L; ++l) sum += m(l, l + r);
    const double pairs = static_cast<double>(L - r);
    c.values[static_cast<std::size_t>(r)] = sum / (mode == NormMode::per_pair ? pairs : static_cast<double>(L));
  }
  return c;
}

inline SpinCorrelations correlation_function(std::span<const double> psi, const FockBasis& basis, Axis alpha,
                                             NormMode mode = NormMode::per_pair) {
  return correlation_function(correlator_matrix(psi, basis, alpha), alpha, mode);
}

/// Uniform grid over [-pi, pi] with both endpoints.
inline std::vector<double> default_k_grid(std::size_t points = 1025) {
  if (points < 2) throw ParameterError("k grid needs at least two points");
  std::vector<double> k(points);
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < points; ++i)
    k[i] = -pi + 2.0 * pi * static_cast<double>(i) / static_cast<double>(points - 1);
  k.front() = -pi;
  k.back() = pi;
  return k;
}

/// S(k) = (1/L) sum_{l,j} cos(k (l - j)) M(l, j); the sine part cancels since M is symmetric.
inline double structure_factor_at(const Eigen::MatrixXd& m, double k) {
  const auto L = m.rows();
  double s = 0.0;
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index j = 0; j < L; ++j) s += std::cos(k * static_cast<double>(l - j)) * m(l, j);
  return s / static_cast<double>(L);
}

inline StructureFactor structure_factor(const Eigen::MatrixXd& m, Axis alpha, std::vector<double> k_grid) {
  StructureFactor sf{alpha, std::move(k_grid), {}};
  sf.values.reserve(sf.k_grid.size());
  for (double k : sf.k_grid) sf.values.push_back(structure_factor_at(m, k));
  return sf;
}

inline StructureFactor structure_factor(std::span<const double> psi, const FockBasis& basis, Axis alpha,
                                        std::vector<double> k_grid = default_k_grid()) {
  return structure_factor(correlator_matrix(psi, basis, alpha), alpha, std::move(k_grid));
}

/// Photon number from the x structure factor: 4 (U_l / delta_tilde) S_x(pi).
inline double photon_number_from_sx(double U_l, double delta_tilde, double sx_at_pi) {
  return 4.0 * (U_l / delta_tilde) * sx_at_pi;
}

/// Cavity observables from the adiabatically eliminated field a = G/(i kappa + delta_tilde) B.
/// The photon number is G^2/(kappa^2 + delta_tilde^2) ||B psi||^2.
inline PhotonObservables photon_observables(std::span<const double> psi, const FockBasis& basis,
                                            const CavityParams& cavity, const ModelParams& model) {
  check_consistency(model, cavity);
  require_dim(basis, psi.size(), "photon_observables");
  detail::require_normalized(psi);
  const std::vector<double> b = apply_staggered_spinflip(basis, psi);
  double b2 = 0.0, b1 = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    b2 += b[i] * b[i];
    b1 += psi[i] * b[i];
  }
  const double d = cavity.delta_tilde, kap = cavity.kappa;
  PhotonObservables out;
  out.photon_number = cavity.G * cavity.G / (kap * kap + d * d) * b2;
  out.mean_amplitude = cavity.G / std::complex<double>(d, kap) * b1;
  if (out.photon_number > 1e-14) out.fluctuation_ratio = 1.0 - std::norm(out.mean_amplitude) / out.photon_number;
  return out;
}

}  // namespace cavmag
