#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "cavmag/errors.hpp"

namespace cavmag {

inline constexpr int kMaxSites = 14;

/// Couplings of the effective extended Hubbard chain (open boundary, hbar = 1).
struct ModelParams {
  int L = 2;
  int N = 2;
  double t = 1.0;
  double U_s = 0.0;
  double U_l = 0.0;

  /// Coefficient of B^2 in the Hamiltonian.
  double long_range_coefficient() const { return U_l / static_cast<double>(L); }
};

/// Cavity constants. `G` is the effective atom-cavity coupling eta*M0.
struct CavityParams {
  double G = 0.0;
  double kappa = 1.0;
  double delta_tilde = 1.0;

  /// U_l implied by the cavity constants for a chain of `L` sites.
  double implied_U_l(int L) const {
    return static_cast<double>(L) * G * G * delta_tilde / (delta_tilde * delta_tilde + kappa * kappa);
  }
};

inline void validate(const ModelParams& p) {
  if (p.L < 2 || p.L > kMaxSites || p.L % 2 != 0)
    throw ParameterError("L must be even with 2 <= L <= " + std::to_string(kMaxSites) + ", got " +
                         std::to_string(p.L));
  if (p.N < 0 || p.N > 2 * p.L)
    throw ParameterError("N must satisfy 0 <= N <= 2L, got " + std::to_string(p.N));
  if (!std::isfinite(p.t) || !std::isfinite(p.U_s) || !std::isfinite(p.U_l))
    throw ParameterError("couplings must be finite");
}

inline void validate(const CavityParams& c) {
  if (!std::isfinite(c.G) || !std::isfinite(c.kappa) || !std::isfinite(c.delta_tilde))
    throw ParameterError("cavity constants must be finite");
  if (c.kappa < 0.0) throw ParameterError("kappa must be non-negative");
  if (c.delta_tilde == 0.0 && c.kappa == 0.0)
    throw ParameterError("delta_tilde and kappa cannot both vanish");
}

/// Checks that the cavity constants reproduce `model.U_l` (relative tolerance 1e-12)
/// and that sign(U_l) follows sign(delta_tilde).
inline void check_consistency(const ModelParams& model, const CavityParams& cavity) {
  validate(cavity);
  const double implied = cavity.implied_U_l(model.L);
  const double scale = std::max(std::abs(implied), std::abs(model.U_l));
  if (std::abs(implied - model.U_l) > 1e-12 * scale)
    throw ParameterError("cavity constants imply U_l = " + std::to_string(implied) +
                         " but model has U_l = " + std::to_string(model.U_l));
  if (model.U_l != 0.0 && (model.U_l > 0.0) != (cavity.delta_tilde > 0.0))
    throw ParameterError("sign of U_l must follow sign of delta_tilde");
}

/// Cavity constants reproducing `U_l` at fixed |delta_tilde| and kappa; the
/// detuning sign tracks sign(U_l) (U_l = 0 maps to G = 0, delta_tilde > 0).
inline CavityParams cavity_for(double U_l, int L, double abs_delta_tilde, double kappa) {
  if (!(abs_delta_tilde > 0.0)) throw ParameterError("|delta_tilde| must be positive");
  if (kappa < 0.0) throw ParameterError("kappa must be non-negative");
  CavityParams c;
  c.kappa = kappa;
  c.delta_tilde = U_l < 0.0 ? -abs_delta_tilde : abs_delta_tilde;
  c.G = std::sqrt(std::abs(U_l) * (abs_delta_tilde * abs_delta_tilde + kappa * kappa) /
                  (static_cast<double>(L) * abs_delta_tilde));
  return c;
}

}  // namespace cavmag
