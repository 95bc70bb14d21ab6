#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "cavmag/basis.hpp"
#include "cavmag/lanczos.hpp"
#include "cavmag/observables.hpp"
#include "cavmag/params.hpp"
#include "cavmag/phases.hpp"

// One parameter point of the exact-diagonalization pipeline:
// solve -> correlators -> structure factors -> photon observables -> label.

namespace cavmag {

struct PointOptions {
  LanczosOptions lanczos;
  std::size_t k_points = 1025;
  NormMode norm_mode = NormMode::per_pair;
};

struct AxisData {
  Eigen::MatrixXd correlator;  ///< <s_l s_j>, 0-based sites
  SpinCorrelations correlations;
  StructureFactor structure;
  double at_zero = 0.0, at_pi = 0.0;
  double sum_rule_error = 0.0;  ///< |sum_m S(2 pi m/L) - sum_l <(s_l)^2>|
};

struct PointResult {
  ModelParams model;
  std::optional<CavityParams> cavity;
  std::vector<double> eigenvalues, residual_norms;
  double gap = 0.0;
  bool degenerate = false;
  int iterations = 0;
  std::array<AxisData, 3> axes;  ///< indexed x, y, z
  PhasePoint phase;
  std::optional<PhotonObservables> photon;
  std::optional<double> photon_from_sx;  ///< 4 (U_l/delta_tilde) S_x(pi)
  Wavefunction ground_state;

  const AxisData& axis(Axis a) const { return axes[static_cast<std::size_t>(a)]; }
};

inline constexpr std::array<Axis, 3> kAxes{Axis::x, Axis::y, Axis::z};

/// Lattice-momentum sum rule residual for one correlator matrix.
inline double sum_rule_error(const Eigen::MatrixXd& m) {
  const auto L = m.rows();
  double lhs = 0.0;
  for (Eigen::Index q = 0; q < L; ++q)
    lhs += structure_factor_at(m, 2.0 * std::numbers::pi * static_cast<double>(q) / static_cast<double>(L));
  return std::abs(lhs - m.trace());
}

inline AxisData axis_data(std::span<const double> psi, const FockBasis& basis, Axis a, const PointOptions& opt) {
  AxisData d;
  d.correlator = correlator_matrix(psi, basis, a);
  d.correlations = correlation_function(d.correlator, a, opt.norm_mode);
  d.structure = structure_factor(d.correlator, a, default_k_grid(opt.k_points));
  d.at_zero = structure_factor_at(d.correlator, 0.0);
  d.at_pi = structure_factor_at(d.correlator, std::numbers::pi);
  d.sum_rule_error = sum_rule_error(d.correlator);
  return d;
}

/// Full pipeline at one point.  `basis` must match (model.L, model.N).
inline PointResult evaluate_point(const ModelParams& model, const std::optional<CavityParams>& cavity,
                                  const FockBasis& basis, const PointOptions& opt) {
  if (cavity) check_consistency(model, *cavity);
  const GroundStateSolution sol = lanczos_lowest(model, basis, opt.lanczos);
  PointResult r;
  r.model = model;
  r.cavity = cavity;
  r.eigenvalues = sol.eigenvalues;
  r.residual_norms = sol.residual_norms;
  r.gap = sol.gap;
  r.degenerate = sol.degenerate;
  r.iterations = sol.iterations;
  const auto& psi = sol.ground_state();
  for (Axis a : kAxes) r.axes[static_cast<std::size_t>(a)] = axis_data(psi, basis, a, opt);
  r.phase = make_phase_point(model, r.axis(Axis::z).structure, r.axis(Axis::x).structure, sol.degenerate);
  if (cavity) {
    r.photon = photon_observables(psi, basis, *cavity, model);
    r.photon_from_sx = photon_number_from_sx(model.U_l, cavity->delta_tilde, r.axis(Axis::x).at_pi);
  }
  r.ground_state = psi;
  return r;
}

/// Boundary indicator along one axis at one point: S(0) minus the highest peak
/// away from k = 0.  `warm` (if non-empty) seeds the solver and receives the new ground state.
inline double boundary_delta_at(const ModelParams& model, const FockBasis& basis, Axis a, const PointOptions& opt,
                                Wavefunction* warm = nullptr) {
  LanczosOptions lo = opt.lanczos;
  if (warm && !warm->empty()) lo.initial_guess = *warm;
  const GroundStateSolution sol = lanczos_lowest(model, basis, lo);
  const Eigen::MatrixXd m = correlator_matrix(sol.ground_state(), basis, a);
  if (warm) *warm = sol.ground_state();
  return boundary_delta(structure_factor(m, a, default_k_grid(opt.k_points)));
}

}  // namespace cavmag
