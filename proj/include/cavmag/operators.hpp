#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cavmag/basis.hpp"
#include "cavmag/params.hpp"

// Every operator below is applied row by row in gather form: out[x] collects
// sum_y O(x, y) in[y] by enumerating the states y connected to x.  Rows are
// independent, each row sums its terms in a fixed order, so the result is
// bitwise identical for any number of OpenMP threads.

namespace cavmag {

enum class Axis { x, y, z };

inline constexpr char axis_name(Axis a) { return a == Axis::x ? 'x' : (a == Axis::y ? 'y' : 'z'); }

namespace detail {

inline constexpr Mask site_bits(int site) { return Mask{3} << (2 * site); }

/// 1 when the site holds exactly one fermion.
inline constexpr bool singly_occupied(Mask x, int site) {
  const Mask s = (x >> (2 * site)) & 3u;
  return s == 1u || s == 2u;
}

inline constexpr bool doubly_occupied(Mask x, int site) { return ((x >> (2 * site)) & 3u) == 3u; }

/// (-1)^(j+1) for 1-based j, i.e. +1 on even 0-based sites.
inline constexpr double stagger(int site) { return (site % 2 == 0) ? 1.0 : -1.0; }

inline double staggered_flip_row(const FockBasis& basis, Mask x, std::span<const double> in) {
  double acc = 0.0;
  for (int j = 0; j < basis.sites(); ++j) {
    if (!singly_occupied(x, j)) continue;
    // The two modes of a site are adjacent, so the flip carries no fermionic sign.
    acc += stagger(j) * in[basis.index(x ^ site_bits(j))];
  }
  return acc;
}

}  // namespace detail

/// out = B in, with B = sum_j (-1)^(j+1) (c+_{j up} c_{j dn} + h.c.).
inline void apply_staggered_spinflip(const FockBasis& basis, std::span<const double> in, std::span<double> out) {
  require_dim(basis, in.size(), "apply_staggered_spinflip(in)");
  require_dim(basis, out.size(), "apply_staggered_spinflip(out)");
  const auto states = basis.states();
  const auto n = static_cast<std::ptrdiff_t>(basis.dim());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = detail::staggered_flip_row(basis, states[i], in);
}

inline std::vector<double> apply_staggered_spinflip(const FockBasis& basis, std::span<const double> in) {
  std::vector<double> out(basis.dim());
  apply_staggered_spinflip(basis, in, out);
  return out;
}

/// Diagonal of H in the occupation basis: (U_s/2) * doublons + (U_l/L) * singly occupied sites.
/// The second term is the diagonal part of (U_l/L) B^2.
inline std::vector<double> diagonal_energies(const ModelParams& params, const FockBasis& basis) {
  std::vector<double> d(basis.dim());
  const double g = params.long_range_coefficient();
  const auto states = basis.states();
  for (std::size_t i = 0; i < d.size(); ++i) {
    int doublons = 0, singles = 0;
    for (int j = 0; j < basis.sites(); ++j) {
      doublons += detail::doubly_occupied(states[i], j);
      singles += detail::singly_occupied(states[i], j);
    }
    d[i] = 0.5 * params.U_s * doublons + g * singles;
  }
  return d;
}

/// Matrix-free effective Hamiltonian
///   H = -t sum_{j,s} (c+_{j s} c_{j+1 s} + h.c.) + (U_s/2) sum_j n_{j up} n_{j dn} + (U_l/L) B^2
/// on an open chain.  B^2 is applied as B(B v) through a scratch vector.
class Hamiltonian {
 public:
  Hamiltonian(const ModelParams& params, const FockBasis& basis)
      : params_(params), basis_(&basis), onsite_(basis.dim()), scratch_(basis.dim()) {
    if (basis.sites() != params.L || basis.particles() != params.N)
      throw ParameterError("basis (L, N) does not match model parameters");
    const auto states = basis.states();
    for (std::size_t i = 0; i < onsite_.size(); ++i) {
      int doublons = 0;
      for (int j = 0; j < basis.sites(); ++j) doublons += detail::doubly_occupied(states[i], j);
      onsite_[i] = 0.5 * params.U_s * doublons;
    }
  }

  const ModelParams& params() const noexcept { return params_; }
  const FockBasis& basis() const noexcept { return *basis_; }
  std::size_t dim() const noexcept { return basis_->dim(); }

  /// out = H in.  Not reentrant: uses an internal scratch vector.
  void apply(std::span<const double> in, std::span<double> out) {
    require_dim(*basis_, in.size(), "Hamiltonian::apply(in)");
    require_dim(*basis_, out.size(), "Hamiltonian::apply(out)");
    const FockBasis& basis = *basis_;
    const auto states = basis.states();
    const auto n = static_cast<std::ptrdiff_t>(basis.dim());
    const int L = basis.sites();
    const double t = params_.t;
    const double g = params_.long_range_coefficient();
    const bool long_range = g != 0.0;

    if (long_range) apply_staggered_spinflip(basis, in, scratch_);
    const std::span<const double> w = scratch_;

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const Mask x = states[i];
      double acc = onsite_[i] * in[i];
      if (t != 0.0) {
        double hop = 0.0;
        for (int j = 0; j + 1 < L; ++j) {
          for (int s = 0; s < 2; ++s) {
            const int a = 2 * j + s;
            const int b = a + 2;
            const Mask pair = (Mask{1} << a) | (Mask{1} << b);
            const Mask occ = x & pair;
            if (occ == 0 || occ == pair) continue;
            // Exactly one mode lies strictly between a and b.
            const double sign = (x >> (a + 1)) & 1u ? -1.0 : 1.0;
            hop += sign * in[basis.index(x ^ pair)];
          }
        }
        acc -= t * hop;
      }
      if (long_range) acc += g * detail::staggered_flip_row(basis, x, w);
      out[i] = acc;
    }
  }

  std::vector<double> apply(std::span<const double> in) {
    std::vector<double> out(dim());
    apply(in, out);
    return out;
  }

 private:
  ModelParams params_;
  const FockBasis* basis_;
  std::vector<double> onsite_;
  std::vector<double> scratch_;
};

inline std::vector<double> apply_hamiltonian(const ModelParams& params, const FockBasis& basis,
                                             std::span<const double> v) {
  Hamiltonian h(params, basis);
  return h.apply(v);
}

/// Per-site rotation of the spin quantization axis from z to x.
///
/// Maps c-mode amplitudes to amplitudes over d-modes with d_{j+} = (c_{j up} + c_{j dn})/sqrt2
/// and d_{j-} = (c_{j up} - c_{j dn})/sqrt2, using the same mode numbering (+ in the
/// up slot).  A doubly occupied site picks up a factor -1.  The map is a
/// symmetric orthogonal involution, so the same call converts back.
inline void rotate_spin_frame(const FockBasis& basis, std::span<double> v) {
  require_dim(basis, v.size(), "rotate_spin_frame");
  const auto states = basis.states();
  const auto n = static_cast<std::ptrdiff_t>(basis.dim());
  const double r = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < basis.sites(); ++j) {
    const Mask up = Mask{1} << (2 * j);
    const Mask both = detail::site_bits(j);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const Mask occ = states[i] & both;
      if (occ == both) {
        v[i] = -v[i];
      } else if (occ == up) {
        const std::size_t partner = basis.index(states[i] ^ both);
        const double a = v[i], b = v[partner];
        v[i] = r * (a + b);
        v[partner] = r * (a - b);
      }
    }
  }
}

/// H in the rotated frame of rotate_spin_frame.  There the staggered flip
/// operator is diagonal, B = sum_j (-1)^(j+1) (n_{j+} - n_{j-}), so H reduces to
/// the same hopping plus a diagonal.  Used by the eigensolver.
class RotatedHamiltonian {
 public:
  RotatedHamiltonian(const ModelParams& params, const FockBasis& basis)
      : t_(params.t), basis_(&basis), diag_(basis.dim()) {
    if (basis.sites() != params.L || basis.particles() != params.N)
      throw ParameterError("basis (L, N) does not match model parameters");
    const double g = params.long_range_coefficient();
    const auto states = basis.states();
    for (std::size_t i = 0; i < diag_.size(); ++i) {
      int doublons = 0;
      double b = 0.0;
      for (int j = 0; j < basis.sites(); ++j) {
        doublons += detail::doubly_occupied(states[i], j);
        const Mask s = (states[i] >> (2 * j)) & 3u;
        if (s == 1u) b += detail::stagger(j);
        if (s == 2u) b -= detail::stagger(j);
      }
      diag_[i] = 0.5 * params.U_s * doublons + g * b * b;
    }
  }

  std::size_t dim() const noexcept { return basis_->dim(); }

  void apply(std::span<const double> in, std::span<double> out) const {
    require_dim(*basis_, in.size(), "RotatedHamiltonian::apply(in)");
    require_dim(*basis_, out.size(), "RotatedHamiltonian::apply(out)");
    const FockBasis& basis = *basis_;
    const auto states = basis.states();
    const auto n = static_cast<std::ptrdiff_t>(basis.dim());
    const int L = basis.sites();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const Mask x = states[i];
      double hop = 0.0;
      if (t_ != 0.0) {
        for (int a = 0; a + 2 < 2 * L; ++a) {
          const Mask pair = (Mask{1} << a) | (Mask{1} << (a + 2));
          const Mask occ = x & pair;
          if (occ == 0 || occ == pair) continue;
          const double sign = (x >> (a + 1)) & 1u ? -1.0 : 1.0;
          hop += sign * in[basis.index(x ^ pair)];
        }
      }
      out[i] = diag_[i] * in[i] - t_ * hop;
    }
  }

 private:
  double t_;
  const FockBasis* basis_;
  std::vector<double> diag_;
};

/// out = S_site in for one single-site spin component (hbar = 1).
///
/// For Axis::x and Axis::z this is s^x and s^z.  For Axis::y the operator
/// applied is the real antisymmetric R = i s^y = (c+_up c_dn - c+_dn c_up)/2, so
/// <s^y_l s^y_j> = (R_l psi) . (R_j psi) for a real psi.
inline void apply_site_spin(const FockBasis& basis, Axis axis, int site, std::span<const double> in,
                            std::span<double> out) {
  require_dim(basis, in.size(), "apply_site_spin(in)");
  require_dim(basis, out.size(), "apply_site_spin(out)");
  if (site < 0 || site >= basis.sites()) throw ParameterError("site index out of range");
  const auto states = basis.states();
  const auto n = static_cast<std::ptrdiff_t>(basis.dim());
  const Mask up = Mask{1} << (2 * site);
  const Mask dn = Mask{1} << (2 * site + 1);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Mask x = states[i];
    const bool has_up = (x & up) != 0;
    const bool has_dn = (x & dn) != 0;
    double value = 0.0;
    switch (axis) {
      case Axis::z:
        value = 0.5 * ((has_up ? 1.0 : 0.0) - (has_dn ? 1.0 : 0.0)) * in[i];
        break;
      case Axis::x:
        if (has_up != has_dn) value = 0.5 * in[basis.index(x ^ (up | dn))];
        break;
      case Axis::y:
        if (has_up != has_dn) value = (has_up ? 0.5 : -0.5) * in[basis.index(x ^ (up | dn))];
        break;
    }
    out[i] = value;
  }
}

}  // namespace cavmag
