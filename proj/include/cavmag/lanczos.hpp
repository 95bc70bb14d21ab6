#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "cavmag/basis.hpp"
#include "cavmag/errors.hpp"
#include "cavmag/operators.hpp"
#include "cavmag/sector.hpp"

namespace cavmag {

struct LanczosOptions {
  int count = 3;
  std::uint64_t seed = 20180101;
  /// Converged when the residual norm is below tolerance * max(1, estimated norm of H).
  double tolerance = 1e-10;
  /// Matrix-vector products allowed per requested eigenpair.
  int max_iterations = 2000;
  int krylov_dim = 40;
  int keep = 12;
  /// Random start vectors; 0 means `count`.  Multiplicities up to this size are resolved.
  int block_size = 0;
  /// Optional start vector for the lowest eigenpair (warm start).
  std::span<const double> initial_guess{};
};

struct GroundStateSolution {
  std::vector<double> eigenvalues;  ///< ascending
  std::vector<Wavefunction> eigenvectors;
  std::vector<double> residual_norms;
  double gap = 0.0;
  int iterations = 0;
  bool degenerate = false;

  const Wavefunction& ground_state() const { return eigenvectors.front(); }
  double ground_energy() const { return eigenvalues.front(); }
};

namespace detail {

using ColMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

inline void fill_gaussian(Eigen::Ref<Eigen::VectorXd> v, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
}

/// Classical Gram-Schmidt of w against the first `locked` columns of `x` and
/// the first `cols` columns of `q`, repeated (up to three passes) while a
/// pass removes more than 1 - 1/sqrt2 of the norm.  Both sets are projected
/// in every pass so neither reintroduces components of the other.  Returns
/// the accumulated coefficients on `q`.
inline Eigen::VectorXd orthogonalize(const ColMatrix& x, Eigen::Index locked, const ColMatrix& q, Eigen::Index cols,
                                     Eigen::Ref<Eigen::VectorXd> w) {
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(cols);
  double before = w.norm();
  for (int pass = 0; pass < 3; ++pass) {
    if (locked > 0) {
      const Eigen::VectorXd c = x.leftCols(locked).transpose() * w;
      w.noalias() -= x.leftCols(locked) * c;
    }
    if (cols > 0) {
      const Eigen::VectorXd c = q.leftCols(cols).transpose() * w;
      w.noalias() -= q.leftCols(cols) * c;
      coeff += c;
    }
    const double after = w.norm();
    if (after > M_SQRT1_2 * before) break;
    before = after;
  }
  return coeff;
}

[[noreturn]] inline void throw_unconverged(int matvecs, double best) {
  std::ostringstream msg;
  msg << "Lanczos did not converge in " << matvecs << " matrix-vector products (best residual " << best << ")";
  throw ConvergenceError(msg.str(), best);
}

struct LockedPairs {
  ColMatrix vectors;
  Eigen::VectorXd values;
  int matvecs = 0;
};

/// Thick-restart Lanczos with full reorthogonalization and locking.
///
/// The basis is a queue: columns [0, processed) have been multiplied by A,
/// columns [processed, filled) are waiting.  Processing column j appends the
/// orthogonalized residual of A v_j to the queue, so the projected matrix T
/// stays exact for the processed block and the rows of the waiting vectors
/// hold the Ritz residual couplings.  Starting the queue with `block` random
/// vectors makes this a block Krylov method, so eigenvalues of multiplicity up
/// to `block` are found with full multiplicity.  Converged Ritz pairs are
/// locked from the bottom and projected out of all later work.
template <class Apply>
LockedPairs thick_restart_lanczos(Apply&& apply, Eigen::Index n, Eigen::Index k, const LanczosOptions& opt,
                                  std::span<const double> guess, std::mt19937_64& rng,
                                  double ceiling = INFINITY) {
  const Eigen::Index block = std::clamp<Eigen::Index>(opt.block_size > 0 ? opt.block_size : k, 1, k);
  const Eigen::Index m = std::min<Eigen::Index>(std::max<Eigen::Index>(opt.krylov_dim, 2 * k + block + 2), n);
  const Eigen::Index keep = std::clamp<Eigen::Index>(opt.keep, 1, std::max<Eigen::Index>(m - block - 2, 1));
  const long long budget = static_cast<long long>(opt.max_iterations) * k;

  ColMatrix v(n, m);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  LockedPairs out;
  out.vectors.resize(n, k);
  out.values.resize(k);
  Eigen::Index locked = 0, filled = 0, processed = 0;
  double anorm = 0.0;
  double best = INFINITY;
  Eigen::VectorXd w(n);

  auto push = [&](Eigen::VectorXd x) -> bool {
    if (filled >= m || filled + locked >= n) return false;
    const double before = x.norm();
    orthogonalize(out.vectors, locked, v, filled, x);
    const double after = x.norm();
    if (!(after > 1e-8 * before)) return false;
    v.col(filled++) = x / after;
    return true;
  };
  auto push_random = [&]() -> bool {
    Eigen::VectorXd r(n);
    for (int attempt = 0; attempt < 8; ++attempt) {
      fill_gaussian(r, rng);
      if (push(r)) return true;
      if (filled >= m || filled + locked >= n) return false;
    }
    return false;
  };

  if (!guess.empty()) {
    Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(guess.data(), n).normalized();
    Eigen::VectorXd r(n);
    fill_gaussian(r, rng);
    push(g + 1e-3 * r.normalized());
  }
  while (filled < block) push_random();

  bool inject = block < k;
  bool converged_above = false;
  while (locked < k) {
    bool exhausted = false;
    if (processed == filled) exhausted = !push_random();
    if (!exhausted) {
      // A restart below guarantees room for the residual of the column processed here.
      const Eigen::Index j = processed;
      apply(std::span<const double>(v.col(j).data(), static_cast<std::size_t>(n)),
            std::span<double>(w.data(), static_cast<std::size_t>(n)));
      ++out.matvecs;
      const double wnorm = w.norm();
      anorm = std::max(anorm, wnorm);
      // Remove the couplings already known from T, then the diagonal term, so
      // that the full reorthogonalization below sees only a small remainder.
      Eigen::VectorXd c = Eigen::VectorXd::Zero(filled);
      for (Eigen::Index i = 0; i < j; ++i)
        if (t(i, j) != 0.0) {
          c(i) = t(i, j);
          w.noalias() -= c(i) * v.col(i);
        }
      c(j) = v.col(j).dot(w);
      w.noalias() -= c(j) * v.col(j);
      c += orthogonalize(out.vectors, locked, v, filled, w);
      double beta = w.norm();
      // Heavy cancellation leaves mostly roundoff; renormalize and orthogonalize
      // again so the new basis vector stays orthogonal after scaling by 1/beta.
      for (int pass = 0; pass < 3 && beta > 0.0 && beta < 1e-3 * wnorm; ++pass) {
        w /= beta;
        c += beta * orthogonalize(out.vectors, locked, v, filled, w);
        const double shrink = w.norm();
        w *= beta;
        beta *= shrink;
        if (shrink > 0.5) break;
      }
      for (Eigen::Index i = 0; i < filled; ++i) t(i, j) = t(j, i) = c(i);
      ++processed;
      if (beta > 1e-14 * std::max(anorm, 1.0) && filled + locked < n) {
        t(filled, j) = t(j, filled) = beta;
        v.col(filled++) = w / beta;
      }
    }

    const Eigen::Index p = processed;
    if (p == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.topLeftCorner(p, p));
    const Eigen::VectorXd& theta = es.eigenvalues();
    const Eigen::MatrixXd& y = es.eigenvectors();
    const Eigen::MatrixXd coupling = t.block(p, 0, filled - p, p) * y;

    const Eigen::Index wanted = std::min<Eigen::Index>(p, k - locked);
    Eigen::Index converged = 0;
    while (converged < wanted) {
      const double r = exhausted ? 0.0 : coupling.col(converged).norm();
      if (converged == 0) best = std::min(best, r);
      if (r > opt.tolerance * std::max(1.0, anorm)) break;
      ++converged;
    }
    // Everything left in this space lies above the ceiling once the lowest
    // unlocked Ritz pair is reasonably converged and its error bar clears it.
    if (std::isfinite(ceiling) && !exhausted && converged < wanted) {
      const double r = coupling.col(converged).norm();
      if (r <= std::sqrt(opt.tolerance) * std::max(1.0, anorm) && theta(converged) - r > ceiling) {
        converged_above = true;
      }
    }
    const bool full = filled >= m && filled + locked < n;
    if (converged_above && converged == 0) break;
    if (converged == 0 && !full && !exhausted) {
      if (out.matvecs >= budget) throw_unconverged(out.matvecs, best);
      continue;
    }
    if (exhausted && converged < wanted)
      throw ConvergenceError("Krylov space exhausted before all eigenpairs converged", best);

    // Restart: lock converged pairs, keep the next Ritz vectors and the waiting queue.
    const Eigen::Index kept = std::min(p - converged, keep);
    const ColMatrix ritz = v.leftCols(p) * y.leftCols(converged + kept);
    for (Eigen::Index i = 0; i < converged; ++i) {
      out.vectors.col(locked + i) = ritz.col(i).normalized();
      out.values(locked + i) = theta(i);
    }
    locked += converged;
    if (converged > 0) best = INFINITY;
    const Eigen::Index waiting = filled - p;
    for (Eigen::Index i = 0; i < kept; ++i) v.col(i) = ritz.col(converged + i);
    for (Eigen::Index u = 0; u < waiting; ++u) v.col(kept + u) = v.col(p + u);
    t.setZero();
    for (Eigen::Index i = 0; i < kept; ++i) {
      t(i, i) = theta(converged + i);
      for (Eigen::Index u = 0; u < waiting; ++u) t(kept + u, i) = t(i, kept + u) = coupling(u, converged + i);
    }
    processed = kept;
    filled = kept + waiting;
    // Pairs lock in ascending order, so nothing further can land below the ceiling.
    if (converged > 0 && (out.values(locked - 1) > ceiling || converged_above)) break;
    if (converged > 0 && inject && locked < k) push_random();
    if (out.matvecs >= budget && locked < k) throw_unconverged(out.matvecs, best);
  }
  out.vectors.conservativeResize(n, locked);
  out.values.conservativeResize(locked);
  return out;
}

}  // namespace detail

namespace detail {

struct SectorPairs {
  int n_plus = 0;
  bool mirrored = false;  ///< eigenvectors live in the flavour-swapped sector
  Eigen::VectorXd values;
  ColMatrix vectors;
};

/// In the balanced sector the flavour swap (c_dn -> -c_dn) maps the sector to
/// itself and commutes with H.  A nondegenerate eigenvector is then even or
/// odd, but a Ritz vector carries admixtures of a nearby level of the other
/// parity of order residual / gap.  Projecting onto the dominant parity
/// removes them; the set is reorthonormalized and reordered by Rayleigh quotient.
inline void project_swap_parity(const SectorHamiltonian& h, const FlavourSector& sector, SectorPairs& pairs) {
  const std::size_t m = sector.minus_count();
  const auto pats = sector.plus_patterns();
  const auto n = static_cast<Eigen::Index>(sector.dim());
  const Eigen::Index k = pairs.vectors.cols();
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd swapped(n);
    for (std::size_t ip = 0; ip < m; ++ip)
      for (std::size_t im = 0; im < m; ++im) {
        const int doublons = std::popcount(static_cast<unsigned>(pats[ip] & pats[im]));
        const double a = pairs.vectors(static_cast<Eigen::Index>(im * m + ip), c);
        swapped(static_cast<Eigen::Index>(ip * m + im)) = doublons % 2 ? -a : a;
      }
    const double overlap = pairs.vectors.col(c).dot(swapped);
    if (std::abs(overlap) < 0.5) continue;  // no dominant parity: leave as is
    pairs.vectors.col(c) += (overlap > 0 ? 1.0 : -1.0) * swapped;
    for (Eigen::Index q = 0; q < c; ++q)
      pairs.vectors.col(c) -= pairs.vectors.col(q).dot(pairs.vectors.col(c)) * pairs.vectors.col(q);
    pairs.vectors.col(c).normalize();
  }
  Eigen::VectorXd hx(n);
  for (Eigen::Index c = 0; c < k; ++c) {
    h.apply(std::span<const double>(pairs.vectors.col(c).data(), static_cast<std::size_t>(n)),
            std::span<double>(hx.data(), static_cast<std::size_t>(n)));
    pairs.values(c) = pairs.vectors.col(c).dot(hx);
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return pairs.values(a) < pairs.values(b); });
  const SectorPairs copy = pairs;
  for (Eigen::Index c = 0; c < k; ++c) {
    pairs.values(c) = copy.values(idx[static_cast<std::size_t>(c)]);
    pairs.vectors.col(c) = copy.vectors.col(idx[static_cast<std::size_t>(c)]);
  }
}

/// Lowest `k` eigenpairs inside one flavour sector, finished by a
/// Rayleigh-Ritz step over the locked vectors.  Stops early once an
/// eigenvalue above `ceiling` has been found.
inline SectorPairs solve_sector(const ModelParams& params, const FlavourSector& sector, Eigen::Index k,
                                const LanczosOptions& opt, std::span<const double> guess, double ceiling,
                                int& matvecs) {
  const SectorHamiltonian h(params, sector);
  const auto n = static_cast<Eigen::Index>(sector.dim());
  k = std::min(k, n);
  std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                    static_cast<std::uint32_t>(sector.n_plus())};
  std::mt19937_64 rng(seq);
  auto apply = [&h](std::span<const double> in, std::span<double> out) { h.apply(in, out); };
  LockedPairs pairs = thick_restart_lanczos(apply, n, k, opt, guess, rng, ceiling);
  matvecs += pairs.matvecs;
  k = pairs.vectors.cols();
  SectorPairs out;
  out.n_plus = sector.n_plus();
  if (k == 0) return out;

  ColMatrix hx(n, k);
  for (Eigen::Index i = 0; i < k; ++i)
    h.apply(std::span<const double>(pairs.vectors.col(i).data(), static_cast<std::size_t>(n)),
            std::span<double>(hx.col(i).data(), static_cast<std::size_t>(n)));
  matvecs += static_cast<int>(k);
  const Eigen::MatrixXd small = pairs.vectors.transpose() * hx;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (small + small.transpose()));
  out.values = es.eigenvalues();
  out.vectors = pairs.vectors * es.eigenvectors();
  out.vectors.colwise().normalize();
  if (2 * sector.n_plus() == params.N) project_swap_parity(h, sector, out);
  return out;
}

}  // namespace detail

/// Lowest `opt.count` eigenpairs of H by Lanczos iteration.
///
/// The iteration runs in the spin frame rotated to the x axis, where H
/// conserves the number of fermions of each x-spin flavour.  Each flavour
/// sector with n_plus >= n_minus is solved separately, skipping eigenvalues
/// above the current k-th lowest found elsewhere; the swapped sector has
/// the same spectrum (c_dn -> -c_dn symmetry) and its eigenvectors follow by
/// relabelling.  The lowest values over all sectors are kept, ties ordered by
/// n_plus descending, and the vectors are rotated back to the original frame.
/// Residuals are recomputed with the full-space Hamiltonian.
inline GroundStateSolution lanczos_lowest(const ModelParams& params, const FockBasis& basis,
                                          const LanczosOptions& opt = {}) {
  validate(params);
  if (opt.count < 1) throw ParameterError("eigenpair count must be >= 1");
  if (basis.sites() != params.L || basis.particles() != params.N)
    throw ParameterError("basis (L, N) does not match model parameters");
  if (basis.dim() < static_cast<std::size_t>(opt.count))
    throw ParameterError("basis dimension smaller than requested eigenpair count");
  const int L = params.L, N = params.N;
  const Eigen::Index k = opt.count;

  std::vector<double> guess;
  if (!opt.initial_guess.empty()) {
    require_dim(basis, opt.initial_guess.size(), "lanczos_lowest(initial_guess)");
    guess.assign(opt.initial_guess.begin(), opt.initial_guess.end());
    rotate_spin_frame(basis, guess);
  }

  // Per-sector solves, then mirror images for n_plus < n_minus.
  int matvecs = 0;
  std::vector<detail::SectorPairs> solved;
  // Sectors with the lowest atomic-limit energy go first so the ceiling
  // tightens early; ties go to the smaller flavour imbalance.
  std::vector<FlavourSector> sectors;
  std::vector<std::pair<double, int>> order;
  for (int np = (N + 1) / 2; np <= std::min(N, L); ++np) {
    sectors.emplace_back(L, np, N - np);
    order.emplace_back(SectorHamiltonian(params, sectors.back()).min_diagonal(), 2 * np - N);
  }
  std::vector<std::size_t> sequence(sectors.size());
  std::iota(sequence.begin(), sequence.end(), std::size_t{0});
  std::stable_sort(sequence.begin(), sequence.end(), [&](std::size_t a, std::size_t b) { return order[a] < order[b]; });
  std::vector<double> found;
  for (std::size_t si : sequence) {
    const FlavourSector& sec = sectors[si];
    const int copies = 2 * sec.n_plus() != N ? 2 : 1;
    double ceiling = INFINITY;
    if (found.size() >= static_cast<std::size_t>(k)) {
      std::nth_element(found.begin(), found.begin() + (k - 1), found.end());
      ceiling = found[static_cast<std::size_t>(k - 1)];
    }
    std::vector<double> local;
    if (!guess.empty()) {
      // Warm start from the guess's component in this sector, if it has one.
      local.resize(sec.dim());
      double weight = 0.0;
      for (std::size_t i = 0; i < sec.dim(); ++i) {
        local[i] = guess[basis.index(sec.mask(i))];
        weight += local[i] * local[i];
      }
      if (weight < 1e-6) local.clear();
    }
    // A mirrored sector supplies each value twice.
    const Eigen::Index wanted = (k + copies - 1) / copies;
    solved.push_back(detail::solve_sector(params, sec, wanted, opt, local, ceiling, matvecs));
    for (Eigen::Index c = 0; c < solved.back().values.size(); ++c)
      for (int r = 0; r < copies; ++r) found.push_back(solved.back().values(c));
    if (copies == 2) {
      detail::SectorPairs mirror = solved.back();
      mirror.mirrored = true;
      solved.push_back(std::move(mirror));
    }
  }

  struct Pick {
    double value;
    int n_plus;
    std::size_t entry;
    Eigen::Index column;
  };
  std::vector<Pick> picks;
  for (std::size_t e = 0; e < solved.size(); ++e) {
    const int np = solved[e].mirrored ? N - solved[e].n_plus : solved[e].n_plus;
    for (Eigen::Index c = 0; c < solved[e].values.size(); ++c) picks.push_back({solved[e].values(c), np, e, c});
  }
  std::stable_sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) {
    return a.value != b.value ? a.value < b.value : a.n_plus > b.n_plus;
  });
  picks.resize(static_cast<std::size_t>(k));

  GroundStateSolution sol;
  sol.iterations = matvecs;
  Hamiltonian h(params, basis);
  for (const Pick& pk : picks) {
    const detail::SectorPairs& sp = solved[pk.entry];
    const FlavourSector& sec = sectors[static_cast<std::size_t>(std::distance(
        sectors.begin(), std::find_if(sectors.begin(), sectors.end(),
                                      [&](const FlavourSector& s) { return s.n_plus() == sp.n_plus; })))];
    Wavefunction x(basis.dim(), 0.0);
    for (std::size_t i = 0; i < sec.dim(); ++i) {
      const double a = sp.vectors(static_cast<Eigen::Index>(i), pk.column);
      const Mask mk = sec.mask(i);
      if (!sp.mirrored) {
        x[basis.index(mk)] = a;
      } else {
        // Swap flavours on every site; each doubly occupied site contributes -1.
        const Mask even = mk & Mask{0x55555555u};
        const Mask odd = mk & Mask{0xAAAAAAAAu};
        const int doublons = std::popcount((even << 1) & odd);
        x[basis.index((even << 1) | (odd >> 1))] = doublons % 2 ? -a : a;
      }
    }
    rotate_spin_frame(basis, x);
    const std::vector<double> hx = h.apply(x);
    double r = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r += (hx[i] - pk.value * x[i]) * (hx[i] - pk.value * x[i]);
    sol.eigenvalues.push_back(pk.value);
    sol.residual_norms.push_back(std::sqrt(r));
    sol.eigenvectors.push_back(std::move(x));
  }
  sol.iterations += static_cast<int>(k);
  sol.gap = k > 1 ? sol.eigenvalues[1] - sol.eigenvalues[0] : 0.0;
  sol.degenerate = k > 1 && sol.gap < 1e-10 * std::max(1.0, std::abs(sol.eigenvalues[0]));
  return sol;
}

/// Dense H assembled column by column from the matrix-free operator.
inline Eigen::MatrixXd dense_hamiltonian(const ModelParams& params, const FockBasis& basis,
                                         std::size_t max_dim = 5000) {
  if (basis.dim() > max_dim)
    throw CapacityError("dense diagonalization limited to dimension " + std::to_string(max_dim) + ", got " +
                        std::to_string(basis.dim()));
  Hamiltonian h(params, basis);
  const auto n = static_cast<Eigen::Index>(basis.dim());
  Eigen::MatrixXd m(n, n);
  std::vector<double> e(basis.dim(), 0.0);
  for (Eigen::Index c = 0; c < n; ++c) {
    e[c] = 1.0;
    h.apply(e, std::span<double>(m.col(c).data(), basis.dim()));
    e[c] = 0.0;
  }
  return m;
}

/// Full ascending spectrum by dense diagonalization (verification oracle).
inline std::vector<double> dense_spectrum_oracle(const ModelParams& params, const FockBasis& basis) {
  validate(params);
  const Eigen::MatrixXd m = dense_hamiltonian(params, basis);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

}  // namespace cavmag
