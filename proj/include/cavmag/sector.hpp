#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cavmag/basis.hpp"
#include "cavmag/errors.hpp"
#include "cavmag/params.hpp"

// In the frame produced by rotate_spin_frame the fermions carry a flavour
// + or - (spin along +x or -x).  Hopping conserves flavour and the remaining
// terms are diagonal, so H splits into blocks of fixed (n_plus, n_minus).
// A block state is a pair of L-bit patterns; block index = rank(plus) *
// count(minus) + rank(minus), both ranks in increasing integer order.

namespace cavmag {

namespace detail {

/// Interleave an L-bit pattern onto the even modes of a 2L-bit mask.
inline Mask spread_even(std::uint32_t bits) {
  Mask out = 0;
  for (int j = 0; bits != 0; ++j, bits >>= 1)
    if (bits & 1u) out |= Mask{1} << (2 * j);
  return out;
}

}  // namespace detail

class FlavourSector {
 public:
  FlavourSector(int sites, int n_plus, int n_minus)
      : sites_(sites), n_plus_(n_plus), n_minus_(n_minus), rank_(std::size_t{1} << sites, -1),
        spread_(std::size_t{1} << sites) {
    if (sites < 1 || sites > kMaxSites) throw ParameterError("sector: site count out of range");
    if (n_plus < 0 || n_plus > sites || n_minus < 0 || n_minus > sites)
      throw ParameterError("sector: flavour occupation out of range");
    std::vector<int> seen(sites + 1, 0);
    for (std::uint32_t b = 0; b < (1u << sites); ++b) {
      const int c = std::popcount(b);
      rank_[b] = seen[c]++;
      spread_[b] = detail::spread_even(b);
      if (c == n_plus) plus_.push_back(static_cast<std::uint16_t>(b));
      if (c == n_minus) minus_.push_back(static_cast<std::uint16_t>(b));
    }
  }

  int sites() const noexcept { return sites_; }
  int n_plus() const noexcept { return n_plus_; }
  int n_minus() const noexcept { return n_minus_; }
  std::size_t dim() const noexcept { return plus_.size() * minus_.size(); }
  std::size_t plus_count() const noexcept { return plus_.size(); }
  std::size_t minus_count() const noexcept { return minus_.size(); }
  std::span<const std::uint16_t> plus_patterns() const noexcept { return plus_; }
  std::span<const std::uint16_t> minus_patterns() const noexcept { return minus_; }

  /// Rank of an L-bit pattern among patterns of the same popcount.
  std::size_t rank(std::uint32_t bits) const { return static_cast<std::size_t>(rank_[bits]); }

  /// Full 2L-mode occupation mask of block state i (rotated-frame mode numbering).
  Mask mask(std::size_t i) const {
    const std::size_t m = minus_.size();
    return spread_[plus_[i / m]] | (spread_[minus_[i % m]] << 1);
  }

 private:
  int sites_, n_plus_, n_minus_;
  std::vector<std::int32_t> rank_;
  std::vector<Mask> spread_;
  std::vector<std::uint16_t> plus_, minus_;
};

/// H restricted to one flavour sector of the rotated frame.
class SectorHamiltonian {
 public:
  SectorHamiltonian(const ModelParams& params, const FlavourSector& sector)
      : t_(params.t), sector_(&sector), diag_(sector.dim()) {
    if (sector.sites() != params.L || sector.n_plus() + sector.n_minus() != params.N)
      throw ParameterError("sector does not match model parameters");
    const double g = params.long_range_coefficient();
    // Stagger +1 on even sites: B = sum_j s_j (n_{j+} - n_{j-}).
    std::uint32_t even = 0;
    for (int j = 0; j < sector.sites(); j += 2) even |= 1u << j;
    const std::size_t m = sector.minus_count();
    for (std::size_t ip = 0; ip < sector.plus_count(); ++ip) {
      const std::uint32_t p = sector.plus_patterns()[ip];
      const int bp = std::popcount(p & even) - std::popcount(p & ~even);
      for (std::size_t im = 0; im < m; ++im) {
        const std::uint32_t q = sector.minus_patterns()[im];
        const int b = bp - (std::popcount(q & even) - std::popcount(q & ~even));
        diag_[ip * m + im] = 0.5 * params.U_s * std::popcount(p & q) + g * b * b;
      }
    }
  }

  std::size_t dim() const noexcept { return sector_->dim(); }

  /// Lowest diagonal element: the sector's ground energy at t = 0.
  double min_diagonal() const { return diag_.empty() ? 0.0 : *std::min_element(diag_.begin(), diag_.end()); }

  void apply(std::span<const double> in, std::span<double> out) const {
    const FlavourSector& s = *sector_;
    if (in.size() != s.dim() || out.size() != s.dim()) throw DimensionError("SectorHamiltonian::apply: size mismatch");
    const auto plus = s.plus_patterns();
    const auto minus = s.minus_patterns();
    const auto np = static_cast<std::ptrdiff_t>(plus.size());
    const std::size_t m = minus.size();
    const int L = s.sites();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ip = 0; ip < np; ++ip) {
      const std::uint32_t p = plus[ip];
      for (std::size_t im = 0; im < m; ++im) {
        const std::uint32_t q = minus[im];
        double hop = 0.0;
        if (t_ != 0.0) {
          for (int j = 0; j + 1 < L; ++j) {
            const std::uint32_t pair = 3u << j;
            // A + fermion hopping j <-> j+1 passes the - mode of site j.
            if (std::popcount(p & pair) == 1)
              hop += ((q >> j) & 1u ? -1.0 : 1.0) * in[s.rank(p ^ pair) * m + im];
            // A - fermion hopping j <-> j+1 passes the + mode of site j+1.
            if (std::popcount(q & pair) == 1)
              hop += ((p >> (j + 1)) & 1u ? -1.0 : 1.0) * in[static_cast<std::size_t>(ip) * m + s.rank(q ^ pair)];
          }
        }
        const std::size_t i = static_cast<std::size_t>(ip) * m + im;
        out[i] = diag_[i] * in[i] - t_ * hop;
      }
    }
  }

 private:
  double t_;
  const FlavourSector* sector_;
  std::vector<double> diag_;
};

}  // namespace cavmag
