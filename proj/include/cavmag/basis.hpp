#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cavmag/errors.hpp"
#include "cavmag/params.hpp"

namespace cavmag {

using Mask = std::uint32_t;

inline constexpr std::uint64_t kDefaultMaxDimension = 10'000'000;

inline constexpr std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

/// Site-major mode numbering: site j (0-based) spin up is 2j, spin down is 2j+1.
inline constexpr int mode_index(int site, int spin) { return 2 * site + spin; }

/// Occupation-number basis of 2L fermionic modes at fixed particle number.
///
/// States are stored in increasing integer order. For a fixed popcount that is
/// colexicographic order, so the ordinal of a mask is its combinatorial rank
/// sum_i C(p_i, i+1) over the set-bit positions p_0 < p_1 < ... .  The rank is
/// evaluated with one table lookup per byte of the mask.
class FockBasis {
 public:
  FockBasis(int L, int N, std::uint64_t max_dimension = kDefaultMaxDimension) : L_(L), N_(N) {
    if (L < 1 || L > kMaxSites) throw ParameterError("basis needs 1 <= L <= " + std::to_string(kMaxSites));
    if (N < 0 || N > 2 * L) throw ParameterError("basis needs 0 <= N <= 2L");
    const std::uint64_t dim = binomial(2 * L, N);
    if (dim > max_dimension)
      throw CapacityError("basis dimension C(" + std::to_string(2 * L) + "," + std::to_string(N) +
                          ") = " + std::to_string(dim) + " exceeds limit " + std::to_string(max_dimension));
    build_rank_table();
    states_.reserve(dim);
    const int modes = 2 * L;
    if (N == 0) {
      states_.push_back(0);
    } else {
      // Gosper's hack: next larger integer with the same popcount.
      std::uint64_t x = (std::uint64_t{1} << N) - 1;
      const std::uint64_t end = std::uint64_t{1} << modes;
      while (x < end) {
        states_.push_back(static_cast<Mask>(x));
        const std::uint64_t c = x & (~x + 1);
        const std::uint64_t r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
      }
    }
  }

  int sites() const noexcept { return L_; }
  int particles() const noexcept { return N_; }
  int modes() const noexcept { return 2 * L_; }
  std::size_t dim() const noexcept { return states_.size(); }
  std::span<const Mask> states() const noexcept { return states_; }
  Mask state(std::size_t i) const noexcept { return states_[i]; }

  /// Ordinal of `mask`; the mask must have popcount N and fit in 2L bits.
  std::size_t index(Mask mask) const noexcept {
    std::uint64_t r = 0;
    int before = 0;
    for (int chunk = 0; chunk < kChunks && mask != 0; ++chunk) {
      const unsigned byte = mask & 0xFFu;
      r += rank_table_[(chunk * (kMaxModes + 1) + before) * 256 + byte];
      before += std::popcount(byte);
      mask >>= 8;
    }
    return static_cast<std::size_t>(r);
  }

  bool contains(Mask mask) const noexcept {
    if (std::popcount(mask) != N_) return false;
    if (modes() < 32 && (mask >> modes()) != 0) return false;
    return true;
  }

 private:
  static constexpr int kChunks = 4;
  static constexpr int kMaxModes = 2 * kMaxSites;

  void build_rank_table() {
    rank_table_.assign(static_cast<std::size_t>(kChunks) * (kMaxModes + 1) * 256, 0);
    for (int chunk = 0; chunk < kChunks; ++chunk)
      for (int before = 0; before <= kMaxModes; ++before)
        for (unsigned byte = 0; byte < 256; ++byte) {
          std::uint64_t r = 0;
          int k = before;
          for (int b = 0; b < 8; ++b)
            if (byte & (1u << b)) {
              ++k;
              r += binomial(8 * chunk + b, k);
            }
          rank_table_[(chunk * (kMaxModes + 1) + before) * 256 + byte] = r;
        }
  }

  int L_;
  int N_;
  std::vector<Mask> states_;
  std::vector<std::uint64_t> rank_table_;
};

inline FockBasis build_basis(int L, int N, std::uint64_t max_dimension = kDefaultMaxDimension) {
  return FockBasis(L, N, max_dimension);
}

/// Real amplitudes over a FockBasis.
using Wavefunction = std::vector<double>;

inline void require_dim(const FockBasis& basis, std::size_t n, const char* what) {
  if (n != basis.dim())
    throw DimensionError(std::string(what) + ": vector length " + std::to_string(n) + " != basis dimension " +
                         std::to_string(basis.dim()));
}

}  // namespace cavmag
