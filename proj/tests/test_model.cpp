#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "cavmag/basis.hpp"
#include "cavmag/operators.hpp"
#include "cavmag/sector.hpp"
#include "dense_oracle.hpp"

using namespace cavmag;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Mask occupation(std::initializer_list<std::pair<int, int>> site_spin) {
  Mask m = 0;
  for (auto [site, spin] : site_spin) m |= Mask{1} << mode_index(site, spin);
  return m;
}

// |up, dn, up, dn, ...>
Mask neel_mask(int L) {
  Mask m = 0;
  for (int j = 0; j < L; ++j) m |= Mask{1} << mode_index(j, j % 2);
  return m;
}

}  // namespace

TEST(FockBasis, DimensionsAreBinomial) {
  EXPECT_EQ(build_basis(2, 2).dim(), 6u);
  EXPECT_EQ(build_basis(4, 4).dim(), 70u);
  EXPECT_EQ(build_basis(10, 10).dim(), 184756u);
  EXPECT_EQ(build_basis(4, 0).dim(), 1u);
  EXPECT_EQ(build_basis(4, 8).dim(), 1u);
}

TEST(FockBasis, StatesIncreaseAndIndexInverts) {
  for (int L : {2, 4, 6}) {
    for (int N = 0; N <= 2 * L; ++N) {
      const FockBasis b(L, N);
      ASSERT_EQ(b.dim(), binomial(2 * L, N));
      for (std::size_t i = 0; i < b.dim(); ++i) {
        if (i > 0) ASSERT_LT(b.state(i - 1), b.state(i));
        ASSERT_EQ(std::popcount(b.state(i)), N);
        ASSERT_EQ(b.index(b.state(i)), i);
      }
    }
  }
}

TEST(FockBasis, CapacityLimitIsAnError) {
  EXPECT_THROW(build_basis(10, 10, 1000), CapacityError);
  EXPECT_THROW(build_basis(15, 15), ParameterError);
  EXPECT_THROW(build_basis(4, 9), ParameterError);
}

TEST(StaggeredFlip, SingleParticleSameSiteFlip) {
  const FockBasis b(2, 1);
  std::vector<double> v(b.dim(), 0.0);
  v[b.index(occupation({{0, 0}}))] = 1.0;
  const auto w = apply_staggered_spinflip(b, v);
  std::vector<double> expect(b.dim(), 0.0);
  expect[b.index(occupation({{0, 1}}))] = 1.0;
  for (std::size_t i = 0; i < b.dim(); ++i) EXPECT_EQ(w[i], expect[i]);
}

TEST(StaggeredFlip, NeelStateNormMatchesDenseOracle) {
  const FockBasis b(4, 4);
  const test::Sector s(4, 4);
  std::vector<double> v(b.dim(), 0.0);
  v[b.index(neel_mask(4))] = 1.0;
  const auto w = apply_staggered_spinflip(b, v);
  const double n2 = dot(w, w);

  Eigen::VectorXd ev = Eigen::VectorXd::Zero(s.dim());
  ev(s.index.at(neel_mask(4))) = 1.0;
  const double oracle = (test::staggered_flip_matrix(s) * ev).squaredNorm();
  EXPECT_DOUBLE_EQ(oracle, 4.0);
  EXPECT_NEAR(n2, oracle, 1e-12);
}

TEST(StaggeredFlip, HermitianAndSquareIdentity) {
  std::mt19937_64 rng(7);
  const FockBasis b(6, 6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = random_vector(b.dim(), rng);
    auto v = random_vector(b.dim(), rng);
    const double nv = norm(v);
    for (auto& x : v) x /= nv;
    const auto bu = apply_staggered_spinflip(b, u);
    const auto bv = apply_staggered_spinflip(b, v);
    EXPECT_NEAR(dot(u, bv), dot(bu, v), 1e-12 * norm(u) * norm(v));
    const auto bbv = apply_staggered_spinflip(b, bv);
    EXPECT_NEAR(dot(v, bbv), dot(bv, bv), 1e-12);
  }
}

TEST(StaggeredFlip, DimensionMismatchThrows) {
  const FockBasis b(2, 2);
  std::vector<double> v(5);
  EXPECT_THROW(apply_staggered_spinflip(b, v), DimensionError);
}

TEST(Hamiltonian, AtomicLimitSpectrum) {
  const ModelParams p{2, 2, 0.0, 1.0, 0.0};
  const FockBasis b(2, 2);
  const auto d = diagonal_energies(p, b);
  int zeros = 0, halves = 0;
  for (double e : d) {
    if (e == 0.0) ++zeros;
    if (e == 0.5) ++halves;
  }
  EXPECT_EQ(zeros, 4);
  EXPECT_EQ(halves, 2);
}

TEST(Hamiltonian, DiagonalEnergiesExamples) {
  const FockBasis b2(2, 2);
  const auto d = diagonal_energies(ModelParams{2, 2, 1.0, 2.0, 0.0}, b2);
  EXPECT_DOUBLE_EQ(d[b2.index(occupation({{0, 0}, {0, 1}}))], 1.0);

  const auto zero = diagonal_energies(ModelParams{4, 4, 0.0, 0.0, 0.0}, build_basis(4, 4));
  for (double e : zero) EXPECT_EQ(e, 0.0);

  // Neel diagonal of (U_l/L) B^2 against the dense oracle.
  const FockBasis b4(4, 4);
  const test::Sector s(4, 4);
  const auto d4 = diagonal_energies(ModelParams{4, 4, 0.0, 0.0, 1.0}, b4);
  const Eigen::MatrixXd bm = test::staggered_flip_matrix(s);
  const int k = s.index.at(neel_mask(4));
  EXPECT_NEAR(d4[b4.index(neel_mask(4))], (bm * bm)(k, k) / 4.0, 1e-12);
  EXPECT_NEAR(d4[b4.index(neel_mask(4))], 1.0, 1e-12);
}

TEST(Hamiltonian, DiagonalMatchesUnitVectorApplication) {
  const ModelParams p{4, 4, 0.3, 1.7, -2.1};
  const FockBasis b(4, 4);
  Hamiltonian h(p, b);
  const auto d = diagonal_energies(p, b);
  std::vector<double> e(b.dim(), 0.0), he(b.dim());
  for (std::size_t i = 0; i < b.dim(); ++i) {
    e[i] = 1.0;
    h.apply(e, he);
    EXPECT_NEAR(he[i], d[i], 1e-12);
    e[i] = 0.0;
  }
}

TEST(Hamiltonian, TwoSiteGroundEnergyFromDenseMatrix) {
  const ModelParams p{2, 2, 1.0, 4.0, 0.0};
  const FockBasis b(2, 2);
  Hamiltonian h(p, b);
  Eigen::MatrixXd m(b.dim(), b.dim());
  std::vector<double> e(b.dim(), 0.0), he(b.dim());
  for (std::size_t i = 0; i < b.dim(); ++i) {
    e[i] = 1.0;
    h.apply(e, he);
    for (std::size_t r = 0; r < b.dim(); ++r) m(r, i) = he[r];
    e[i] = 0.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double analytic = p.U_s / 4.0 - std::sqrt(p.U_s * p.U_s / 16.0 + 4.0 * p.t * p.t);
  EXPECT_NEAR(analytic, 1.0 - std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(es.eigenvalues()(0), analytic, 1e-12);
}

TEST(Hamiltonian, MatrixFreeAgreesWithJordanWignerReference) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int L : {2, 4}) {
    for (int N : {L - 1, L, L + 1}) {
      const FockBasis b(L, N);
      const test::Sector s(L, N);
      for (int trial = 0; trial < 3; ++trial) {
        const ModelParams p{L, N, u(rng), u(rng), u(rng)};
        const Eigen::MatrixXd ref = test::hamiltonian_matrix(s, p.t, p.U_s, p.U_l);
        Hamiltonian h(p, b);
        std::vector<double> e(b.dim(), 0.0), he(b.dim());
        for (std::size_t i = 0; i < b.dim(); ++i) {
          e[i] = 1.0;
          h.apply(e, he);
          e[i] = 0.0;
          for (std::size_t r = 0; r < b.dim(); ++r) ASSERT_NEAR(he[r], ref(r, i), 1e-12);
        }
      }
    }
  }
}

TEST(Hamiltonian, HermitianForRandomPairsAllSigns) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const FockBasis b(6, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const ModelParams p{6, 6, u(rng), u(rng), u(rng)};
    Hamiltonian h(p, b);
    const auto x = random_vector(b.dim(), rng);
    const auto y = random_vector(b.dim(), rng);
    const auto hx = h.apply(x);
    const auto hy = h.apply(y);
    EXPECT_NEAR(dot(x, hy), dot(hx, y), 1e-12 * norm(x) * norm(y)) << "trial " << trial;
  }
}

TEST(Hamiltonian, BCommutesWithTotalSpinX) {
  std::mt19937_64 rng(5);
  const FockBasis b(4, 4);
  const auto v = random_vector(b.dim(), rng);
  auto sx = [&](std::span<const double> in) {
    std::vector<double> out(b.dim(), 0.0), tmp(b.dim());
    for (int j = 0; j < 4; ++j) {
      apply_site_spin(b, Axis::x, j, in, tmp);
      for (std::size_t i = 0; i < b.dim(); ++i) out[i] += tmp[i];
    }
    return out;
  };
  const auto a = apply_staggered_spinflip(b, sx(v));
  const auto c = sx(apply_staggered_spinflip(b, v));
  double diff = 0.0;
  for (std::size_t i = 0; i < b.dim(); ++i) diff += (a[i] - c[i]) * (a[i] - c[i]);
  EXPECT_LE(std::sqrt(diff), 1e-12);
}

TEST(Hamiltonian, Z2SignSymmetry) {
  // c_dn -> -c_dn is diagonal: (-1)^(number of down fermions).
  std::mt19937_64 rng(9);
  const FockBasis b(6, 6);
  const ModelParams p{6, 6, 0.4, 1.0, 3.0};
  Hamiltonian h(p, b);
  std::vector<double> z(b.dim());
  const Mask down_modes = 0xAAAAAAAAu;
  for (std::size_t i = 0; i < b.dim(); ++i) z[i] = (std::popcount(b.state(i) & down_modes) % 2) ? -1.0 : 1.0;
  const auto v = random_vector(b.dim(), rng);
  std::vector<double> zv(b.dim());
  for (std::size_t i = 0; i < b.dim(); ++i) zv[i] = z[i] * v[i];
  const auto hzv = h.apply(zv);
  const auto hv = h.apply(v);
  for (std::size_t i = 0; i < b.dim(); ++i) EXPECT_NEAR(hzv[i], z[i] * hv[i], 1e-12);

  // and B anticommutes with it
  const auto bzv = apply_staggered_spinflip(b, zv);
  const auto bv = apply_staggered_spinflip(b, v);
  for (std::size_t i = 0; i < b.dim(); ++i) EXPECT_NEAR(bzv[i], -z[i] * bv[i], 1e-12);
}

TEST(Hamiltonian, SiteSpinOperatorsMatchOracle) {
  const FockBasis b(4, 4);
  const test::Sector s(4, 4);
  std::mt19937_64 rng(13);
  const auto v = random_vector(b.dim(), rng);
  const Eigen::Map<const Eigen::VectorXd> ev(v.data(), v.size());
  std::vector<double> out(b.dim());
  for (int j = 0; j < 4; ++j) {
    const std::pair<Axis, Eigen::MatrixXd> cases[] = {{Axis::x, test::spin_x_matrix(s, j)},
                                                       {Axis::y, test::i_spin_y_matrix(s, j)},
                                                       {Axis::z, test::spin_z_matrix(s, j)}};
    for (const auto& [axis, m] : cases) {
      apply_site_spin(b, axis, j, v, out);
      const Eigen::VectorXd ref = m * ev;
      for (std::size_t i = 0; i < b.dim(); ++i) ASSERT_NEAR(out[i], ref(i), 1e-12);
    }
  }
}

TEST(RotatedFrame, IsAnInvolution) {
  const FockBasis b(4, 4);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::vector<double> v(b.dim());
  for (auto& x : v) x = g(rng);
  auto w = v;
  rotate_spin_frame(b, w);
  double n0 = 0.0, n1 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) n0 += v[i] * v[i], n1 += w[i] * w[i];
  EXPECT_NEAR(n0, n1, 1e-12 * n0);
  rotate_spin_frame(b, w);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(w[i], v[i], 1e-13);
}

TEST(RotatedFrame, ConjugatesHamiltonian) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  for (int n : {3, 4, 5}) {
    const ModelParams p{4, n, 0.7, 2.3, -1.9};
    const FockBasis b(4, n);
    std::vector<double> v(b.dim());
    for (auto& x : v) x = g(rng);
    Hamiltonian h(p, b);
    auto expect = h.apply(v);
    rotate_spin_frame(b, expect);
    auto rv = v;
    rotate_spin_frame(b, rv);
    std::vector<double> got(b.dim());
    RotatedHamiltonian(p, b).apply(rv, got);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
  }
}

TEST(FlavourSectors, PartitionTheBasisAndMatchRotatedOperator) {
  const ModelParams p{4, 5, 0.8, 1.7, 2.9};
  const FockBasis b(4, 5);
  const RotatedHamiltonian rh(p, b);
  std::size_t total = 0;
  std::vector<int> owner(b.dim(), -1);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int np = 1; np <= 4; ++np) {
    const FlavourSector sec(4, np, 5 - np);
    total += sec.dim();
    std::vector<double> local(sec.dim()), full(b.dim(), 0.0);
    for (std::size_t i = 0; i < sec.dim(); ++i) {
      const std::size_t at = b.index(sec.mask(i));
      EXPECT_EQ(owner[at], -1);
      owner[at] = np;
      local[i] = g(rng);
      full[at] = local[i];
    }
    std::vector<double> hl(sec.dim()), hf(b.dim());
    SectorHamiltonian(p, sec).apply(local, hl);
    rh.apply(full, hf);
    for (std::size_t i = 0; i < sec.dim(); ++i) EXPECT_NEAR(hl[i], hf[b.index(sec.mask(i))], 1e-12);
    // The image never leaves the sector.
    double outside = 0.0;
    for (std::size_t x = 0; x < b.dim(); ++x) {
      const Mask m = b.state(x);
      if (std::popcount(m & 0x55555555u) != np) outside += hf[x] * hf[x];
    }
    EXPECT_EQ(outside, 0.0);
  }
  EXPECT_EQ(total, b.dim());
}
