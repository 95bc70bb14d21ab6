#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cavmag/lanczos.hpp"
#include "dense_oracle.hpp"

using namespace cavmag;

namespace {

std::vector<double> reference_spectrum(const ModelParams& p) {
  const test::Sector s(p.L, p.N);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(test::hamiltonian_matrix(s, p.t, p.U_s, p.U_l),
                                                    Eigen::EigenvaluesOnly);
  return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

}  // namespace

TEST(Lanczos, TwoSiteHubbardGroundEnergy) {
  const ModelParams p{2, 2, 1.0, 4.0, 0.0};
  const auto sol = lanczos_lowest(p, build_basis(2, 2));
  EXPECT_NEAR(sol.ground_energy(), 1.0 - std::sqrt(5.0), 1e-10);
}

TEST(Lanczos, AtomicLimitResolvesSixteenFoldDegeneracy) {
  const ModelParams p{4, 4, 0.0, 1.0, 0.0};
  LanczosOptions opt;
  opt.count = 17;
  const auto sol = lanczos_lowest(p, build_basis(4, 4), opt);
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(sol.eigenvalues[i], 0.0, 1e-10);
  EXPECT_NEAR(sol.eigenvalues[16], 0.5, 1e-10);
  EXPECT_TRUE(sol.degenerate);
}

TEST(Lanczos, MatchesDenseOracleOnRandomDraws) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int draw = 0; draw < 20; ++draw) {
    const int L = draw % 2 == 0 ? 2 : 4;
    const ModelParams p{L, L, u(rng), u(rng), u(rng)};
    const FockBasis b(L, L);
    const auto sol = lanczos_lowest(p, b);
    const auto dense = dense_spectrum_oracle(p, b);
    const auto ref = reference_spectrum(p);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(sol.eigenvalues[i], dense[i], 1e-9) << "draw " << draw;
      EXPECT_NEAR(dense[i], ref[i], 1e-10) << "draw " << draw;
    }
  }
}

TEST(Lanczos, ResidualsAndOrthogonality) {
  const ModelParams p{6, 6, 0.1, 1.0, 20.0};
  const FockBasis b(6, 6);
  const auto sol = lanczos_lowest(p, b);
  Hamiltonian h(p, b);
  // Residuals are bounded relative to the operator scale.
  const auto spectrum = dense_spectrum_oracle(p, b);
  const double scale = std::max({1.0, std::abs(spectrum.front()), std::abs(spectrum.back())});
  for (int i = 0; i < 3; ++i) {
    const auto hv = h.apply(sol.eigenvectors[i]);
    double r = 0.0, nrm = 0.0;
    for (std::size_t x = 0; x < b.dim(); ++x) {
      r += std::pow(hv[x] - sol.eigenvalues[i] * sol.eigenvectors[i][x], 2);
      nrm += sol.eigenvectors[i][x] * sol.eigenvectors[i][x];
    }
    EXPECT_LE(std::sqrt(r), 1e-10 * scale);
    EXPECT_NEAR(sol.residual_norms[i], std::sqrt(r), 1e-14 * scale);
    EXPECT_NEAR(sol.eigenvalues[i], spectrum[i], 1e-9);
    EXPECT_NEAR(std::sqrt(nrm), 1.0, 1e-12);
    for (int j = 0; j < i; ++j) {
      double d = 0.0;
      for (std::size_t x = 0; x < b.dim(); ++x) d += sol.eigenvectors[i][x] * sol.eigenvectors[j][x];
      EXPECT_LE(std::abs(d), 1e-9);
    }
  }
  EXPECT_TRUE(std::is_sorted(sol.eigenvalues.begin(), sol.eigenvalues.end()));
}

TEST(Lanczos, EigenvaluesIndependentOfSeed) {
  const ModelParams p{6, 6, 0.3, 1.0, -5.0};
  const FockBasis b(6, 6);
  LanczosOptions a, c;
  a.seed = 1;
  c.seed = 987654321;
  const auto s1 = lanczos_lowest(p, b, a);
  const auto s2 = lanczos_lowest(p, b, c);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s1.eigenvalues[i], s2.eigenvalues[i], 1e-9);
}

TEST(Lanczos, DeterministicForFixedSeed) {
  const ModelParams p{6, 6, 0.1, 1.0, 7.0};
  const FockBasis b(6, 6);
  const auto s1 = lanczos_lowest(p, b);
  const auto s2 = lanczos_lowest(p, b);
  EXPECT_EQ(s1.eigenvalues, s2.eigenvalues);
  EXPECT_EQ(s1.eigenvectors[0], s2.eigenvectors[0]);
}

TEST(Lanczos, ZeroLongRangeEqualsPlainHubbard) {
  const ModelParams p{4, 4, 0.1, 1.0, 0.0};
  const auto sol = lanczos_lowest(p, build_basis(4, 4));
  EXPECT_NEAR(sol.ground_energy(), reference_spectrum(p)[0], 1e-10);
}

TEST(Lanczos, WarmStartConverges) {
  const ModelParams p{8, 8, 0.1, 1.0, 3.0};
  const FockBasis b(8, 8);
  const auto cold = lanczos_lowest(p, b);
  ModelParams q = p;
  q.U_l = 3.01;
  LanczosOptions opt;
  opt.initial_guess = cold.ground_state();
  const auto warm = lanczos_lowest(q, b, opt);
  const auto ref = lanczos_lowest(q, b);
  EXPECT_NEAR(warm.ground_energy(), ref.ground_energy(), 1e-9);
}

TEST(Lanczos, NonConvergenceIsReported) {
  const ModelParams p{8, 8, 0.1, 1.0, 3.0};
  LanczosOptions opt;
  opt.max_iterations = 5;
  opt.krylov_dim = 4;
  EXPECT_THROW(lanczos_lowest(p, build_basis(8, 8), opt), ConvergenceError);
}

TEST(DenseOracle, AtomicLimit) {
  const auto ev = dense_spectrum_oracle(ModelParams{2, 2, 0.0, 1.0, 0.0}, build_basis(2, 2));
  const std::vector<double> expect{0, 0, 0, 0, 0.5, 0.5};
  ASSERT_EQ(ev.size(), expect.size());
  for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], expect[i], 1e-14);
}

TEST(DenseOracle, ParticleHoleSymmetricSpectrum) {
  const auto ev = dense_spectrum_oracle(ModelParams{2, 2, 1.0, 0.0, 0.0}, build_basis(2, 2));
  for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], -ev[ev.size() - 1 - i], 1e-12);
}

TEST(DenseOracle, TraceIdentity) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const FockBasis b(4, 4);
  for (int trial = 0; trial < 5; ++trial) {
    const ModelParams p{4, 4, u(rng), u(rng), u(rng)};
    const auto ev = dense_spectrum_oracle(p, b);
    const auto d = diagonal_energies(p, b);
    EXPECT_NEAR(std::accumulate(ev.begin(), ev.end(), 0.0), std::accumulate(d.begin(), d.end(), 0.0), 1e-9);
  }
}

TEST(DenseOracle, RejectsLargeDimension) {
  EXPECT_THROW(dense_spectrum_oracle(ModelParams{8, 8, 1.0, 1.0, 0.0}, build_basis(8, 8)), CapacityError);
}
