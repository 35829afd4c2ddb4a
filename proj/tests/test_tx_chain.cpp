#include <gtest/gtest.h>

#include <random>

#include "dfts_otfs/tx_chain.hpp"
#include "oracles.hpp"

using namespace dfts_otfs;

namespace {

double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

UserFrame random_frame(Scheme s, int q, const GridConfig& g, std::uint64_t seed, int order = 16) {
  std::mt19937_64 rng(seed);
  return draw_user_frame(AllocationPlan(s, q, g), QamConstellation(order), rng);
}

}  // namespace

TEST(DftSpread, OnePointIsIdentity) {
  std::mt19937_64 rng(1);
  const CMatrix x = oracle::random_matrix(5, 1, rng);
  EXPECT_LT(max_abs(dft_spread(x) - x), 1e-15);
}

TEST(DftSpread, ConstantRowConcentratesInBinZero) {
  const Complex c(0.3, -0.7);
  const CMatrix x = CMatrix::Constant(2, 8, c);
  const CMatrix y = dft_spread(x);
  for (int m = 0; m < 2; ++m) {
    EXPECT_LT(std::abs(y(m, 0) - std::sqrt(8.0) * c), 1e-14);
    for (int k = 1; k < 8; ++k) EXPECT_LT(std::abs(y(m, k)), 1e-14);
  }
}

TEST(DftSpread, MatchesDirectSum) {
  std::mt19937_64 rng(2);
  const CMatrix x = oracle::random_matrix(2, 4, rng);
  EXPECT_LT(max_abs(dft_spread(x) - oracle::naive_dft_rows(x, -1)), 1e-12);
  const CMatrix z = oracle::random_matrix(3, 12, rng);  // non power of two
  EXPECT_LT(max_abs(dft_spread(z) - oracle::naive_dft_rows(z, -1)), 1e-12);
  EXPECT_LT(max_abs(dft_despread(dft_spread(z)) - z), 1e-12);
}

TEST(DftSpread, RejectsWrongShape) {
  GridConfig g(4, 8, 2);
  auto f = random_frame(Scheme::interleaved, 0, g, 3);
  f.symbols = CMatrix::Zero(4, 3);
  EXPECT_THROW(dft_spread(f), ShapeError);
}

TEST(MapDodma, FullOccupancyWhenSingleUser) {
  std::mt19937_64 rng(4);
  GridConfig g(3, 4, 1);
  const CMatrix x = oracle::random_matrix(3, 4, rng);
  for (auto s : {Scheme::interleaved, Scheme::block}) {
    EXPECT_LT(max_abs(map_dodma(x, AllocationPlan(s, 0, g)) - x), 0.0 + 1e-300);
  }
}

TEST(MapDodma, FigureLayouts) {
  GridConfig g(2, 4, 2);
  const CMatrix x = CMatrix::Constant(2, 2, Complex(1, 0));
  const CMatrix a = map_dodma(x, AllocationPlan(Scheme::interleaved, 0, g));
  const CMatrix b = map_dodma(x, AllocationPlan(Scheme::block, 1, g));
  for (int n = 0; n < 4; ++n) {
    EXPECT_EQ(a.col(n).norm() > 0, n == 0 || n == 2) << n;
    EXPECT_EQ(b.col(n).norm() > 0, n == 2 || n == 3) << n;
  }
  EXPECT_LT(max_abs(extract_dodma(a, AllocationPlan(Scheme::interleaved, 0, g)) - x), 1e-300);
}

TEST(IdftDoppler, ZeroAndSingleTone) {
  GridConfig g(3, 8, 1);
  EXPECT_EQ(max_abs(idft_doppler(CMatrix::Zero(3, 8), g).samples), 0.0);
  CMatrix in = CMatrix::Zero(3, 8);
  in(0, 3) = 1.0;
  const auto out = idft_doppler(in, g).samples;
  for (int l = 0; l < 8; ++l) {
    const Complex expect = std::polar(1.0 / std::sqrt(8.0), 2.0 * kPi * 3 * l / 8.0);
    EXPECT_LT(std::abs(out(0, l) - expect), 1e-14);
    EXPECT_NEAR(std::abs(out(0, l)), 1.0 / std::sqrt(8.0), 1e-14);
  }
  EXPECT_LT(max_abs(out.bottomRows(2)), 1e-300);
}

TEST(IdftDoppler, MatchesDirectSumAndInverts) {
  std::mt19937_64 rng(5);
  GridConfig g(2, 4, 1);
  const CMatrix x = oracle::random_matrix(2, 4, rng);
  const CMatrix y = idft_doppler(x, g).samples;
  EXPECT_LT(max_abs(y - oracle::naive_dft_rows(x, +1)), 1e-12);
  EXPECT_LT(max_abs(dft_doppler(y) - x), 1e-12);
  EXPECT_THROW(idft_doppler(CMatrix::Zero(2, 3), g), ShapeError);
}

TEST(Serialize, ColumnMajorWithCyclicPrefix) {
  std::mt19937_64 rng(6);
  GridConfig g(2, 2, 1);
  DelayTimeFrame f{oracle::random_matrix(2, 2, rng), g};
  const auto s0 = serialize_with_cp(f, 0);
  ASSERT_EQ(s0.samples.size(), 4u);
  for (int m = 0; m < 2; ++m)
    for (int l = 0; l < 2; ++l) EXPECT_EQ(s0.samples[m + 2 * l], f.samples(m, l));
  const auto s1 = serialize_with_cp(f, 1);
  ASSERT_EQ(s1.samples.size(), 5u);
  EXPECT_EQ(s1.samples[0], s1.samples[4]);
  EXPECT_THROW(serialize_with_cp(f, -1), DomainError);
  EXPECT_THROW(serialize_with_cp(f, 5), DomainError);
  EXPECT_NO_THROW(serialize_with_cp(f, 4));
}

TEST(Serialize, RoundTrip) {
  std::mt19937_64 rng(7);
  GridConfig g(5, 6, 2);
  DelayTimeFrame f{oracle::random_matrix(5, 6, rng), g};
  for (int cp : {0, 3, 30}) {
    const auto s = serialize_with_cp(f, cp);
    for (int i = 0; i < cp; ++i) EXPECT_EQ(s.samples[i], s.samples[s.samples.size() - cp + i]);
    EXPECT_EQ(deserialize(s).samples, f.samples);
  }
}

TEST(ModulateUser, SingleUserIsIdentity) {
  GridConfig g(4, 4, 1);
  for (auto s : {Scheme::interleaved, Scheme::block}) {
    const auto f = random_frame(s, 0, g, 8);
    EXPECT_LT(max_abs(modulate_user(f, true).samples - f.symbols), 1e-12);
  }
}

TEST(ModulateUser, InterleavedRepetitionMagnitude) {
  GridConfig g(16, 32, 4);
  for (int q = 0; q < 4; ++q) {
    const auto f = random_frame(Scheme::interleaved, q, g, 10 + q);
    const auto x = modulate_user(f, true).samples;
    for (int m = 0; m < 16; ++m)
      for (int l = 0; l < 32; ++l) {
        const Complex derot = x(m, l) * std::polar(1.0, -2.0 * kPi * q * l / 32.0);
        EXPECT_LT(std::abs(derot - f.symbols(m, l % 8) / 2.0), 1e-10);
      }
  }
}

TEST(ModulateUser, BlockClosedFormAtMultiplesOfQ) {
  // At l = Q*kappa the sample is the symbol itself, scaled and rotated by
  // the first occupied bin.
  GridConfig g(6, 32, 4);
  for (int q = 0; q < 4; ++q) {
    AllocationPlan plan(Scheme::block, q, g);
    const auto f = random_frame(Scheme::block, q, g, 20 + q);
    const auto x = modulate_user(f, true).samples;
    const auto naive = oracle::direct_delay_time(f.symbols, Scheme::block, q, 4, 32);
    EXPECT_LT(max_abs(x - naive), 1e-10);
    for (int m = 0; m < 6; ++m)
      for (int kappa = 0; kappa < 8; ++kappa) {
        const int l = 4 * kappa;
        const Complex expect =
            f.symbols(m, kappa) / 2.0 * std::polar(1.0, 2.0 * kPi * plan.first_bin() * l / 32.0);
        EXPECT_LT(std::abs(x(m, l) - expect), 1e-10);
      }
  }
}

TEST(ModulateUser, PlainOtfsMatchesDirectSum) {
  GridConfig g(3, 8, 2);
  for (auto s : {Scheme::interleaved, Scheme::block}) {
    const auto f = random_frame(s, 1, g, 30);
    EXPECT_LT(max_abs(modulate_user(f, false).samples -
                      oracle::direct_delay_time(f.symbols, s, 1, 2, 8, false)),
              1e-12);
  }
}

TEST(ModulateUser, ParsevalEnergy) {
  GridConfig g(16, 32, 4);
  for (auto s : {Scheme::interleaved, Scheme::block})
    for (bool spread : {true, false}) {
      const auto f = random_frame(s, 2, g, 40);
      const double ein = f.symbols.squaredNorm();
      EXPECT_NEAR(modulate_user(f, spread).samples.squaredNorm(), ein, 1e-10 * ein);
    }
}

TEST(ModulateUser, UnnormalizedTransformBreaksParseval) {
  GridConfig g(4, 8, 2);
  const auto f = random_frame(Scheme::interleaved, 0, g, 41);
  const double ein = f.symbols.squaredNorm();
  EXPECT_GT(std::abs(modulate_user(f, true, Normalization::none).samples.squaredNorm() - ein),
            1.0);
}

TEST(ModulateUser, MultiUserSuperposition) {
  GridConfig g(4, 16, 4);
  for (auto s : {Scheme::interleaved, Scheme::block}) {
    CMatrix sum = CMatrix::Zero(4, 16);
    CMatrix joint = CMatrix::Zero(4, 16);
    for (int q = 0; q < 4; ++q) {
      const auto f = random_frame(s, q, g, 50 + q);
      sum += modulate_user(f, true).samples;
      joint += mapped_grid(f, true);
    }
    EXPECT_LT(max_abs(sum - idft_doppler(joint, g).samples), 1e-12);
  }
}

TEST(ModulateUser, BruteForceSmallGrids) {
  for (int M : {1, 2})
    for (int N : {2, 4})
      for (int Q : {1, 2})
        for (auto s : {Scheme::interleaved, Scheme::block})
          for (int q = 0; q < Q; ++q) {
            GridConfig g(M, N, Q);
            const auto f = random_frame(s, q, g, 100 + M * 10 + N + Q, 4);
            const auto naive = oracle::direct_delay_time(f.symbols, s, q, Q, N);
            EXPECT_LT(max_abs(modulate_user(f, true).samples - naive), 1e-10)
                << M << N << Q << to_string(s) << q;
          }
}

TEST(FastPath, MatchesTransformPath) {
  GridConfig g(16, 32, 4);
  for (int q = 0; q < 4; ++q) {
    const auto f = random_frame(Scheme::interleaved, q, g, 60 + q);
    EXPECT_LT(max_abs(interleaved_fast_path(f).samples - modulate_user(f, true).samples), 1e-10);
  }
}

TEST(FastPath, UserZeroHasNoRampAndStripRemovesIt) {
  GridConfig g(4, 8, 2);
  const auto f0 = random_frame(Scheme::interleaved, 0, g, 70);
  const auto x0 = interleaved_fast_path(f0).samples;
  for (int l = 0; l < 8; ++l) EXPECT_LT(max_abs(x0.col(l) - f0.symbols.col(l % 4) / std::sqrt(2.0)), 1e-15);
  const auto f1 = random_frame(Scheme::interleaved, 1, g, 71);
  const auto x1 = interleaved_fast_path(f1, PhaseRamp::strip).samples;
  for (int l = 0; l < 8; ++l) EXPECT_LT(max_abs(x1.col(l) - f1.symbols.col(l % 4) / std::sqrt(2.0)), 1e-15);
}

TEST(FastPath, MagnitudePeriodicInK) {
  GridConfig g(4, 16, 4);
  const auto f = random_frame(Scheme::interleaved, 3, g, 72);
  const auto x = interleaved_fast_path(f).samples;
  for (int l = 0; l + 4 < 16; ++l)
    EXPECT_LT((x.col(l).cwiseAbs() - x.col(l + 4).cwiseAbs()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(FastPath, RejectsBlockPlan) {
  GridConfig g(4, 8, 2);
  EXPECT_THROW(interleaved_fast_path(random_frame(Scheme::block, 0, g, 73)), DomainError);
}
