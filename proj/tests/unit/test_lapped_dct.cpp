#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "harmonic/lapped_dct.hpp"

using namespace harmonic;

namespace {

// Plain double-precision evaluation of the defining sums, no argument reduction.
double naive_dct(const std::vector<double>& x, std::size_t start, int n, int k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        s += x[start + static_cast<std::size_t>(i)] * std::cos(std::numbers::pi * (i + 0.5) * k / n);
    }
    return s;
}

double naive_dst(const std::vector<double>& x, std::size_t start, int n, int k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        s += x[start + static_cast<std::size_t>(i)] * std::sin(std::numbers::pi * (i + 0.5) * k / n);
    }
    return s;
}

} // namespace

TEST(Dct, ConstantSignal) {
    const WindowedSignal w(std::vector<double>(6, 1.0));
    EXPECT_NEAR(dct2_coeff(w, 0), 6.0, 1e-12);
    for (int k = 1; k < 6; ++k) {
        EXPECT_NEAR(dct2_coeff(w, k), 0.0, 1e-12);
    }
}

TEST(Dct, CosineVectorGivesHalfLength) {
    const int n = 8;
    for (int k = 1; k < n; ++k) {
        std::vector<double> x(n);
        for (int i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] = std::cos(std::numbers::pi * (i + 0.5) * k / n);
        }
        EXPECT_NEAR(dct2_coeff(WindowedSignal(x), k), n / 2.0, 1e-12);
    }
}

TEST(Dct, RangeChecks) {
    const WindowedSignal w(std::vector<double>(4, 1.0));
    EXPECT_THROW(dct2_coeff(w, 4), ValueError);
    EXPECT_THROW(dst_coeff(w, -1), ValueError);
    EXPECT_THROW(WindowedSignal(std::vector<double>(4), 2, 3), ValueError);
}

TEST(Dst, ZeroFrequencyAndConstant) {
    Rng rng(1);
    const WindowedSignal w(random_signal(7, rng));
    EXPECT_EQ(dst_coeff(w, 0), 0.0);
    const WindowedSignal c(std::vector<double>(4, 1.0));
    EXPECT_NEAR(dst_coeff(c, 2), 0.0, 1e-12);
}

TEST(Dst, MatchesNaiveSums) {
    Rng rng(2);
    const auto x = random_signal(20, rng);
    for (int k = 0; k < 9; ++k) {
        const WindowedSignal w(x, 5, 9);
        EXPECT_NEAR(dst_coeff(w, k), naive_dst(x, 5, 9, k), 1e-12);
        EXPECT_NEAR(dct2_coeff(w, k), naive_dct(x, 5, 9, k), 1e-12);
    }
}

TEST(Dst, PhaseForm) {
    Rng rng(3);
    const WindowedSignal w(random_signal(11, rng));
    for (int k = 1; k < 11; ++k) {
        for (int z : {0, 1, -3}) {
            EXPECT_NEAR(dst_phase_form(w, k, z), dst_coeff(w, k), 1e-12);
        }
    }
}

TEST(Shift, DeltaExamples) {
    EXPECT_EQ(shift_delta(4, 2, 0), Rational(1, 1));
    EXPECT_EQ(shift_delta(8, 2, 0), Rational(2, 1));
    EXPECT_EQ(shift_delta(6, 4, 0), Rational(3, 4));
    EXPECT_FALSE(shift_is_integral(6, 4, 0));
    EXPECT_EQ(shift_delta(8, 2, 1), Rational(10, 1));
    EXPECT_EQ(shift_delta(4, 2, -1), Rational(-3, 1));
    EXPECT_THROW(shift_delta(4, 0, 0), ValueError);
    const ShiftSpec s{8, 4, 0};
    EXPECT_EQ(s.delta(), Rational(1, 1));
    EXPECT_TRUE(s.integral());
}

TEST(Shift, IntegralityMatchesExhaustiveSearch) {
    for (int n = 1; n <= 16; ++n) {
        for (int k = 1; k <= 2 * n; ++k) {
            for (int z = -10; z <= 10; ++z) {
                // delta is an integer iff some integer d satisfies 2k * d == N(1+4z)
                const long long num = static_cast<long long>(n) * (1 + 4 * z);
                bool found = false;
                for (long long d = -1000; d <= 1000 && !found; ++d) {
                    found = 2LL * k * d == num;
                }
                EXPECT_EQ(shift_is_integral(n, k, z), found) << n << " " << k << " " << z;
            }
        }
    }
}

TEST(Shift, ShiftedCosineForm) {
    EXPECT_LT(verify_shifted_cosine(8, 3, 0, 100, 1), 1e-12);
    EXPECT_LT(verify_shifted_cosine(4, 1, 5, 100, 2), 1e-12);
    for (int k = 1; k < 16; ++k) {
        EXPECT_LT(verify_shifted_cosine(16, k, 0, 20, 3), 1e-12);
    }
    EXPECT_LT(verify_phase_identity(13, 5, -3, 20, 4), 1e-12);
}

TEST(WindowShift, PeriodicEvenFrequency) {
    Rng rng(5);
    EXPECT_LT(verify_window_shift(4, 2, 0, periodic_signal(4, 40, rng)), 1e-12);
    EXPECT_LT(verify_window_shift(8, 4, 0, periodic_signal(8, 64, rng)), 1e-12);
    EXPECT_LT(verify_window_shift(8, 2, 1, periodic_signal(8, 80, rng)), 1e-12);
}

// Independent check of one case: DST at offset s against a naive DCT at s + delta.
TEST(WindowShift, NaiveCrossCheck) {
    Rng rng(6);
    const auto x = periodic_signal(4, 24, rng);
    for (std::size_t s = 0; s + 1 + 4 <= x.size(); ++s) {
        EXPECT_NEAR(naive_dst(x, s, 4, 2), naive_dct(x, s + 1, 4, 2), 1e-12);
    }
}

TEST(WindowShift, RegimeIsEnforced) {
    Rng rng(7);
    const auto periodic = periodic_signal(6, 48, rng);
    // odd k
    EXPECT_THROW(verify_window_shift(6, 3, 1, periodic), ValueError);
    // non-integral delta
    EXPECT_THROW(verify_window_shift(6, 4, 0, periodic), ValueError);
    // not periodic
    EXPECT_THROW(verify_window_shift(4, 2, 0, random_signal(40, rng)), ValueError);
}

TEST(WindowShift, OddFrequencyIsMeasuredNotExact) {
    Rng rng(8);
    // N=6, k=3, z=1: delta = 5, odd k needs an antisymmetric extension
    const double err = measure_window_shift(6, 3, 1, periodic_signal(6, 60, rng));
    EXPECT_GT(err, 1e-6);
}

TEST(CosPi, ExactReduction) {
    EXPECT_EQ(cos_pi(0, 1), 1.0);
    EXPECT_EQ(cos_pi(1, 1), -1.0);
    EXPECT_NEAR(cos_pi(1, 2), 0.0, 1e-16);
    EXPECT_NEAR(cos_pi(2000002, 3), -0.5, 1e-14);
}
