#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "harmonic/rational.hpp"
#include "harmonic/rng.hpp"

namespace harmonic {

// A length-N window into a longer 1-D signal.
struct WindowedSignal {
    std::vector<double> samples;
    std::size_t window_start = 0;
    std::size_t window_len = 0;

    WindowedSignal() = default;
    WindowedSignal(std::vector<double> samples, std::size_t start, std::size_t len);
    // The whole signal as one window.
    explicit WindowedSignal(std::vector<double> samples);

    double operator[](std::size_t n) const { return samples[window_start + n]; }
};

// cos(pi * num / den), with the argument reduced exactly modulo 2 before evaluation.
double cos_pi(std::int64_t num, std::int64_t den);

// F_k = sum_n x_n cos(pi (n + 1/2) k / N)
double dct2_coeff(const WindowedSignal& w, int k);
// G_k = sum_n x_n sin(pi (n + 1/2) k / N)
double dst_coeff(const WindowedSignal& w, int k);
// sum_n x_n cos(pi/2 + 2 pi z - pi (n + 1/2) k / N); equals G_k for every integer z.
double dst_phase_form(const WindowedSignal& w, int k, int z);
// sum_n x_n cos(pi (n - delta + 1/2) k / N) with delta = N (1 + 4z) / (2k); equals G_k.
double dst_shifted_cosine_form(const WindowedSignal& w, int k, int z);

// Shift that turns the cosine transform into the sine transform.
struct ShiftSpec {
    int n = 0;
    int k = 1;
    int z = 0;

    Rational delta() const;
    bool integral() const;
};

// delta = N (1 + 4z) / (2k), exact. Throws ValueError for k < 1.
Rational shift_delta(int n, int k, int z);

// 2k divides N (1 + 4z), decided with integer arithmetic only.
bool shift_is_integral(int n, int k, int z);

// Uniform random values in [-1, 1).
std::vector<double> random_signal(std::size_t length, Rng& rng);
// Repeats a random length-N period until the signal has `length` samples.
std::vector<double> periodic_signal(std::size_t period, std::size_t length, Rng& rng);

// Max |G_k - phase form| over random windows.
double verify_phase_identity(int n, int k, int z, int trials, std::uint64_t seed);
// Max |G_k - shifted cosine form| over random windows.
double verify_shifted_cosine(int n, int k, int z, int trials, std::uint64_t seed);

// Max over offsets s of |G_k(window at s) - F_k(window at s + delta)| for every s where both
// windows fit. Requires an integral delta; no other assumption, so the value can be large.
double measure_window_shift(int n, int k, int z, std::span<const double> signal);

// As measure_window_shift, restricted to the regime where the identity is exact: an N-periodic
// signal and even k. Throws ValueError outside it.
double verify_window_shift(int n, int k, int z, std::span<const double> signal);

} // namespace harmonic
