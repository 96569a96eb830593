#include "harmonic/lapped_dct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "harmonic/errors.hpp"

namespace harmonic {

namespace {

void check_window(const WindowedSignal& w, int k) {
    if (k < 0 || static_cast<std::size_t>(k) >= w.window_len) {
        throw ValueError("frequency index " + std::to_string(k) + " outside [0, " +
                         std::to_string(w.window_len) + ")");
    }
}

void check_n(int n) {
    if (n < 1) {
        throw ValueError("window length must be >= 1");
    }
}

} // namespace

WindowedSignal::WindowedSignal(std::vector<double> s, std::size_t start, std::size_t len)
    : samples(std::move(s)), window_start(start), window_len(len) {
    if (len == 0 || start + len > samples.size()) {
        throw ValueError("window [" + std::to_string(start) + ", " + std::to_string(start + len) +
                         ") does not fit a signal of " + std::to_string(samples.size()));
    }
}

WindowedSignal::WindowedSignal(std::vector<double> s) {
    const std::size_t len = s.size();
    *this = WindowedSignal(std::move(s), 0, len);
}

double cos_pi(std::int64_t num, std::int64_t den) {
    if (den <= 0) {
        throw ValueError("cos_pi needs a positive denominator");
    }
    std::int64_t r = num % (2 * den);
    if (r < 0) {
        r += 2 * den;
    }
    return std::cos(std::numbers::pi * static_cast<double>(r) / static_cast<double>(den));
}

double dct2_coeff(const WindowedSignal& w, int k) {
    check_window(w, k);
    const auto n_len = static_cast<std::int64_t>(w.window_len);
    double acc = 0.0;
    for (std::int64_t n = 0; n < n_len; ++n) {
        acc += w[static_cast<std::size_t>(n)] * cos_pi((2 * n + 1) * k, 2 * n_len);
    }
    return acc;
}

double dst_coeff(const WindowedSignal& w, int k) {
    check_window(w, k);
    const auto n_len = static_cast<std::int64_t>(w.window_len);
    double acc = 0.0;
    for (std::int64_t n = 0; n < n_len; ++n) {
        acc += w[static_cast<std::size_t>(n)] *
               std::sin(std::numbers::pi * static_cast<double>((2 * n + 1) * k) /
                        static_cast<double>(2 * n_len));
    }
    return acc;
}

double dst_phase_form(const WindowedSignal& w, int k, int z) {
    check_window(w, k);
    const auto n_len = static_cast<std::int64_t>(w.window_len);
    // pi/2 + 2 pi z - pi (2n+1) k / (2N), all over the common denominator 2N
    double acc = 0.0;
    for (std::int64_t n = 0; n < n_len; ++n) {
        const std::int64_t num = n_len + 4 * z * n_len - (2 * n + 1) * k;
        acc += w[static_cast<std::size_t>(n)] * cos_pi(num, 2 * n_len);
    }
    return acc;
}

double dst_shifted_cosine_form(const WindowedSignal& w, int k, int z) {
    check_window(w, k);
    const auto n_len = static_cast<int>(w.window_len);
    const Rational delta = shift_delta(n_len, k, z);
    // (n - p/q + 1/2) k / N = ((2n + 1) q - 2p) k / (2 N q)
    const std::int64_t p = delta.num();
    const std::int64_t q = delta.den();
    double acc = 0.0;
    for (std::int64_t n = 0; n < n_len; ++n) {
        acc += w[static_cast<std::size_t>(n)] * cos_pi(((2 * n + 1) * q - 2 * p) * k, 2 * n_len * q);
    }
    return acc;
}

Rational ShiftSpec::delta() const { return shift_delta(n, k, z); }

bool ShiftSpec::integral() const { return shift_is_integral(n, k, z); }

Rational shift_delta(int n, int k, int z) {
    check_n(n);
    if (k < 1) {
        throw ValueError("shift delta needs k >= 1");
    }
    return {static_cast<std::int64_t>(n) * (1 + 4 * static_cast<std::int64_t>(z)),
            2 * static_cast<std::int64_t>(k)};
}

bool shift_is_integral(int n, int k, int z) {
    check_n(n);
    if (k < 1) {
        throw ValueError("shift delta needs k >= 1");
    }
    const std::int64_t numerator = static_cast<std::int64_t>(n) * (1 + 4 * static_cast<std::int64_t>(z));
    return numerator % (2 * static_cast<std::int64_t>(k)) == 0;
}

std::vector<double> random_signal(std::size_t length, Rng& rng) {
    std::vector<double> out(length);
    for (double& x : out) {
        x = rng.uniform(-1.0, 1.0);
    }
    return out;
}

std::vector<double> periodic_signal(std::size_t period, std::size_t length, Rng& rng) {
    if (period == 0) {
        throw ValueError("period must be >= 1");
    }
    const std::vector<double> base = random_signal(period, rng);
    std::vector<double> out(length);
    for (std::size_t i = 0; i < length; ++i) {
        out[i] = base[i % period];
    }
    return out;
}

double verify_phase_identity(int n, int k, int z, int trials, std::uint64_t seed) {
    check_n(n);
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const WindowedSignal w(random_signal(static_cast<std::size_t>(n), rng));
        worst = std::max(worst, std::abs(dst_coeff(w, k) - dst_phase_form(w, k, z)));
    }
    return worst;
}

double verify_shifted_cosine(int n, int k, int z, int trials, std::uint64_t seed) {
    check_n(n);
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const WindowedSignal w(random_signal(static_cast<std::size_t>(n), rng));
        worst = std::max(worst, std::abs(dst_coeff(w, k) - dst_shifted_cosine_form(w, k, z)));
    }
    return worst;
}

double measure_window_shift(int n, int k, int z, std::span<const double> signal) {
    const Rational delta = shift_delta(n, k, z);
    if (!delta.is_integer()) {
        throw ValueError("window shift needs an integral delta, got " + delta.str());
    }
    const auto len = static_cast<std::int64_t>(signal.size());
    const std::int64_t d = delta.num();
    const std::int64_t first = std::max<std::int64_t>(0, -d);
    const std::int64_t last = len - n - std::max<std::int64_t>(0, d);
    if (last < first) {
        throw ValueError("signal of " + std::to_string(len) + " samples too short for N=" +
                         std::to_string(n) + " and delta=" + delta.str());
    }
    const std::vector<double> samples(signal.begin(), signal.end());
    double worst = 0.0;
    for (std::int64_t s = first; s <= last; ++s) {
        const WindowedSignal sine(samples, static_cast<std::size_t>(s), static_cast<std::size_t>(n));
        const WindowedSignal cosine(samples, static_cast<std::size_t>(s + d),
                                    static_cast<std::size_t>(n));
        worst = std::max(worst, std::abs(dst_coeff(sine, k) - dct2_coeff(cosine, k)));
    }
    return worst;
}

double verify_window_shift(int n, int k, int z, std::span<const double> signal) {
    check_n(n);
    if (k % 2 != 0) {
        throw ValueError("window shift is exact only for even k, got k=" + std::to_string(k));
    }
    for (std::size_t i = static_cast<std::size_t>(n); i < signal.size(); ++i) {
        if (signal[i] != signal[i - static_cast<std::size_t>(n)]) {
            throw ValueError("signal is not " + std::to_string(n) + "-periodic");
        }
    }
    return measure_window_shift(n, k, z, signal);
}

} // namespace harmonic
