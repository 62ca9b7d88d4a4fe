#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "koopgrip/errors.hpp"
#include "koopgrip/kernels.hpp"
#include "koopgrip/signal_core.hpp"

using namespace koopgrip;

namespace {

std::vector<double> random_batch(std::mt19937_64& rng, std::size_t n = kDefaultBatchSize) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

SpectralMask unit_mask(std::size_t n = kDefaultBatchSize) {
    SpectralMask m;
    m.gains.assign(bin_count(n), 1.0);
    return m;
}

// O(n^2) real DFT -> gain -> inverse DFT
std::vector<double> naive_masked(const std::vector<double>& x, const std::vector<double>& gains) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> X(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t t = 0; t < n; ++t)
            X[k] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t % n) / double(n));
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t bin = std::min(k, n - k);
        X[k] *= gains[bin];
    }
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        std::complex<double> acc;
        for (std::size_t k = 0; k < n; ++k)
            acc += X[k] * std::polar(1.0, 2.0 * std::numbers::pi * double(k * t % n) / double(n));
        out[t] = acc.real() / double(n);
    }
    return out;
}

double pearson(const double* a, const double* b, std::size_t n) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) ma += a[i], mb += b[i];
    ma /= double(n);
    mb /= double(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

}  // namespace

TEST_CASE("unit mask round-trips and zero mask annihilates") {
    std::mt19937_64 rng(1);
    for (int b = 0; b < 20; ++b) {
        const auto x = random_batch(rng);
        const auto y = apply_spectral_mask(x, unit_mask());
        double err = 0;
        for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - y[i]));
        CHECK(err < 1e-9);
        SpectralMask zero;
        zero.gains.assign(bin_count(x.size()), 0.0);
        for (double v : apply_spectral_mask(x, zero)) CHECK(v == 0.0);
    }
}

TEST_CASE("masking matches a direct DFT") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (std::size_t n : {64u, 63u, 496u}) {
        const auto x = random_batch(rng, n);
        SpectralMask m;
        m.gains.resize(bin_count(n));
        for (auto& g : m.gains) g = u(rng);
        const auto fast = apply_spectral_mask(x, m);
        const auto slow = naive_masked(x, m.gains);
        for (std::size_t i = 0; i < n; ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("masking is linear") {
    std::mt19937_64 rng(3);
    const auto mask = default_optimal_mask();
    const auto x = random_batch(rng), y = random_batch(rng);
    std::vector<double> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = x[i] + y[i];
    const auto mx = apply_spectral_mask(x, mask), my = apply_spectral_mask(y, mask), ms = apply_spectral_mask(s, mask);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(ms[i] - mx[i] - my[i]) < 1e-9);
}

TEST_CASE("mask size mismatch is a configuration error") {
    std::vector<double> x(100, 1.0);
    CHECK_THROWS_AS(apply_spectral_mask(x, unit_mask()), ConfigError);
    CHECK_THROWS_AS(apply_spectral_mask(std::vector<double>{1.0}, unit_mask(1)), InputError);
}

TEST_CASE("default mask profile") {
    const auto m = default_optimal_mask();
    CHECK(m.size() == 249);
    auto gainAt = [&](double hz) {
        const auto k = static_cast<std::size_t>(std::lround(hz / m.binResolution));
        return m.gains[k];
    };
    CHECK(gainAt(0) == 0.0);
    CHECK(gainAt(2) == 0.0);
    CHECK(gainAt(50) == doctest::Approx(0.375));
    CHECK(gainAt(300) == 0.0);
    CHECK(gainAt(10) == doctest::Approx(0.5));
    CHECK(gainAt(18) == doctest::Approx(1.0));
    CHECK(gainAt(36) == doctest::Approx(1.5));
    CHECK(gainAt(110) == doctest::Approx(4.5));
    CHECK(gainAt(150) == doctest::Approx(4.375));
    CHECK(gainAt(204) == 0.0);
    CHECK(default_mask_gain(20) == doctest::Approx(0.25));
    CHECK(default_mask_gain(48) == doctest::Approx(0.25));
    CHECK(default_mask_gain(52) == doctest::Approx(0.5));
    CHECK(default_mask_gain(81) == doctest::Approx(0.5 + 4.0 * 29.0 / 58.0));
    for (double g : m.gains) CHECK(g >= 0.0);
}

TEST_CASE("resampled mask keeps the profile on a shorter batch") {
    const auto m = default_optimal_mask();
    const auto r = m.resampled(200, kNominalEmgRate);
    CHECK(r.size() == bin_count(200));
    CHECK(r.gains[0] == 0.0);
    // 150 Hz sits on the flat plateau in both grids
    const auto k = static_cast<std::size_t>(std::lround(150.0 / r.binResolution));
    CHECK(r.gains[k] == doctest::Approx(4.375));
}

TEST_CASE("rectify") {
    const std::vector<double> x{-2.0, 0.0, 3.5, -0.25};
    CHECK(rectify(x) == std::vector<double>{2.0, 0.0, 3.5, 0.25});
}

TEST_CASE("smoothing with zero decay is the trailing mean") {
    std::mt19937_64 rng(4);
    for (std::size_t w : {2u, 7u, 300u, 495u}) {
        const auto x = random_batch(rng);
        const auto tail = random_batch(rng, w - 1);
        const auto y = smooth_ema(x, tail, {w, 0.0});
        std::vector<double> hist(tail);
        hist.insert(hist.end(), x.begin(), x.end());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double s = 0;
            for (std::size_t j = i; j < i + w; ++j) s += hist[j];
            CHECK(y[i] == doctest::Approx(s / double(w)).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("smoothing weights the newest sample most") {
    const std::vector<double> tail{0.0, 0.0};
    const std::vector<double> x{0.0, 0.0, 1.0};
    const double decay = 0.05;
    const auto y = smooth_ema(x, tail, {3, decay});
    const double norm = 1.0 + (1 - decay) + (1 - decay) * (1 - decay);
    CHECK(y[2] == doctest::Approx(1.0 / norm));
}

TEST_CASE("smoothing preserves constants") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> wd(2, 495);
    std::uniform_real_distribution<double> dd(0.0, 0.05), cd(-3.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        const SmoothingParams p{wd(rng), dd(rng)};
        const double c = cd(rng);
        const std::vector<double> x(kDefaultBatchSize, c), tail(p.windowSize - 1, c);
        for (double v : smooth_ema(x, tail, p)) CHECK(v == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("smoothing parameter bounds") {
    CHECK_THROWS_AS((SmoothingParams{1, 0.0}.validate()), ConfigError);
    CHECK_THROWS_AS((SmoothingParams{496, 0.0}.validate()), ConfigError);
    CHECK_THROWS_AS((SmoothingParams{300, 0.06}.validate()), ConfigError);
    CHECK_NOTHROW((SmoothingParams{495, 0.05}.validate()));
}

TEST_CASE("batched processing equals smoothing the concatenated masked signal") {
    std::mt19937_64 rng(6);
    const SmoothingParams p{300, 0.01};
    const auto mask = default_optimal_mask();
    EmgPipeline pipe(mask, p);
    std::vector<double> batched, rectMasked;
    for (int b = 0; b < 4; ++b) {
        RawEmgBatch raw{random_batch(rng), b * 0.5, kNominalEmgRate};
        const auto out = pipe.push(raw);
        batched.insert(batched.end(), out.samples.begin(), out.samples.end());
        const auto r = rectify(apply_spectral_mask(raw.samples, mask));
        rectMasked.insert(rectMasked.end(), r.begin(), r.end());
    }
    const std::vector<double> zeros(p.windowSize - 1, 0.0);
    const auto whole = smooth_ema(rectMasked, zeros, p);
    REQUIRE(whole.size() == batched.size());
    for (std::size_t i = 0; i < whole.size(); ++i) CHECK(whole[i] == doctest::Approx(batched[i]).epsilon(1e-12));
    for (double v : batched) CHECK(v >= 0.0);
}

TEST_CASE("process_recording handles a short final batch") {
    std::mt19937_64 rng(7);
    TimestampedSeries emg;
    const std::size_t n = 3 * kDefaultBatchSize + 101;
    emg.values = random_batch(rng, n);
    for (std::size_t i = 0; i < n; ++i) emg.times.push_back(double(i) / kNominalEmgRate);
    const auto out = process_recording(emg, default_optimal_mask(), {300, 0.0});
    CHECK(out.size() == n);
    CHECK(out.times == emg.times);
}

TEST_CASE("linear resampling") {
    const TimestampedSeries s{{0.0, 1.0}, {0.0, 10.0}};
    CHECK(resample_linear(s, std::vector<double>{0.5}).values[0] == doctest::Approx(5.0));
    CHECK(resample_linear(s, s.times).values == s.values);
    CHECK_THROWS_AS(resample_linear(TimestampedSeries{{0.0}, {1.0}}, std::vector<double>{0.0}), InputError);

    std::mt19937_64 rng(8);
    TimestampedSeries grip;
    for (int i = 0; i <= 400; ++i) grip.times.push_back(i / 200.0);
    grip.values = random_batch(rng, grip.times.size());
    std::vector<double> targets;
    for (int i = 0; double(i) / kNominalEmgRate <= 2.0; ++i) targets.push_back(i / kNominalEmgRate);
    const auto r = resample_linear(grip, targets);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto j = std::min<std::size_t>(static_cast<std::size_t>(targets[i] * 200.0), 399);
        const double t0 = grip.times[j], t1 = grip.times[j + 1];
        const double oracle = grip.values[j] + (grip.values[j + 1] - grip.values[j]) * (targets[i] - t0) / (t1 - t0);
        CHECK(std::abs(r.values[i] - oracle) <= 1e-12);
    }
}

TEST_CASE("peak cross-correlation") {
    std::mt19937_64 rng(9);
    const auto a = random_batch(rng, 400);
    auto self = peak_cross_correlation(a, a, 20);
    CHECK(self.peak == doctest::Approx(1.0));
    CHECK(self.lag == 0);

    std::vector<double> delayed(a.size());
    for (std::size_t i = 5; i < a.size(); ++i) delayed[i] = a[i - 5];
    for (std::size_t i = 0; i < 5; ++i) delayed[i] = 0.3 * double(i);
    const auto shifted = peak_cross_correlation(a, delayed, 20);
    CHECK(shifted.peak == doctest::Approx(1.0));
    CHECK(shifted.lag == 5);

    std::vector<double> flipped(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) flipped[i] = -a[i] + 0.1 * std::sin(0.05 * double(i));
    const int L = 30;
    const auto got = peak_cross_correlation(a, flipped, L);
    double best = -2.0;
    int bestLag = 0;
    for (int lag = -L; lag <= L; ++lag) {
        const std::size_t n = a.size() - static_cast<std::size_t>(std::abs(lag));
        const double c = lag >= 0 ? pearson(a.data(), flipped.data() + lag, n) : pearson(a.data() - lag, flipped.data(), n);
        if (c > best) best = c, bestLag = lag;
    }
    CHECK(got.peak == doctest::Approx(best).epsilon(1e-12));
    CHECK(got.lag == bestLag);

    const std::vector<double> flat(400, 2.0);
    CHECK_THROWS_AS(peak_cross_correlation(a, flat, 10), NumericError);
}

TEST_CASE("lag kernel: parallel equals serial") {
    std::mt19937_64 rng(10);
    const auto a = random_batch(rng, 3000), b = random_batch(rng, 3000);
    CHECK(kernels::lag_correlations(a, b, 160) == kernels::lag_correlations_serial(a, b, 160));
}
