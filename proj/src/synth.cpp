#include "koopgrip/synth.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "koopgrip/calibration.hpp"
#include "koopgrip/errors.hpp"

namespace koopgrip {

void SynthProfile::validate() const {
    if (levels.empty()) throw ConfigError("profile needs at least one level");
    for (double l : levels)
        if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("profile levels are fractions in [0, 1]");
    if (!(restDuration >= 0.0 && plateauDuration >= 0.0 && rampDuration > 0.0))
        throw ConfigError("profile durations must be non-negative (ramp positive)");
    if (!(totalDuration > 0.0)) throw ConfigError("profile duration must be positive");
    if (!(maxForce >= 0.0)) throw ConfigError("max force must be non-negative");
    if (!(noiseSnr > 0.0)) throw ConfigError("noise SNR must be positive");
    if (!(emgRate > 400.0)) throw ConfigError("EMG rate must exceed 400 Hz for a 200 Hz band");
    if (!(gripRate > 0.0)) throw ConfigError("grip rate must be positive");
    if (!(emgLag >= 0.0 && gripNoise >= 0.0)) throw ConfigError("lag and grip noise must be non-negative");
}

double profile_force(const SynthProfile& p, double t) {
    if (t < p.restDuration) return 0.0;
    double level = 0.0;
    double start = p.restDuration;
    for (double next : p.levels) {
        if (t < start + p.rampDuration) {
            const double u = (t - start) / p.rampDuration;
            const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * u);
            return p.maxForce * (level + (next - level) * w);
        }
        level = next;
        start += p.rampDuration + p.plateauDuration;
        if (t < start) return p.maxForce * level;
    }
    return p.maxForce * level;
}

namespace {

std::vector<double> band_noise(std::size_t n, double fs, double lo, double hi, std::mt19937_64& rng) {
    std::size_t padded = 1;
    while (padded < n) padded <<= 1;
    std::normal_distribution<double> normal;
    std::vector<double> white(padded);
    for (auto& v : white) v = normal(rng);

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, white);
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(padded);
        if (f < lo || f > hi) spec[k] = 0.0;
    }
    std::vector<double> out;
    fft.inv(out, spec, static_cast<Eigen::Index>(padded));
    out.resize(n);
    double ss = 0.0;
    for (double v : out) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(n));
    if (rms > 0.0)
        for (auto& v : out) v /= rms;
    return out;
}

}  // namespace

Recording synth_recording(const SynthProfile& p, std::uint64_t seed) {
    p.validate();
    Recording rec;
    rec.meta = p.meta;

    std::seed_seq emgSeed{seed, std::uint64_t{1}};
    std::seed_seq gripSeed{seed, std::uint64_t{2}};
    std::seed_seq phaseSeed{seed, std::uint64_t{3}};
    std::mt19937_64 emgRng(emgSeed), gripRng(gripSeed), phaseRng(phaseSeed);

    const auto nEmg = static_cast<std::size_t>(std::floor(p.totalDuration * p.emgRate)) + 1;
    const auto noise = band_noise(nEmg, p.emgRate, 20.0, 200.0, emgRng);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double mainsPhase = phase(phaseRng);
    const double driftPhase = phase(phaseRng);
    constexpr double kDriftHz = 0.2;
    rec.emg.times.resize(nEmg);
    rec.emg.values.resize(nEmg);
    for (std::size_t i = 0; i < nEmg; ++i) {
        const double t = static_cast<double>(i) / p.emgRate;
        const double activation = p.maxForce > 0.0 ? profile_force(p, t - p.emgLag) / p.maxForce : 0.0;
        const double amp = (1.0 / p.noiseSnr + activation) * p.emgGain;
        rec.emg.times[i] = t;
        rec.emg.values[i] = amp * noise[i] +
                            p.mainsAmplitude * std::sin(2.0 * std::numbers::pi * 50.0 * t + mainsPhase) +
                            p.driftAmplitude * std::sin(2.0 * std::numbers::pi * kDriftHz * t + driftPhase);
    }

    const CalibrationPolynomial poly;
    std::normal_distribution<double> gripNoise(0.0, p.gripNoise);
    const auto nGrip = static_cast<std::size_t>(std::floor(p.totalDuration * p.gripRate)) + 1;
    rec.grip.times.resize(nGrip);
    rec.grip.values.resize(nGrip);
    for (std::size_t i = 0; i < nGrip; ++i) {
        const double t = static_cast<double>(i) / p.gripRate;
        const double noisy = profile_force(p, t) + (p.gripNoise > 0.0 ? gripNoise(gripRng) : 0.0);
        rec.grip.times[i] = t;
        rec.grip.values[i] = poly.inverse(noisy + p.dynamometerOffset);
    }
    return rec;
}

TimestampedSeries true_force(const SynthProfile& p, std::span<const double> times) {
    TimestampedSeries out;
    out.times.assign(times.begin(), times.end());
    out.values.reserve(times.size());
    for (double t : times) out.values.push_back(profile_force(p, t));
    return out;
}

}  // namespace koopgrip
