#include "koopgrip/signal_core.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <unsupported/Eigen/FFT>

#include "koopgrip/errors.hpp"
#include "koopgrip/kernels.hpp"

namespace koopgrip {

namespace {

Eigen::FFT<double>& thread_fft() {
    thread_local Eigen::FFT<double> fft = [] {
        Eigen::FFT<double> f;
        f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
        return f;
    }();
    return fft;
}

}  // namespace

std::size_t bin_count(std::size_t batchSize) { return batchSize / 2 + 1; }

SpectralMask SpectralMask::resampled(std::size_t batchSize, double fs) const {
    if (gains.empty()) throw ConfigError("empty spectral mask");
    SpectralMask out;
    out.binResolution = fs / static_cast<double>(batchSize);
    out.gains.resize(bin_count(batchSize));
    const double lastFreq = frequency(gains.size() - 1);
    for (std::size_t k = 0; k < out.gains.size(); ++k) {
        const double f = std::min(out.frequency(k), lastFreq);
        const double pos = f / binResolution;
        const auto i = std::min(static_cast<std::size_t>(pos), gains.size() - 1);
        const auto j = std::min(i + 1, gains.size() - 1);
        const double w = pos - static_cast<double>(i);
        out.gains[k] = (1.0 - w) * gains[i] + w * gains[j];
    }
    return out;
}

void SmoothingParams::validate(std::size_t batchSize) const {
    if (windowSize < 2) throw ConfigError("smoothing window must be >= 2");
    if (batchSize > 1 && windowSize > batchSize - 1)
        throw ConfigError("smoothing window must be <= batch size - 1");
    if (!(decay >= 0.0 && decay <= 0.05)) throw ConfigError("smoothing decay must lie in [0, 0.05]");
}

void TimestampedSeries::validate() const {
    if (times.size() != values.size()) throw InputError("series times and values differ in length");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw InputError("series times must be strictly increasing");
}

std::vector<double> apply_spectral_mask(std::span<const double> samples, const SpectralMask& mask) {
    if (samples.size() < 2) throw InputError("batch needs at least 2 samples");
    if (mask.size() != bin_count(samples.size()))
        throw ConfigError("mask has " + std::to_string(mask.size()) + " bins, batch of " +
                          std::to_string(samples.size()) + " needs " + std::to_string(bin_count(samples.size())));
    auto& fft = thread_fft();
    std::vector<double> in(samples.begin(), samples.end());
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, in);
    for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= mask.gains[k];
    std::vector<double> out;
    fft.inv(out, spectrum, static_cast<Eigen::Index>(samples.size()));
    return out;
}

RawEmgBatch apply_spectral_mask(const RawEmgBatch& batch, const SpectralMask& mask) {
    return {apply_spectral_mask(batch.samples, mask), batch.t0, batch.fs};
}

std::vector<double> rectify(std::span<const double> samples) {
    std::vector<double> out(samples.size());
    std::transform(samples.begin(), samples.end(), out.begin(), [](double v) { return std::abs(v); });
    return out;
}

std::vector<double> smooth_ema(std::span<const double> samples, std::span<const double> prevTail,
                               const SmoothingParams& params) {
    if (params.windowSize < 2) throw ConfigError("smoothing window must be >= 2");
    const std::size_t w = params.windowSize;
    if (prevTail.size() < w - 1) throw InputError("smoothing tail shorter than window - 1");

    std::vector<double> weights(w);
    double norm = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
        weights[k] = std::pow(1.0 - params.decay, static_cast<double>(k));
        norm += weights[k];
    }

    // history = last w-1 tail samples followed by the batch
    const auto tail = prevTail.subspan(prevTail.size() - (w - 1));
    std::vector<double> history;
    history.reserve(tail.size() + samples.size());
    history.insert(history.end(), tail.begin(), tail.end());
    history.insert(history.end(), samples.begin(), samples.end());

    std::vector<double> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::size_t newest = i + w - 1;
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) acc += weights[k] * history[newest - k];
        out[i] = acc / norm;
    }
    return out;
}

ProcessResult process_batch(const RawEmgBatch& raw, const SpectralMask& mask, const SmoothingParams& params,
                            std::span<const double> prevTail) {
    const auto rect = rectify(apply_spectral_mask(raw.samples, mask));
    ProcessResult result;
    result.batch = {smooth_ema(rect, prevTail, params), raw.t0, raw.fs};

    const std::size_t keep = params.windowSize - 1;
    std::vector<double> joined(prevTail.begin(), prevTail.end());
    joined.insert(joined.end(), rect.begin(), rect.end());
    result.tail.assign(joined.end() - static_cast<std::ptrdiff_t>(keep), joined.end());
    return result;
}

double default_mask_gain(double f) {
    auto lerp = [](double f0, double g0, double f1, double g1, double x) {
        return g0 + (g1 - g0) * (x - f0) / (f1 - f0);
    };
    if (f <= 2.0) return 0.0;
    if (f <= 18.0) return lerp(2.0, 0.0, 18.0, 1.0, f);
    if (f < 20.0) return lerp(18.0, 1.0, 20.0, 0.25, f);
    if (f <= 32.0) return lerp(20.0, 0.25, 32.0, 1.5, f);
    if (f <= 42.0) return 1.5;
    if (f <= 48.0) return lerp(42.0, 1.5, 48.0, 0.25, f);
    if (f < 50.0) return lerp(48.0, 0.25, 50.0, 0.375, f);
    if (f == 50.0) return 0.375;
    if (f < 52.0) return lerp(50.0, 0.375, 52.0, 0.5, f);
    if (f <= 110.0) return lerp(52.0, 0.5, 110.0, 4.5, f);
    if (f <= 202.0) return 4.375;
    if (f < 204.0) return lerp(202.0, 4.375, 204.0, 0.0, f);
    return 0.0;
}

SpectralMask default_optimal_mask(std::size_t batchSize, double fs) {
    if (batchSize < 2) throw ConfigError("batch size must be >= 2");
    if (!(fs > 0.0)) throw ConfigError("sampling rate must be positive");
    SpectralMask mask;
    mask.binResolution = fs / static_cast<double>(batchSize);
    mask.gains.resize(bin_count(batchSize));
    // Profile breakpoints sit on whole-Hz bin labels (2, 4, ..., 496 Hz at the
    // default rate), so bin frequencies are rounded before evaluation.
    for (std::size_t k = 0; k < mask.gains.size(); ++k)
        mask.gains[k] = default_mask_gain(std::round(mask.frequency(k)));
    return mask;
}

TimestampedSeries resample_linear(const TimestampedSeries& series, std::span<const double> targetTimes) {
    series.validate();
    if (series.size() < 2) throw InputError("resampling needs at least 2 points");
    const auto& t = series.times;
    const auto& v = series.values;
    TimestampedSeries out;
    out.times.assign(targetTimes.begin(), targetTimes.end());
    out.values.resize(targetTimes.size());
    for (std::size_t i = 0; i < targetTimes.size(); ++i) {
        const double x = targetTimes[i];
        if (x <= t.front()) {
            out.values[i] = v.front();
            continue;
        }
        if (x >= t.back()) {
            out.values[i] = v.back();
            continue;
        }
        const auto hi = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), x) - t.begin());
        const std::size_t lo = hi - 1;
        const double w = (x - t[lo]) / (t[hi] - t[lo]);
        out.values[i] = v[lo] + w * (v[hi] - v[lo]);
    }
    return out;
}

CrossCorrelation peak_cross_correlation(std::span<const double> a, std::span<const double> b, int maxLag) {
    if (a.size() != b.size()) throw InputError("cross-correlation inputs differ in length");
    if (a.size() < 2) throw InputError("cross-correlation needs at least 2 samples");
    if (maxLag < 0 || static_cast<std::size_t>(maxLag) >= a.size())
        throw ConfigError("max lag must be in [0, length)");
    auto variance_zero = [](std::span<const double> x) {
        return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
    };
    if (variance_zero(a) || variance_zero(b)) throw NumericError("zero-variance input: correlation undefined");

    const auto corr = kernels::lag_correlations(a, b, maxLag);
    CrossCorrelation best{corr[0], -maxLag};
    for (std::size_t i = 1; i < corr.size(); ++i) {
        if (corr[i] > best.peak) best = {corr[i], static_cast<int>(i) - maxLag};
    }
    return best;
}

int lag_samples(double seconds, double fs) { return static_cast<int>(std::lround(seconds * fs)); }

EmgPipeline::EmgPipeline(SpectralMask mask, SmoothingParams params) : mask_(std::move(mask)), params_(params) {
    if (params_.windowSize < 2) throw ConfigError("smoothing window must be >= 2");
    reset();
}

void EmgPipeline::reset() { tail_.assign(params_.windowSize - 1, 0.0); }

ProcessedEmgBatch EmgPipeline::push(const RawEmgBatch& raw) {
    ProcessResult r = bin_count(raw.samples.size()) == mask_.size()
                          ? process_batch(raw, mask_, params_, tail_)
                          : process_batch(raw, mask_.resampled(raw.samples.size(), raw.fs), params_, tail_);
    tail_ = std::move(r.tail);
    return std::move(r.batch);
}

TimestampedSeries process_recording(const TimestampedSeries& emg, const SpectralMask& mask,
                                    const SmoothingParams& params, std::size_t batchSize) {
    emg.validate();
    if (emg.size() < 2) throw InputError("EMG recording too short");
    const double fs = estimate_rate(emg);
    EmgPipeline pipeline(mask, params);
    TimestampedSeries out;
    out.times = emg.times;
    out.values.reserve(emg.size());
    for (std::size_t start = 0; start < emg.size(); start += batchSize) {
        std::size_t len = std::min(batchSize, emg.size() - start);
        if (len < 2) {
            // a single trailing sample cannot be transformed; repeat the last envelope value
            out.values.push_back(out.values.empty() ? 0.0 : out.values.back());
            continue;
        }
        RawEmgBatch batch;
        batch.samples.assign(emg.values.begin() + static_cast<std::ptrdiff_t>(start),
                             emg.values.begin() + static_cast<std::ptrdiff_t>(start + len));
        batch.t0 = emg.times[start];
        batch.fs = fs;
        const auto processed = pipeline.push(batch);
        out.values.insert(out.values.end(), processed.samples.begin(), processed.samples.end());
    }
    return out;
}

double estimate_rate(const TimestampedSeries& series) {
    if (series.size() < 2) throw InputError("cannot estimate rate of a series shorter than 2");
    return static_cast<double>(series.size() - 1) / (series.times.back() - series.times.front());
}

}  // namespace koopgrip
