#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace koopgrip {

inline constexpr std::size_t kDefaultBatchSize = 496;
inline constexpr double kNominalEmgRate = 992.97;
inline constexpr double kDefaultMaxLagSeconds = 0.160;

struct RawEmgBatch {
    std::vector<double> samples;
    double t0 = 0.0;
    double fs = kNominalEmgRate;
};

/// Rectified and smoothed envelope; all samples are non-negative.
struct ProcessedEmgBatch {
    std::vector<double> samples;
    double t0 = 0.0;
    double fs = kNominalEmgRate;
};

/// Per-bin gain applied between forward and inverse real FFT. gains[0] is DC.
struct SpectralMask {
    std::vector<double> gains;
    double binResolution = kNominalEmgRate / kDefaultBatchSize;

    std::size_t size() const { return gains.size(); }
    double frequency(std::size_t bin) const { return static_cast<double>(bin) * binResolution; }

    /// Linear-in-frequency resampling of the gain profile onto the bins of a
    /// batch of length `batchSize`; used for the short final batch of a recording.
    SpectralMask resampled(std::size_t batchSize, double fs) const;
};

struct SmoothingParams {
    std::size_t windowSize = 300;
    double decay = 0.0;

    void validate(std::size_t batchSize = kDefaultBatchSize) const;
};

struct TimestampedSeries {
    std::vector<double> times;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
    void validate() const;
};

std::size_t bin_count(std::size_t batchSize);

std::vector<double> apply_spectral_mask(std::span<const double> samples, const SpectralMask& mask);
RawEmgBatch apply_spectral_mask(const RawEmgBatch& batch, const SpectralMask& mask);

std::vector<double> rectify(std::span<const double> samples);

// Normalized trailing exponential moving average. Weight (1 - decay)^k goes to
// the sample k steps in the past; indices before the batch start read from the
// end of prevTail.
std::vector<double> smooth_ema(std::span<const double> samples,
                               std::span<const double> prevTail,
                               const SmoothingParams& params);

struct ProcessResult {
    ProcessedEmgBatch batch;
    std::vector<double> tail;  // last W-1 rectified-masked samples
};

ProcessResult process_batch(const RawEmgBatch& raw,
                            const SpectralMask& mask,
                            const SmoothingParams& params,
                            std::span<const double> prevTail);

SpectralMask default_optimal_mask(std::size_t batchSize = kDefaultBatchSize,
                                  double fs = kNominalEmgRate);

/// Gain of the default mask profile at a frequency (Hz).
double default_mask_gain(double frequencyHz);

TimestampedSeries resample_linear(const TimestampedSeries& series, std::span<const double> targetTimes);

struct CrossCorrelation {
    double peak = 0.0;
    int lag = 0;
};

/// Maximum over |lag| <= maxLag of corr(a[i], b[i + lag]) on the overlapping
/// window. Throws NumericError if either input has zero variance.
CrossCorrelation peak_cross_correlation(std::span<const double> a,
                                        std::span<const double> b,
                                        int maxLag);

int lag_samples(double seconds, double fs);

/// Stateful single-channel processor: owns the smoothing tail between batches.
class EmgPipeline {
public:
    EmgPipeline(SpectralMask mask, SmoothingParams params);

    ProcessedEmgBatch push(const RawEmgBatch& raw);
    void reset();

    const SpectralMask& mask() const { return mask_; }
    const SmoothingParams& params() const { return params_; }

private:
    SpectralMask mask_;
    SmoothingParams params_;
    std::vector<double> tail_;
};

/// Processes a whole EMG stream in consecutive batches of `batchSize`
/// samples (final batch may be shorter) and returns the processed series on
/// the same timestamps.
TimestampedSeries process_recording(const TimestampedSeries& emg,
                                    const SpectralMask& mask,
                                    const SmoothingParams& params,
                                    std::size_t batchSize = kDefaultBatchSize);

double estimate_rate(const TimestampedSeries& series);

}  // namespace koopgrip
