#pragma once

#include <cstddef>
#include <vector>

#include "koopgrip/io.hpp"
#include "koopgrip/koopman_estimation.hpp"
#include "koopgrip/koopman_forecasting.hpp"

namespace koopgrip {

struct PipelineConfig {
    SpectralMask mask = default_optimal_mask();
    SmoothingParams smoothing{300, 0.0};
    HankelParams hankel;
    IndicatorGrid grid;
    ForecastHyperparams forecast;
    std::size_t batchSize = kDefaultBatchSize;
    double zeroWindow = 5.0;
    double maxLagSeconds = kDefaultMaxLagSeconds;
};

/// Calibrated, zeroed grip force (N) from raw dynamometer readings.
TimestampedSeries grip_force(const Recording& rec, double zeroWindow = 5.0);

/// Processed EMG and grip force aligned on the downsampled EMG timestamps.
struct AlignedSeries {
    TimestampedSeries processed;    // full-rate processed EMG
    std::vector<double> times;      // downsampled timestamps
    std::vector<double> emg;        // downsampled processed EMG
    std::vector<double> grip;       // grip force resampled to `times`
};

AlignedSeries align_recording(const Recording& rec, const PipelineConfig& cfg);

/// Peak cross-correlation of processed EMG against grip force on the EMG grid.
CrossCorrelation recording_cross_correlation(const Recording& rec, const PipelineConfig& cfg);

EstimatorModel train_estimator(const Recording& calibration, const PipelineConfig& cfg);

struct LatencyReport {
    std::vector<double> processMs;
    std::vector<double> estimateMs;
    std::vector<double> predictMs;
    std::vector<double> totalMs;

    double percentile(double q) const;  // over totalMs
};

struct ForecastRecord {
    std::size_t batchIndex = 0;
    double time = 0.0;
    double grip = 0.0;
};

struct SimulationResult {
    TimestampedSeries estimates;          // N
    TimestampedSeries estimatesScaled;    // clamped scaled units
    std::vector<std::size_t> batchEnds;   // estimate count after each batch
    std::vector<ForecastRecord> forecasts;
    LatencyReport latency;
    std::size_t batches = 0;
};

/// Feeds the EMG stream batch by batch through process -> estimate -> smooth -> predict.
SimulationResult stream_simulate(const Recording& rec, const EstimatorModel& model, const PipelineConfig& cfg,
                                 bool realTime = false);

struct EvaluationMetrics {
    double estimationWmape = 0.0;
    double predictionWmape = 0.0;
    std::size_t forecastCount = 0;
};

EvaluationMetrics evaluate_simulation(const SimulationResult& sim, const TimestampedSeries& gripForce);

void write_forecasts(std::ostream& os, const std::vector<ForecastRecord>& forecasts);
std::vector<ForecastRecord> read_forecasts(std::istream& is);

}  // namespace koopgrip
