#include "koopgrip/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "koopgrip/calibration.hpp"
#include "koopgrip/errors.hpp"
#include "koopgrip/metrics.hpp"

namespace koopgrip {

TimestampedSeries grip_force(const Recording& rec, double zeroWindow) {
    return zero_offset(calibrate_dynamometer(rec.grip), zeroWindow);
}

AlignedSeries align_recording(const Recording& rec, const PipelineConfig& cfg) {
    AlignedSeries out;
    out.processed = process_recording(rec.emg, cfg.mask, cfg.smoothing, cfg.batchSize);
    const int f = cfg.hankel.downsampleFactor;
    out.times = downsample(out.processed.times, f);
    out.emg = downsample(out.processed.values, f);
    out.grip = resample_linear(grip_force(rec, cfg.zeroWindow), out.times).values;
    return out;
}

CrossCorrelation recording_cross_correlation(const Recording& rec, const PipelineConfig& cfg) {
    const auto processed = process_recording(rec.emg, cfg.mask, cfg.smoothing, cfg.batchSize);
    const auto grip = resample_linear(grip_force(rec, cfg.zeroWindow), processed.times);
    const int maxLag = lag_samples(cfg.maxLagSeconds, estimate_rate(rec.emg));
    return peak_cross_correlation(grip.values, processed.values, maxLag);
}

EstimatorModel train_estimator(const Recording& calibration, const PipelineConfig& cfg) {
    const auto aligned = align_recording(calibration, cfg);
    return fit_estimator(aligned.emg, aligned.grip, cfg.hankel, cfg.grid, estimate_rate(calibration.emg));
}

double LatencyReport::percentile(double q) const {
    if (totalMs.empty()) return 0.0;
    std::vector<double> sorted = totalMs;
    std::sort(sorted.begin(), sorted.end());
    return quantile(sorted, q);
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

SimulationResult stream_simulate(const Recording& rec, const EstimatorModel& model, const PipelineConfig& cfg,
                                 bool realTime) {
    using Clock = std::chrono::steady_clock;
    rec.emg.validate();
    if (rec.emg.size() < model.min_window()) throw InputError("EMG stream shorter than the estimator window");
    if (model.hankel.downsampleFactor != cfg.hankel.downsampleFactor || model.hankel.delays != cfg.hankel.delays)
        throw ConfigError("pipeline Hankel settings differ from the model's");
    const double fs = estimate_rate(rec.emg);
    if (std::abs(fs - model.emgRate) > 0.01 * model.emgRate)
        throw ConfigError("recording EMG rate differs from the model's by more than 1%");
    const auto f = static_cast<std::size_t>(model.hankel.downsampleFactor);
    const auto d = static_cast<std::size_t>(model.hankel.delays);

    EmgPipeline pipe(cfg.mask, cfg.smoothing);
    std::vector<double> processed;
    processed.reserve(rec.emg.size());
    SimulationResult sim;
    std::size_t estimated = 0;  // downsampled indices with an estimate
    const auto wallStart = Clock::now();

    for (std::size_t start = 0; start + 1 < rec.emg.size(); start += cfg.batchSize) {
        const std::size_t len = std::min(cfg.batchSize, rec.emg.size() - start);
        if (len < 2) break;
        if (realTime) {
            const double arrival = static_cast<double>(start + len) / fs;
            std::this_thread::sleep_until(wallStart + std::chrono::duration_cast<Clock::duration>(
                                                          std::chrono::duration<double>(arrival)));
        }
        RawEmgBatch raw;
        raw.samples.assign(rec.emg.values.begin() + static_cast<std::ptrdiff_t>(start),
                           rec.emg.values.begin() + static_cast<std::ptrdiff_t>(start + len));
        raw.t0 = rec.emg.times[start];
        raw.fs = fs;

        const auto t0 = Clock::now();
        const auto batch = pipe.push(raw);
        processed.insert(processed.end(), batch.samples.begin(), batch.samples.end());
        const double processMs = elapsed_ms(t0);

        const auto t1 = Clock::now();
        const std::size_t dsCount = (processed.size() + f - 1) / f;
        if (dsCount > d && dsCount - d > estimated) {
            const std::span<const double> window(processed.data() + estimated * f, processed.size() - estimated * f);
            const auto scaled = estimate_scaled(model, window);
            for (std::size_t j = 0; j < scaled.size(); ++j) {
                const double t = rec.emg.times[(estimated + j) * f];
                sim.estimatesScaled.times.push_back(t);
                sim.estimatesScaled.values.push_back(scaled[j]);
                sim.estimates.times.push_back(t);
                sim.estimates.values.push_back(model.gripScaler.invert(scaled[j]));
            }
            estimated += scaled.size();
        }
        const double estimateMs = elapsed_ms(t1);
        sim.batchEnds.push_back(estimated);

        const auto t2 = Clock::now();
        try {
            const auto fc = predict_batch(sim.estimatesScaled.times, sim.estimatesScaled.values, cfg.forecast,
                                          model.gripScaler);
            if (fc)
                for (std::size_t i = 0; i < fc->times.size(); ++i)
                    sim.forecasts.push_back({sim.batches, fc->times[i], fc->values[i]});
        } catch (const NumericError&) {
            // an ill-posed batch yields no forecast; the next batch refits from scratch
        }
        const double predictMs = elapsed_ms(t2);

        sim.latency.processMs.push_back(processMs);
        sim.latency.estimateMs.push_back(estimateMs);
        sim.latency.predictMs.push_back(predictMs);
        sim.latency.totalMs.push_back(elapsed_ms(t0));
        ++sim.batches;
    }
    return sim;
}

EvaluationMetrics evaluate_simulation(const SimulationResult& sim, const TimestampedSeries& gripForce) {
    EvaluationMetrics m;
    if (sim.estimates.empty()) throw InputError("simulation produced no estimates");
    const auto truthEst = resample_linear(gripForce, sim.estimates.times);
    m.estimationWmape = wmape(truthEst.values, sim.estimates.values);

    std::vector<double> times, predicted;
    for (const auto& r : sim.forecasts) {
        if (r.time > gripForce.times.back()) continue;
        times.push_back(r.time);
        predicted.push_back(r.grip);
    }
    m.forecastCount = times.size();
    if (!times.empty()) {
        const auto truthPred = resample_linear(gripForce, times);
        m.predictionWmape = wmape(truthPred.values, predicted);
    } else {
        m.predictionWmape = std::numeric_limits<double>::quiet_NaN();
    }
    return m;
}

void write_forecasts(std::ostream& os, const std::vector<ForecastRecord>& forecasts) {
    os << "batch_index,t_forecast_s,grip_forecast_N\n";
    for (const auto& r : forecasts) os << r.batchIndex << ',' << format_double(r.time) << ',' << format_double(r.grip) << '\n';
}

std::vector<ForecastRecord> read_forecasts(std::istream& is) {
    std::vector<ForecastRecord> out;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (first) {
            first = false;
            if (line.rfind("batch", 0) == 0) continue;
        }
        std::istringstream ss(line);
        std::string b, t, g;
        if (!std::getline(ss, b, ',') || !std::getline(ss, t, ',') || !std::getline(ss, g))
            throw InputError("forecast line needs batch_index,t_forecast_s,grip_forecast_N: " + line);
        out.push_back({static_cast<std::size_t>(parse_double(b)), parse_double(t), parse_double(g)});
    }
    return out;
}

}  // namespace koopgrip
