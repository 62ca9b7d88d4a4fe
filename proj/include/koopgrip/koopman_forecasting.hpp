#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "koopgrip/calibration.hpp"

namespace koopgrip {

inline constexpr double kDownsampledRate = 124.0;
inline constexpr std::size_t kDownsampledBatch = 62;

struct ForecastHyperparams {
    double windowModifier = 1.3;
    double smoothModifier = 1.1;
    int thinStep = 7;
    int delays = 8;
    int modes = 4;

    void validate() const;
    std::size_t prediction_window(std::size_t batch = kDownsampledBatch) const;
    std::size_t smoothing_neighbours(std::size_t batch = kDownsampledBatch) const;
    bool operator==(const ForecastHyperparams&) const = default;
};

/// Local linear fits with tricube weights over the `neighbours` nearest points,
/// no robustness iterations. With fewer points than `neighbours`, falls back
/// to an ordinary least-squares line through all points.
std::vector<double> lowess_smooth(std::span<const double> x, std::span<const double> y, std::size_t neighbours);

/// Same on a unit-spaced index; neighbours = ceil(fraction * n).
std::vector<double> lowess_smooth(std::span<const double> y, double fraction);

/// Rows ln(g_p + 10) * ln(g_q + 10) for p < q, lexicographic order.
Eigen::MatrixXd log_interaction_lift(const Eigen::MatrixXd& delayBlock);

/// [log_interaction_lift(delayBlock); delayBlock]
Eigen::MatrixXd stack_lifted(const Eigen::MatrixXd& delayBlock);

/// Keeps every step-th column counting back from the last one.
Eigen::MatrixXd thin(const Eigen::MatrixXd& matrix, int step);

struct DmdModel {
    Eigen::VectorXcd ritzValues;
    Eigen::MatrixXcd ritzVectors;  // unit-norm columns
    Eigen::VectorXd residuals;
    Eigen::VectorXcd amplitudes;
    std::size_t snapshotCount = 0;
    double dtEff = 7.0 / kDownsampledRate;

    std::size_t modes() const { return static_cast<std::size_t>(ritzValues.size()); }
};

/// QR-compressed DMD with refined Ritz vectors; keeps the `modes` pairs of
/// smallest data-driven residual (conjugates kept together).
DmdModel fit_dmd(const Eigen::MatrixXd& snapshots, int modes, double dtEff = 7.0 / kDownsampledRate,
                 double rankTolerance = 1e-10);

enum class AmplitudeSolver { NormalEquations, QR };

struct AmplitudeFit {
    Eigen::VectorXcd amplitudes;
    AmplitudeSolver solver = AmplitudeSolver::NormalEquations;
    double condition = 0.0;
};

/// Least-squares amplitudes for snapshots ~ sum_j z_j a_j lambda_j^(i-1).
AmplitudeFit fit_amplitudes(const DmdModel& model, const Eigen::MatrixXd& snapshots,
                            double conditionLimit = 1e12);

/// Real parts of sum_j z_j a_j lambda_j^(m-1+tau), tau = 1..horizon (columns).
Eigen::MatrixXd forecast_lifted(const DmdModel& model, std::size_t horizon);

/// Forecast of one lifted row, inverse-scaled and clamped to the scaler range.
std::vector<double> forecast(const DmdModel& model, std::size_t horizon, Eigen::Index readoutRow,
                             const MinMaxScaler& gripScaler);

struct BatchForecast {
    std::vector<double> times;   // target timestamps (s)
    std::vector<double> values;  // N
    DmdModel model;
};

/// One predictor step over the scaled-estimate history (124 Hz). Returns
/// nullopt during warm-up.
std::optional<BatchForecast> predict_batch(std::span<const double> estimateTimes,
                                           std::span<const double> estimatesScaled,
                                           const ForecastHyperparams& hyper,
                                           const MinMaxScaler& gripScaler,
                                           double horizonSeconds = 0.5,
                                           double rate = kDownsampledRate);

struct ForecastCorpusItem {
    TimestampedSeries estimatesScaled;  // estimate stream (scaled units)
    TimestampedSeries truth;            // measured grip, N
    std::vector<std::size_t> batchEnds; // estimate counts after each batch; empty = multiples of 62
};

struct GridSpec {
    std::vector<double> windowModifiers;
    std::vector<double> smoothModifiers;
    std::vector<int> thinSteps;
    std::vector<int> delays;
    std::vector<int> modes;

    std::vector<ForecastHyperparams> combinations() const;
};

struct TuningRow {
    ForecastHyperparams hyper;
    double meanWmape = 0.0;
    double medianWmape = 0.0;
    std::vector<double> perItem;

    double score() const { return meanWmape + medianWmape; }
};

/// Replays the batch predictor over one stream and returns the forecast
/// wMAPE (%) against the truth series.
double forecast_wmape(const ForecastCorpusItem& item, const ForecastHyperparams& hyper,
                      const MinMaxScaler& gripScaler, std::size_t batch = kDownsampledBatch);

/// Ranked by mean + median wMAPE, ties broken by lexicographic hyperparameters.
std::vector<TuningRow> hyperparameter_grid_search(std::span<const ForecastCorpusItem> corpus, const GridSpec& grid,
                                                  const MinMaxScaler& gripScaler);
std::vector<TuningRow> hyperparameter_grid_search_serial(std::span<const ForecastCorpusItem> corpus,
                                                         const GridSpec& grid, const MinMaxScaler& gripScaler);

}  // namespace koopgrip
