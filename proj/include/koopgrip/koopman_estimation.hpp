#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "koopgrip/calibration.hpp"

namespace koopgrip {

struct HankelParams {
    int delays = 60;
    int downsampleFactor = 8;

    void validate() const;
};

struct IndicatorGrid {
    int divisions = 22;
    double exponent = 1.8;
    int tau1 = 29;
    int tau2 = 59;
    double minDensity = 0.001;

    void validate(int delays) const;
    std::vector<double> edges() const;
    std::int64_t candidate_count() const;
};

/// (d+1) x (N-d) Hankel matrix; row r holds samples r .. N-d-1+r.
Eigen::MatrixXd hankel_lift(std::span<const double> series, int delays);

/// b_i = (i / divisions)^exponent, i = 0..divisions.
std::vector<double> power_grid_bounds(int divisions, double exponent);

struct IndicatorObservables {
    Eigen::MatrixXd rows;              // |kept| x columns, entries 0/1
    std::vector<std::int32_t> kept;    // flat cell ids, ascending
};

/// Builds all candidate subregion indicators on Hankel rows (0, tau1, tau2)
/// and keeps those with density >= grid.minDensity.
IndicatorObservables indicator_observables(const Eigen::MatrixXd& hankel, const IndicatorGrid& grid);

/// Indicator rows for a frozen list of cells (inference path).
Eigen::MatrixXd indicator_rows(const Eigen::MatrixXd& hankel, const IndicatorGrid& grid,
                               std::span<const std::int32_t> kept);

/// Every-`factor`-th sample starting at index `phase`.
std::vector<double> downsample(std::span<const double> series, int factor, std::size_t phase = 0);

struct LiftedMatrices {
    Eigen::MatrixXd E;
    Eigen::MatrixXd G;
    std::vector<std::int32_t> kept;
};

/// Inputs are already scaled; E = [hankel(emg); indicators], G = [hankel(grip); 0].
LiftedMatrices build_lifted_matrices(std::span<const double> emgScaled, std::span<const double> gripScaled,
                                     const HankelParams& hankel, const IndicatorGrid& grid);

/// K = G pinv(E), singular values below 1e-10 * sigma_max treated as zero.
Eigen::MatrixXd fit_static_koopman(const Eigen::MatrixXd& E, const Eigen::MatrixXd& G,
                                   double relativeCutoff = 1e-10);

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& A, double relativeCutoff = 1e-10);

struct EstimatorModel {
    Eigen::MatrixXd K;
    MinMaxScaler emgScaler;
    MinMaxScaler gripScaler;
    HankelParams hankel;
    IndicatorGrid grid;
    std::vector<std::int32_t> keptSubregions;
    double gripFloor = -1.0;  // scaled units
    double emgRate = kNominalEmgRate;
    CalibrationPolynomial calibration;

    /// Minimum processed-EMG window length.
    std::size_t min_window() const;
};

/// Trains on processed EMG and grip sampled on the same (already downsampled) timestamps.
EstimatorModel fit_estimator(std::span<const double> processedEmgDs, std::span<const double> gripDs,
                             const HankelParams& hankel = {}, const IndicatorGrid& grid = {},
                             double emgRate = kNominalEmgRate);

/// Scaled (clamped) estimates for a processed EMG window. Downsamples from
/// index 0 of the window; returns one value per Hankel column (row-0 readout).
std::vector<double> estimate_scaled(const EstimatorModel& model, std::span<const double> processedEmg);

/// Grip estimates in newtons.
std::vector<double> estimate_batch(const EstimatorModel& model, std::span<const double> processedEmg);

void write_model(std::ostream& os, const EstimatorModel& model);
EstimatorModel read_model(std::istream& is);

}  // namespace koopgrip
