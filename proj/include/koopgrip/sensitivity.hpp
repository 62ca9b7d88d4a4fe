#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopgrip/signal_core.hpp"

namespace koopgrip {

inline constexpr std::size_t kMaskVariables = 248;

struct Bounds {
    std::vector<std::pair<double, double>> ranges;
    std::vector<std::string> names;  // optional, same length as ranges when present

    std::size_t size() const { return ranges.size(); }
    void validate() const;
    /// True when every range of *this lies inside the matching range of outer.
    bool nested_in(const Bounds& outer) const;
    bool operator==(const Bounds&) const = default;
};

/// One synchronized EMG/grip recording used by the objective.
struct ObjectiveRecording {
    TimestampedSeries emg;
    TimestampedSeries grip;  // calibrated and zeroed force
};

/// 248 mask gains (bins 1..248), smoothing window and decay; 250 variables.
struct DecisionVector {
    std::vector<double> maskGains;
    std::size_t windowSize = 300;
    double decay = 0.0;

    static DecisionVector from_flat(std::span<const double> x);
    std::vector<double> flat() const;
    SpectralMask mask(std::size_t batchSize = kDefaultBatchSize, double fs = kNominalEmgRate) const;
    SmoothingParams smoothing() const { return {windowSize, decay}; }
};

/// 0-5 mask gains, window 2-495, decay 0-0.05.
Bounds initial_decision_bounds();

/// Group id per variable: {mask bins}=0, {window}=1, {decay}=2.
std::vector<int> decision_groups();

/// Group id per variable, ids 0..G-1. Empty groups mean one group per variable.
struct Grouping {
    std::vector<int> groupOf;
    int count = 0;

    static Grouping from(std::span<const int> groupOf, std::size_t dims);
};

Eigen::MatrixXd latin_hypercube(const Bounds& bounds, std::size_t n, std::uint64_t seed);

/// Rows laid out per base point j as [A_j, AB_j^(1) .. AB_j^(G), B_j]; nBase*(G+2) rows.
Eigen::MatrixXd saltelli_sample(const Bounds& bounds, std::size_t nBase, std::span<const int> groups,
                                std::uint64_t seed);

struct SensitivityResult {
    std::vector<double> firstOrder;
    std::vector<double> totalOrder;  // empty for RBD-FAST
    std::vector<std::pair<double, double>> firstCi;
    std::vector<std::pair<double, double>> totalCi;
    std::vector<std::string> labels;
};

SensitivityResult sobol_indices(const Eigen::MatrixXd& samples, std::span<const double> outputs,
                                std::span<const int> groups, std::size_t nBoot, std::uint64_t seed);

/// Each column is a random permutation of points on the periodic curve
/// x = 1/2 + asin(sin s)/pi, s uniform on [-pi, pi), mapped to bounds.
Eigen::MatrixXd rbdfast_sample(const Bounds& bounds, std::size_t n, std::uint64_t seed);

SensitivityResult rbdfast_indices(const Eigen::MatrixXd& samples, std::span<const double> outputs,
                                  std::size_t harmonics, std::size_t nBoot, std::uint64_t seed);

/// First-order RBD-FAST index of one input column, bias corrected.
double rbdfast_first_order(std::span<const double> x, std::span<const double> y, std::size_t harmonics);

/// 1 - mean peak cross-correlation between processed EMG and grip.
double objective(std::span<const ObjectiveRecording> dataset, const DecisionVector& dv,
                 double maxLagSeconds = kDefaultMaxLagSeconds);

/// Objective on every sample row (OpenMP over rows).
std::vector<double> evaluate_objective(std::span<const ObjectiveRecording> dataset, const Eigen::MatrixXd& samples,
                                       double maxLagSeconds = kDefaultMaxLagSeconds);
std::vector<double> evaluate_objective_serial(std::span<const ObjectiveRecording> dataset,
                                              const Eigen::MatrixXd& samples,
                                              double maxLagSeconds = kDefaultMaxLagSeconds);

struct ProjectionSummary {
    std::vector<double> binCenters;
    std::vector<double> binMeans;   // NaN for empty bins
    std::vector<std::size_t> binCounts;
    std::vector<double> trend;      // centred moving average over non-empty bins
};

ProjectionSummary projection_summary(const Eigen::MatrixXd& samples, std::span<const double> outputs,
                                     std::size_t varIndex, std::size_t nBins, std::size_t smoothWidth = 3);

struct NarrowingStep {
    int step = 0;
    Bounds bounds;
    std::vector<std::pair<std::size_t, double>> topIndices;  // variable, index value
    bool noop = false;
};

/// Append-only history of manually narrowed bounds.
class NarrowingRecord {
public:
    /// Throws ConfigError when the new bounds are not inside the previous step's.
    const NarrowingStep& append(int step, Bounds bounds, std::vector<std::pair<std::size_t, double>> top);

    const std::vector<NarrowingStep>& steps() const { return steps_; }

    void write(std::ostream& os) const;
    static NarrowingRecord read(std::istream& is);

private:
    std::vector<NarrowingStep> steps_;
};

void write_sa_report(std::ostream& os, const SensitivityResult& result);

}  // namespace koopgrip
