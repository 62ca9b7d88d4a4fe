#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace koopgrip {

/// 100 * sum|pred - actual| / sum|actual|.
double wmape(std::span<const double> actual, std::span<const double> predicted);

struct RunRecord {
    std::string subject;
    std::string position;
    int replication = 1;
    double metric = 0.0;
};

enum class BlockBy { Subject, Position };

struct BlockEffect {
    std::string block;
    double mean = 0.0;
    double effect = 0.0;
    std::size_t count = 0;
};

struct BlockEffects {
    double grandMean = 0.0;
    std::vector<BlockEffect> blocks;  // sorted by block label
};

BlockEffects block_effects(std::span<const RunRecord> records, BlockBy by);

struct AnovaRow {
    std::string source;
    int df = 0;
    double sumSq = 0.0;
    double meanSq = 0.0;
    double f = 0.0;
    double p = 1.0;
};

struct AnovaTable {
    AnovaRow position;
    AnovaRow subject;
    AnovaRow residual;
    double totalSumSq = 0.0;
};

/// Additive two-way ANOVA (position + subject blocks), balanced designs only.
AnovaTable anova_rbd(std::span<const RunRecord> records);

struct SummaryStats {
    double min = 0.0, q1 = 0.0, median = 0.0, mean = 0.0, q3 = 0.0, max = 0.0;
};

/// Quartiles by linear interpolation of order statistics.
SummaryStats summary_stats(std::span<const double> values);
double quantile(std::span<const double> sorted, double q);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
/// Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.
double f_survival(double f, double d1, double d2);

std::vector<RunRecord> read_run_records(std::istream& is);
void write_run_records(std::ostream& os, std::span<const RunRecord> records);
void write_anova(std::ostream& os, const AnovaTable& table);
void write_effects(std::ostream& os, const BlockEffects& effects, const std::string& title);
void write_summary(std::ostream& os, const std::string& label, const SummaryStats& s);

}  // namespace koopgrip
