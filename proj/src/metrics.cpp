#include "koopgrip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "koopgrip/errors.hpp"
#include "koopgrip/io.hpp"

namespace koopgrip {

double wmape(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw InputError("wMAPE inputs differ in length");
    if (actual.empty()) throw InputError("wMAPE needs at least one sample");
    double err = 0.0, denom = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        err += std::abs(predicted[i] - actual[i]);
        denom += std::abs(actual[i]);
    }
    if (!(denom > 0.0)) throw NumericError("wMAPE undefined: all actual values are zero");
    return 100.0 * err / denom;
}

BlockEffects block_effects(std::span<const RunRecord> records, BlockBy by) {
    BlockEffects out;
    if (records.empty()) return out;
    std::map<std::string, std::pair<double, std::size_t>> acc;
    double total = 0.0;
    for (const auto& r : records) {
        auto& slot = acc[by == BlockBy::Subject ? r.subject : r.position];
        slot.first += r.metric;
        ++slot.second;
        total += r.metric;
    }
    out.grandMean = total / static_cast<double>(records.size());
    for (const auto& [label, sc] : acc) {
        const double mean = sc.first / static_cast<double>(sc.second);
        out.blocks.push_back({label, mean, mean - out.grandMean, sc.second});
    }
    return out;
}

AnovaTable anova_rbd(std::span<const RunRecord> records) {
    if (records.empty()) throw InputError("ANOVA needs records");
    std::set<std::string> positions, subjects;
    std::map<std::pair<std::string, std::string>, std::size_t> cells;
    for (const auto& r : records) {
        positions.insert(r.position);
        subjects.insert(r.subject);
        ++cells[{r.position, r.subject}];
    }
    const std::size_t reps = cells.begin()->second;
    if (cells.size() != positions.size() * subjects.size() ||
        std::any_of(cells.begin(), cells.end(), [&](const auto& c) { return c.second != reps; }))
        throw InputError("unsupported layout: ANOVA requires a balanced position x subject design");
    if (positions.size() < 2 || subjects.size() < 2) throw InputError("ANOVA needs at least two levels per factor");

    const auto P = static_cast<double>(positions.size());
    const auto S = static_cast<double>(subjects.size());
    const auto r = static_cast<double>(reps);
    const auto N = static_cast<double>(records.size());

    const auto pos = block_effects(records, BlockBy::Position);
    const auto sub = block_effects(records, BlockBy::Subject);
    const double gm = pos.grandMean;

    AnovaTable t;
    for (const auto& rec : records) t.totalSumSq += (rec.metric - gm) * (rec.metric - gm);
    double ssPos = 0.0, ssSub = 0.0;
    for (const auto& b : pos.blocks) ssPos += S * r * b.effect * b.effect;
    for (const auto& b : sub.blocks) ssSub += P * r * b.effect * b.effect;
    const double ssRes = std::max(0.0, t.totalSumSq - ssPos - ssSub);

    const int dfPos = static_cast<int>(P) - 1;
    const int dfSub = static_cast<int>(S) - 1;
    const int dfRes = static_cast<int>(N) - 1 - dfPos - dfSub;
    const double msRes = dfRes > 0 ? ssRes / dfRes : 0.0;

    auto row = [&](std::string name, int df, double ss) {
        AnovaRow a{std::move(name), df, ss, ss / df, 0.0, 1.0};
        if (msRes > 1e-300) {
            a.f = a.meanSq / msRes;
            a.p = f_survival(a.f, df, dfRes);
        } else if (ss > 0.0) {
            a.f = std::numeric_limits<double>::infinity();
            a.p = 0.0;
        }
        return a;
    };
    t.position = row("Position", dfPos, ssPos);
    t.subject = row("Subject", dfSub, ssSub);
    t.residual = {"Resids", dfRes, ssRes, msRes, 0.0, 1.0};
    return t;
}

double quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const auto j = std::min(i + 1, sorted.size() - 1);
    return sorted[i] + (pos - static_cast<double>(i)) * (sorted[j] - sorted[i]);
}

SummaryStats summary_stats(std::span<const double> values) {
    if (values.empty()) throw InputError("summary of an empty sample");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    SummaryStats out;
    out.min = s.front();
    out.max = s.back();
    out.q1 = quantile(s, 0.25);
    out.median = quantile(s, 0.5);
    out.q3 = quantile(s, 0.75);
    out.mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    return out;
}

namespace {

// Lentz's continued fraction for the incomplete beta function.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lnFront = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(lnFront);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
    if (!(f > 0.0)) return 1.0;
    if (std::isinf(f)) return 0.0;
    return incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

std::vector<RunRecord> read_run_records(std::istream& is) {
    std::vector<RunRecord> out;
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(is, line)) {
        ++lineNo;
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("subject", 0) == 0) continue;
        std::stringstream ss(line);
        RunRecord r;
        std::string rep, metric;
        if (!std::getline(ss, r.subject, ',') || !std::getline(ss, r.position, ',') || !std::getline(ss, rep, ',') ||
            !std::getline(ss, metric))
            throw InputError("malformed run record on line " + std::to_string(lineNo));
        r.replication = static_cast<int>(parse_double(rep));
        r.metric = parse_double(metric);
        out.push_back(std::move(r));
    }
    return out;
}

void write_run_records(std::ostream& os, std::span<const RunRecord> records) {
    os << "subject,position,replication,metric\n";
    for (const auto& r : records)
        os << r.subject << ',' << r.position << ',' << r.replication << ',' << format_double(r.metric) << '\n';
}

void write_anova(std::ostream& os, const AnovaTable& t) {
    os << "source\tdf\tsum_sq\tmean_sq\tF\tp\n";
    for (const auto* r : {&t.position, &t.subject}) {
        os << r->source << '\t' << r->df << '\t' << format_double(r->sumSq) << '\t' << format_double(r->meanSq) << '\t'
           << format_double(r->f) << '\t' << format_double(r->p) << '\n';
    }
    os << t.residual.source << '\t' << t.residual.df << '\t' << format_double(t.residual.sumSq) << '\t'
       << format_double(t.residual.meanSq) << "\t\t\n";
}

void write_effects(std::ostream& os, const BlockEffects& e, const std::string& title) {
    os << title << "\tmean\teffect\tn\n";
    for (const auto& b : e.blocks)
        os << b.block << '\t' << format_double(b.mean) << '\t' << format_double(b.effect) << '\t' << b.count << '\n';
    os << "overall\t" << format_double(e.grandMean) << "\t0\t\n";
}

void write_summary(std::ostream& os, const std::string& label, const SummaryStats& s) {
    os << label << '\t' << format_double(s.min) << '\t' << format_double(s.q1) << '\t' << format_double(s.median)
       << '\t' << format_double(s.mean) << '\t' << format_double(s.q3) << '\t' << format_double(s.max) << '\n';
}

}  // namespace koopgrip
