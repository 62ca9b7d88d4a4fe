#include "koopgrip/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/random/sobol.hpp>
#include <unsupported/Eigen/FFT>

#include "koopgrip/errors.hpp"
#include "koopgrip/io.hpp"
#include "koopgrip/kernels.hpp"
#include "koopgrip/metrics.hpp"

namespace koopgrip {

void Bounds::validate() const {
    if (!names.empty() && names.size() != ranges.size()) throw ConfigError("bounds names and ranges differ in length");
    for (const auto& [lo, hi] : ranges)
        if (!(lo <= hi)) throw ConfigError("bounds require lower <= upper");
}

bool Bounds::nested_in(const Bounds& outer) const {
    if (ranges.size() != outer.ranges.size()) return false;
    for (std::size_t i = 0; i < ranges.size(); ++i)
        if (ranges[i].first < outer.ranges[i].first || ranges[i].second > outer.ranges[i].second) return false;
    return true;
}

DecisionVector DecisionVector::from_flat(std::span<const double> x) {
    if (x.size() != kMaskVariables + 2) throw InputError("decision vector needs 250 entries");
    DecisionVector dv;
    dv.maskGains.assign(x.begin(), x.begin() + kMaskVariables);
    dv.windowSize = static_cast<std::size_t>(std::max(2L, std::lround(x[kMaskVariables])));
    dv.decay = x[kMaskVariables + 1];
    return dv;
}

std::vector<double> DecisionVector::flat() const {
    std::vector<double> x = maskGains;
    x.push_back(static_cast<double>(windowSize));
    x.push_back(decay);
    return x;
}

SpectralMask DecisionVector::mask(std::size_t batchSize, double fs) const {
    SpectralMask m;
    m.binResolution = fs / static_cast<double>(kDefaultBatchSize);
    m.gains.reserve(maskGains.size() + 1);
    m.gains.push_back(0.0);
    m.gains.insert(m.gains.end(), maskGains.begin(), maskGains.end());
    if (batchSize != kDefaultBatchSize) return m.resampled(batchSize, fs);
    return m;
}

Bounds initial_decision_bounds() {
    Bounds b;
    for (std::size_t k = 1; k <= kMaskVariables; ++k) {
        b.ranges.emplace_back(0.0, 5.0);
        b.names.push_back("mask_" + std::to_string(2 * k) + "Hz");
    }
    b.ranges.emplace_back(2.0, 495.0);
    b.names.emplace_back("window_size");
    b.ranges.emplace_back(0.0, 0.05);
    b.names.emplace_back("decay");
    return b;
}

std::vector<int> decision_groups() {
    std::vector<int> g(kMaskVariables, 0);
    g.push_back(1);
    g.push_back(2);
    return g;
}

Grouping Grouping::from(std::span<const int> groupOf, std::size_t dims) {
    Grouping g;
    if (groupOf.empty()) {
        g.groupOf.resize(dims);
        std::iota(g.groupOf.begin(), g.groupOf.end(), 0);
        g.count = static_cast<int>(dims);
        return g;
    }
    if (groupOf.size() != dims) throw InputError("group labels must cover every variable");
    g.groupOf.assign(groupOf.begin(), groupOf.end());
    g.count = *std::max_element(groupOf.begin(), groupOf.end()) + 1;
    std::vector<bool> seen(static_cast<std::size_t>(g.count), false);
    for (int id : groupOf) {
        if (id < 0) throw InputError("group ids must be non-negative");
        seen[static_cast<std::size_t>(id)] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw InputError("group ids must be contiguous");
    return g;
}

namespace {

double scale(double u, const std::pair<double, double>& r) { return r.first + u * (r.second - r.first); }

std::vector<std::string> labels_for(const Grouping& g, std::size_t dims) {
    std::vector<std::string> labels(static_cast<std::size_t>(g.count));
    if (static_cast<std::size_t>(g.count) == dims) {
        for (std::size_t i = 0; i < dims; ++i) labels[i] = "x" + std::to_string(i);
    } else {
        for (int i = 0; i < g.count; ++i) labels[static_cast<std::size_t>(i)] = "group" + std::to_string(i);
    }
    return labels;
}

double population_variance(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size());
}

std::pair<double, double> percentile_interval(std::vector<double> values, double point) {
    std::sort(values.begin(), values.end());
    const double lo = quantile(values, 0.025);
    const double hi = quantile(values, 0.975);
    // the interval always brackets the point estimate
    return {std::min(lo, point), std::max(hi, point)};
}

}  // namespace

Eigen::MatrixXd latin_hypercube(const Bounds& bounds, std::size_t n, std::uint64_t seed) {
    bounds.validate();
    if (n < 1) throw ConfigError("latin hypercube needs n >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto dims = bounds.size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    std::vector<std::size_t> perm(n);
    for (std::size_t c = 0; c < dims; ++c) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t r = 0; r < n; ++r) {
            const double u = (static_cast<double>(perm[r]) + unit(rng)) / static_cast<double>(n);
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = scale(u, bounds.ranges[c]);
        }
    }
    return out;
}

Eigen::MatrixXd saltelli_sample(const Bounds& bounds, std::size_t nBase, std::span<const int> groups,
                                std::uint64_t seed) {
    bounds.validate();
    if (nBase < 1) throw ConfigError("Saltelli sampling needs nBase >= 1");
    const std::size_t dims = bounds.size();
    const Grouping g = Grouping::from(groups, dims);
    const auto G = static_cast<std::size_t>(g.count);

    // Sobol points in 2*dims dimensions with a seeded random digital shift.
    boost::random::sobol qrng(static_cast<unsigned>(2 * dims));
    std::mt19937_64 rng(seed);
    std::vector<std::uint64_t> shift(2 * dims);
    for (auto& s : shift) s = rng();
    qrng.discard(2 * dims);  // skip the origin

    const std::size_t rowsPer = G + 2;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(nBase * rowsPer), static_cast<Eigen::Index>(dims));
    std::vector<double> a(dims), b(dims);
    for (std::size_t j = 0; j < nBase; ++j) {
        for (std::size_t c = 0; c < 2 * dims; ++c) {
            const std::uint64_t bits = qrng() ^ shift[c];
            const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
            (c < dims ? a[c] : b[c - dims]) = scale(u, bounds.ranges[c % dims]);
        }
        const auto base = static_cast<Eigen::Index>(j * rowsPer);
        for (std::size_t c = 0; c < dims; ++c) {
            const auto col = static_cast<Eigen::Index>(c);
            out(base, col) = a[c];
            for (std::size_t grp = 0; grp < G; ++grp)
                out(base + 1 + static_cast<Eigen::Index>(grp), col) =
                    g.groupOf[c] == static_cast<int>(grp) ? b[c] : a[c];
            out(base + static_cast<Eigen::Index>(G) + 1, col) = b[c];
        }
    }
    return out;
}

namespace {

struct SobolEstimate {
    std::vector<double> first;
    std::vector<double> total;
};

SobolEstimate sobol_estimate(std::span<const double> y, std::size_t G, std::span<const std::size_t> baseIdx) {
    const std::size_t rowsPer = G + 2;
    const std::size_t n = baseIdx.size();
    std::vector<double> ab;
    ab.reserve(2 * n);
    for (std::size_t j : baseIdx) {
        ab.push_back(y[j * rowsPer]);
        ab.push_back(y[j * rowsPer + G + 1]);
    }
    const double var = population_variance(ab);
    SobolEstimate e{std::vector<double>(G, 0.0), std::vector<double>(G, 0.0)};
    if (!(var > 0.0)) return e;
    for (std::size_t grp = 0; grp < G; ++grp) {
        double s1 = 0.0, st = 0.0;
        for (std::size_t j : baseIdx) {
            const double fa = y[j * rowsPer];
            const double fb = y[j * rowsPer + G + 1];
            const double fab = y[j * rowsPer + 1 + grp];
            s1 += fb * (fab - fa);
            st += (fa - fab) * (fa - fab);
        }
        e.first[grp] = s1 / static_cast<double>(n) / var;
        e.total[grp] = 0.5 * st / static_cast<double>(n) / var;
    }
    return e;
}

}  // namespace

SensitivityResult sobol_indices(const Eigen::MatrixXd& samples, std::span<const double> outputs,
                                std::span<const int> groups, std::size_t nBoot, std::uint64_t seed) {
    const auto dims = static_cast<std::size_t>(samples.cols());
    const Grouping g = Grouping::from(groups, dims);
    const auto G = static_cast<std::size_t>(g.count);
    const std::size_t rowsPer = G + 2;
    if (static_cast<std::size_t>(samples.rows()) != outputs.size())
        throw InputError("outputs do not match sample rows");
    if (outputs.empty() || outputs.size() % rowsPer != 0)
        throw InputError("output count is not a multiple of (groups + 2)");
    const std::size_t nBase = outputs.size() / rowsPer;

    std::vector<std::size_t> all(nBase);
    std::iota(all.begin(), all.end(), 0);
    const SobolEstimate point = sobol_estimate(outputs, G, all);

    SensitivityResult r;
    r.firstOrder = point.first;
    r.totalOrder = point.total;
    r.labels = labels_for(g, dims);
    r.firstCi.resize(G);
    r.totalCi.resize(G);
    if (nBoot == 0) {
        for (std::size_t i = 0; i < G; ++i) {
            r.firstCi[i] = {point.first[i], point.first[i]};
            r.totalCi[i] = {point.total[i], point.total[i]};
        }
        return r;
    }
    const Eigen::MatrixXd boot = kernels::bootstrap(nBoot, 2 * G, seed, [&](std::mt19937_64& rng, std::vector<double>& row) {
        std::uniform_int_distribution<std::size_t> pick(0, nBase - 1);
        std::vector<std::size_t> idx(nBase);
        for (auto& i : idx) i = pick(rng);
        const auto e = sobol_estimate(outputs, G, idx);
        std::copy(e.first.begin(), e.first.end(), row.begin());
        std::copy(e.total.begin(), e.total.end(), row.begin() + static_cast<std::ptrdiff_t>(G));
    });
    for (std::size_t i = 0; i < G; ++i) {
        const auto c1 = boot.col(static_cast<Eigen::Index>(i));
        const auto ct = boot.col(static_cast<Eigen::Index>(G + i));
        r.firstCi[i] = percentile_interval({c1.begin(), c1.end()}, point.first[i]);
        r.totalCi[i] = percentile_interval({ct.begin(), ct.end()}, point.total[i]);
    }
    return r;
}

Eigen::MatrixXd rbdfast_sample(const Bounds& bounds, std::size_t n, std::uint64_t seed) {
    bounds.validate();
    if (n < 2) throw ConfigError("RBD-FAST sampling needs n >= 2");
    std::mt19937_64 rng(seed);
    const auto dims = bounds.size();
    std::vector<double> curve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double s = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        curve[k] = 0.5 + std::asin(std::sin(s)) / std::numbers::pi;
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    std::vector<std::size_t> perm(n);
    for (std::size_t c = 0; c < dims; ++c) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t r = 0; r < n; ++r)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = scale(curve[perm[r]], bounds.ranges[c]);
    }
    return out;
}

double rbdfast_first_order(std::span<const double> x, std::span<const double> y, std::size_t harmonics) {
    const std::size_t n = x.size();
    if (y.size() != n) throw InputError("RBD-FAST inputs differ in length");
    if (harmonics < 1 || 2 * harmonics >= n) throw ConfigError("RBD-FAST harmonics must satisfy 1 <= M < n/2");

    // Sort by x, then walk up the even ranks and back down the odd ranks: a
    // periodic traversal of the search curve.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> reordered;
    reordered.reserve(n);
    for (std::size_t i = 0; i < n; i += 2) reordered.push_back(y[order[i]]);
    const std::size_t lastOdd = n % 2 == 0 ? n - 1 : n - 2;
    for (std::size_t i = 0; i + 1 <= lastOdd; i += 2) reordered.push_back(y[order[lastOdd - i]]);
    const double mean = std::accumulate(reordered.begin(), reordered.end(), 0.0) / static_cast<double>(n);
    for (auto& v : reordered) v -= mean;

    thread_local Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, reordered);

    double total = 0.0;
    double partial = 0.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const double w = (n % 2 == 0 && k == n / 2) ? 1.0 : 2.0;
        const double p = w * std::norm(spec[k]);
        total += p;
        if (k <= harmonics) partial += p;
    }
    if (!(total > 0.0)) return 0.0;
    const double s = partial / total;
    const double lambda = 2.0 * static_cast<double>(harmonics) / static_cast<double>(n);
    return s - lambda / (1.0 - lambda) * (1.0 - s);
}

SensitivityResult rbdfast_indices(const Eigen::MatrixXd& samples, std::span<const double> outputs,
                                  std::size_t harmonics, std::size_t nBoot, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(samples.rows());
    const auto dims = static_cast<std::size_t>(samples.cols());
    if (outputs.size() != n) throw InputError("outputs do not match sample rows");
    if (harmonics < 1 || 2 * harmonics >= n) throw ConfigError("RBD-FAST harmonics must satisfy 1 <= M < n/2");

    SensitivityResult r;
    r.firstOrder.resize(dims);
    r.firstCi.resize(dims);
    r.labels = labels_for(Grouping::from({}, dims), dims);
    for (std::size_t c = 0; c < dims; ++c) {
        const Eigen::VectorXd col = samples.col(static_cast<Eigen::Index>(c));
        r.firstOrder[c] = rbdfast_first_order({col.data(), n}, outputs, harmonics);
    }
    if (nBoot == 0) {
        for (std::size_t c = 0; c < dims; ++c) r.firstCi[c] = {r.firstOrder[c], r.firstOrder[c]};
        return r;
    }
    const Eigen::MatrixXd boot = kernels::bootstrap(nBoot, dims, seed, [&](std::mt19937_64& rng, std::vector<double>& row) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) i = pick(rng);
        std::vector<double> x(n), y(n);
        for (std::size_t c = 0; c < dims; ++c) {
            for (std::size_t k = 0; k < n; ++k) {
                x[k] = samples(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(c));
                y[k] = outputs[idx[k]];
            }
            row[c] = rbdfast_first_order(x, y, harmonics);
        }
    });
    for (std::size_t c = 0; c < dims; ++c) {
        const auto col = boot.col(static_cast<Eigen::Index>(c));
        r.firstCi[c] = percentile_interval({col.begin(), col.end()}, r.firstOrder[c]);
    }
    return r;
}

double objective(std::span<const ObjectiveRecording> dataset, const DecisionVector& dv, double maxLagSeconds) {
    if (dataset.empty()) throw InputError("objective needs at least one recording");
    double sum = 0.0;
    for (const auto& rec : dataset) {
        const double fs = estimate_rate(rec.emg);
        const auto processed = process_recording(rec.emg, dv.mask(kDefaultBatchSize, fs), dv.smoothing());
        const auto grip = resample_linear(rec.grip, rec.emg.times);
        sum += peak_cross_correlation(grip.values, processed.values, lag_samples(maxLagSeconds, fs)).peak;
    }
    return 1.0 - sum / static_cast<double>(dataset.size());
}

std::vector<double> evaluate_objective(std::span<const ObjectiveRecording> dataset, const Eigen::MatrixXd& samples,
                                       double maxLagSeconds) {
    return kernels::map_rows(samples, [&](const Eigen::VectorXd& x) {
        return objective(dataset, DecisionVector::from_flat({x.data(), static_cast<std::size_t>(x.size())}),
                         maxLagSeconds);
    });
}

std::vector<double> evaluate_objective_serial(std::span<const ObjectiveRecording> dataset,
                                              const Eigen::MatrixXd& samples, double maxLagSeconds) {
    return kernels::map_rows_serial(samples, [&](const Eigen::VectorXd& x) {
        return objective(dataset, DecisionVector::from_flat({x.data(), static_cast<std::size_t>(x.size())}),
                         maxLagSeconds);
    });
}

ProjectionSummary projection_summary(const Eigen::MatrixXd& samples, std::span<const double> outputs,
                                     std::size_t varIndex, std::size_t nBins, std::size_t smoothWidth) {
    if (nBins < 2) throw ConfigError("projection summary needs at least 2 bins");
    if (varIndex >= static_cast<std::size_t>(samples.cols())) throw ConfigError("variable index out of range");
    if (outputs.size() != static_cast<std::size_t>(samples.rows())) throw InputError("outputs do not match samples");
    const Eigen::VectorXd x = samples.col(static_cast<Eigen::Index>(varIndex));
    const double lo = x.minCoeff();
    const double hi = x.maxCoeff();
    const double width = hi > lo ? (hi - lo) / static_cast<double>(nBins) : 1.0;

    ProjectionSummary s;
    s.binCenters.resize(nBins);
    s.binCounts.assign(nBins, 0);
    std::vector<double> sums(nBins, 0.0);
    for (std::size_t b = 0; b < nBins; ++b) s.binCenters[b] = lo + (static_cast<double>(b) + 0.5) * width;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        auto b = static_cast<std::size_t>((x[i] - lo) / width);
        b = std::min(b, nBins - 1);
        sums[b] += outputs[static_cast<std::size_t>(i)];
        ++s.binCounts[b];
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.binMeans.resize(nBins);
    std::vector<std::size_t> filled;
    for (std::size_t b = 0; b < nBins; ++b) {
        s.binMeans[b] = s.binCounts[b] ? sums[b] / static_cast<double>(s.binCounts[b]) : nan;
        if (s.binCounts[b]) filled.push_back(b);
    }
    s.trend.assign(nBins, nan);
    const std::size_t half = smoothWidth / 2;
    for (std::size_t f = 0; f < filled.size(); ++f) {
        const std::size_t from = f >= half ? f - half : 0;
        const std::size_t to = std::min(filled.size() - 1, f + half);
        double acc = 0.0;
        for (std::size_t k = from; k <= to; ++k) acc += s.binMeans[filled[k]];
        s.trend[filled[f]] = acc / static_cast<double>(to - from + 1);
    }
    return s;
}

const NarrowingStep& NarrowingRecord::append(int step, Bounds bounds, std::vector<std::pair<std::size_t, double>> top) {
    bounds.validate();
    NarrowingStep s{step, std::move(bounds), std::move(top), false};
    if (!steps_.empty()) {
        const auto& prev = steps_.back();
        if (step <= prev.step) throw ConfigError("narrowing steps must increase");
        if (!s.bounds.nested_in(prev.bounds)) throw ConfigError("narrowed bounds must lie within the previous step's bounds");
        s.noop = s.bounds.ranges == prev.bounds.ranges;
    }
    steps_.push_back(std::move(s));
    return steps_.back();
}

void NarrowingRecord::write(std::ostream& os) const {
    for (const auto& s : steps_) {
        os << "step\t" << s.step << "\tnoop\t" << (s.noop ? 1 : 0) << '\n';
        os << "bounds\t" << s.bounds.size() << '\n';
        for (std::size_t i = 0; i < s.bounds.size(); ++i) {
            os << format_double(s.bounds.ranges[i].first) << '\t' << format_double(s.bounds.ranges[i].second) << '\t'
               << (s.bounds.names.empty() ? std::string("-") : s.bounds.names[i]) << '\n';
        }
        os << "top\t" << s.topIndices.size() << '\n';
        for (const auto& [var, value] : s.topIndices) os << var << '\t' << format_double(value) << '\n';
        os << "end\n";
    }
}

NarrowingRecord NarrowingRecord::read(std::istream& is) {
    NarrowingRecord rec;
    std::string tag;
    while (is >> tag) {
        if (tag != "step") throw InputError("malformed narrowing record: expected 'step'");
        NarrowingStep s;
        std::string noopTag;
        int noop = 0;
        std::size_t count = 0;
        is >> s.step >> noopTag >> noop >> tag >> count;
        if (!is || noopTag != "noop" || tag != "bounds") throw InputError("malformed narrowing record header");
        bool named = false;
        for (std::size_t i = 0; i < count; ++i) {
            std::string lo, hi, name;
            is >> lo >> hi >> name;
            s.bounds.ranges.emplace_back(parse_double(lo), parse_double(hi));
            s.bounds.names.push_back(name);
            named = named || name != "-";
        }
        if (!named) s.bounds.names.clear();
        is >> tag >> count;
        if (!is || tag != "top") throw InputError("malformed narrowing record: expected 'top'");
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t var = 0;
            std::string value;
            is >> var >> value;
            s.topIndices.emplace_back(var, parse_double(value));
        }
        is >> tag;
        if (tag != "end") throw InputError("malformed narrowing record: expected 'end'");
        s.noop = noop != 0;
        rec.steps_.push_back(std::move(s));
    }
    return rec;
}

void write_sa_report(std::ostream& os, const SensitivityResult& r) {
    os << "variable\tS1\tS1_lo\tS1_hi\tST\tST_lo\tST_hi\n";
    for (std::size_t i = 0; i < r.firstOrder.size(); ++i) {
        os << r.labels[i] << '\t' << format_double(r.firstOrder[i]) << '\t' << format_double(r.firstCi[i].first) << '\t'
           << format_double(r.firstCi[i].second);
        if (r.totalOrder.empty()) {
            os << "\tnan\tnan\tnan\n";
        } else {
            os << '\t' << format_double(r.totalOrder[i]) << '\t' << format_double(r.totalCi[i].first) << '\t'
               << format_double(r.totalCi[i].second) << '\n';
        }
    }
}

}  // namespace koopgrip
