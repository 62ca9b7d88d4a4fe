#include "koopgrip/koopman_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "koopgrip/errors.hpp"
#include "koopgrip/io.hpp"
#include "koopgrip/kernels.hpp"

namespace koopgrip {

void HankelParams::validate() const {
    if (delays < 0) throw ConfigError("time-delay count must be >= 0");
    if (downsampleFactor < 1) throw ConfigError("downsample factor must be >= 1");
}

void IndicatorGrid::validate(int delays) const {
    if (divisions < 1) throw ConfigError("grid needs at least one division");
    if (!(exponent > 0.0)) throw ConfigError("grid exponent must be positive");
    if (tau1 < 1 || tau2 <= tau1 || tau2 > delays - 1) throw ConfigError("grid delays must satisfy 1 <= tau1 < tau2 <= d - 1");
    if (!(minDensity >= 0.0 && minDensity <= 1.0)) throw ConfigError("grid density threshold must lie in [0, 1]");
}

std::vector<double> IndicatorGrid::edges() const { return power_grid_bounds(divisions, exponent); }

std::int64_t IndicatorGrid::candidate_count() const {
    const auto d = static_cast<std::int64_t>(divisions);
    return d * d * d;
}

Eigen::MatrixXd hankel_lift(std::span<const double> series, int delays) {
    if (delays < 0) throw ConfigError("time-delay count must be >= 0");
    const auto n = static_cast<Eigen::Index>(series.size());
    const Eigen::Index rows = delays + 1;
    if (n < rows) throw InputError("series too short for " + std::to_string(delays) + " time delays");
    const Eigen::Index cols = n - delays;
    Eigen::MatrixXd h(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) h(r, c) = series[static_cast<std::size_t>(r + c)];
    return h;
}

std::vector<double> power_grid_bounds(int divisions, double exponent) {
    if (divisions < 1) throw ConfigError("grid needs at least one division");
    if (!(exponent > 0.0)) throw ConfigError("grid exponent must be positive");
    std::vector<double> b(static_cast<std::size_t>(divisions) + 1);
    for (int i = 0; i <= divisions; ++i)
        b[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i) / divisions, exponent);
    b.front() = 0.0;
    b.back() = 1.0;
    return b;
}

namespace {

void check_rows(const Eigen::MatrixXd& hankel, const IndicatorGrid& grid) {
    if (grid.tau1 < 1 || grid.tau2 <= grid.tau1) throw ConfigError("grid delays must satisfy 1 <= tau1 < tau2");
    if (grid.tau2 >= hankel.rows()) throw ConfigError("grid delay tau2 exceeds the Hankel matrix");
}

}  // namespace

IndicatorObservables indicator_observables(const Eigen::MatrixXd& hankel, const IndicatorGrid& grid) {
    check_rows(hankel, grid);
    const auto edges = grid.edges();
    const auto cells = kernels::indicator_cells(hankel, 0, grid.tau1, grid.tau2, edges);

    std::vector<std::int64_t> counts(static_cast<std::size_t>(grid.candidate_count()), 0);
    for (auto c : cells)
        if (c >= 0) ++counts[static_cast<std::size_t>(c)];

    IndicatorObservables out;
    const auto cols = static_cast<double>(hankel.cols());
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] > 0 && static_cast<double>(counts[c]) / cols >= grid.minDensity)
            out.kept.push_back(static_cast<std::int32_t>(c));
    out.rows = indicator_rows(hankel, grid, out.kept);
    return out;
}

Eigen::MatrixXd indicator_rows(const Eigen::MatrixXd& hankel, const IndicatorGrid& grid,
                               std::span<const std::int32_t> kept) {
    check_rows(hankel, grid);
    const auto edges = grid.edges();
    const auto cells = kernels::indicator_cells(hankel, 0, grid.tau1, grid.tau2, edges);
    std::vector<std::int32_t> rowOf(static_cast<std::size_t>(grid.candidate_count()), -1);
    for (std::size_t i = 0; i < kept.size(); ++i) rowOf.at(static_cast<std::size_t>(kept[i])) = static_cast<std::int32_t>(i);
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kept.size()), hankel.cols());
    for (Eigen::Index c = 0; c < hankel.cols(); ++c) {
        const auto cell = cells[static_cast<std::size_t>(c)];
        if (cell < 0) continue;
        const auto r = rowOf[static_cast<std::size_t>(cell)];
        if (r >= 0) rows(r, c) = 1.0;
    }
    return rows;
}

std::vector<double> downsample(std::span<const double> series, int factor, std::size_t phase) {
    if (factor < 1) throw ConfigError("downsample factor must be >= 1");
    std::vector<double> out;
    for (std::size_t i = phase; i < series.size(); i += static_cast<std::size_t>(factor)) out.push_back(series[i]);
    return out;
}

LiftedMatrices build_lifted_matrices(std::span<const double> emgScaled, std::span<const double> gripScaled,
                                     const HankelParams& hankel, const IndicatorGrid& grid) {
    hankel.validate();
    if (emgScaled.size() != gripScaled.size()) throw InputError("EMG and grip series differ in length");
    const Eigen::MatrixXd he = hankel_lift(emgScaled, hankel.delays);
    const Eigen::MatrixXd hg = hankel_lift(gripScaled, hankel.delays);
    auto ind = indicator_observables(he, grid);

    LiftedMatrices out;
    const Eigen::Index base = he.rows();
    const auto extra = static_cast<Eigen::Index>(ind.kept.size());
    out.E.resize(base + extra, he.cols());
    out.E.topRows(base) = he;
    out.E.bottomRows(extra) = ind.rows;
    out.G = Eigen::MatrixXd::Zero(base + extra, hg.cols());
    out.G.topRows(base) = hg;
    out.kept = std::move(ind.kept);
    return out;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& A, double relativeCutoff) {
    if (A.size() == 0) throw InputError("pseudo-inverse of an empty matrix");
    if (A.rows() > A.cols()) return pseudo_inverse(A.transpose(), relativeCutoff).transpose();
    // A^T = Q R with orthonormal Q (n x p); pinv(A) = Q pinv(R^T).
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A.transpose());
    const Eigen::Index p = A.rows();
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.cols(), p);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(R.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cutoff = relativeCutoff * (s.size() ? s[0] : 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > cutoff) inv[i] = 1.0 / s[i];
    return Q * (svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose());
}

Eigen::MatrixXd fit_static_koopman(const Eigen::MatrixXd& E, const Eigen::MatrixXd& G, double relativeCutoff) {
    if (E.size() == 0 || G.size() == 0) throw InputError("static Koopman fit needs non-empty matrices");
    if (E.cols() != G.cols()) throw InputError("E and G must have the same number of columns");
    return G * pseudo_inverse(E, relativeCutoff);
}

std::size_t EstimatorModel::min_window() const {
    return static_cast<std::size_t>((hankel.delays + 1) * hankel.downsampleFactor);
}

EstimatorModel fit_estimator(std::span<const double> processedEmgDs, std::span<const double> gripDs,
                             const HankelParams& hankel, const IndicatorGrid& grid, double emgRate) {
    hankel.validate();
    grid.validate(hankel.delays);
    if (processedEmgDs.size() != gripDs.size()) throw InputError("EMG and grip series differ in length");
    EstimatorModel m;
    m.hankel = hankel;
    m.grid = grid;
    m.emgRate = emgRate;
    m.emgScaler = MinMaxScaler::fit(processedEmgDs);
    m.gripScaler = MinMaxScaler::fit(gripDs);

    std::vector<double> e(processedEmgDs.size()), g(gripDs.size());
    std::transform(processedEmgDs.begin(), processedEmgDs.end(), e.begin(), [&](double v) { return m.emgScaler.apply(v); });
    std::transform(gripDs.begin(), gripDs.end(), g.begin(), [&](double v) { return m.gripScaler.apply(v); });

    auto lifted = build_lifted_matrices(e, g, hankel, grid);
    m.K = fit_static_koopman(lifted.E, lifted.G);
    m.keptSubregions = std::move(lifted.kept);
    return m;
}

std::vector<double> estimate_scaled(const EstimatorModel& model, std::span<const double> processedEmg) {
    if (processedEmg.size() < model.min_window()) throw InputError("EMG window shorter than (d+1) * downsample factor");
    auto ds = downsample(processedEmg, model.hankel.downsampleFactor);
    for (auto& v : ds) v = model.emgScaler.apply(v);
    const Eigen::MatrixXd h = hankel_lift(ds, model.hankel.delays);
    const Eigen::MatrixXd ind = indicator_rows(h, model.grid, model.keptSubregions);
    const Eigen::Index base = h.rows();
    if (model.K.cols() != base + ind.rows()) throw InputError("model matrix does not match its lifting layout");

    const Eigen::RowVectorXd readout = model.K.row(0);
    Eigen::RowVectorXd est = readout.head(base) * h;
    if (ind.rows() > 0) est += readout.tail(ind.rows()) * ind;
    std::vector<double> out(static_cast<std::size_t>(est.size()));
    for (Eigen::Index i = 0; i < est.size(); ++i) out[static_cast<std::size_t>(i)] = std::max(est[i], model.gripFloor);
    return out;
}

std::vector<double> estimate_batch(const EstimatorModel& model, std::span<const double> processedEmg) {
    auto est = estimate_scaled(model, processedEmg);
    for (auto& v : est) v = model.gripScaler.invert(v);
    return est;
}

void write_model(std::ostream& os, const EstimatorModel& m) {
    auto f = [](double v) { return format_double(v); };
    os << "# koopgrip static estimator\n";
    os << "format 1\n";
    os << "delays " << m.hankel.delays << '\n';
    os << "downsample " << m.hankel.downsampleFactor << '\n';
    os << "grid_divisions " << m.grid.divisions << '\n';
    os << "grid_exponent " << f(m.grid.exponent) << '\n';
    os << "grid_tau1 " << m.grid.tau1 << '\n';
    os << "grid_tau2 " << m.grid.tau2 << '\n';
    os << "grid_min_density " << f(m.grid.minDensity) << '\n';
    os << "emg_rate " << f(m.emgRate) << '\n';
    os << "emg_scaler " << f(m.emgScaler.lo()) << ' ' << f(m.emgScaler.hi()) << '\n';
    os << "grip_scaler " << f(m.gripScaler.lo()) << ' ' << f(m.gripScaler.hi()) << '\n';
    os << "grip_floor " << f(m.gripFloor) << '\n';
    os << "calibration";
    for (double c : m.calibration.coefficients) os << ' ' << f(c);
    os << '\n';
    os << "kept " << m.keptSubregions.size();
    for (auto k : m.keptSubregions) os << ' ' << k;
    os << '\n';
    os << "K " << m.K.rows() << ' ' << m.K.cols() << '\n';
    for (Eigen::Index r = 0; r < m.K.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.K.cols(); ++c) os << (c ? " " : "") << f(m.K(r, c));
        os << '\n';
    }
}

EstimatorModel read_model(std::istream& is) {
    EstimatorModel m;
    std::string line;
    bool haveK = false;
    double emgLo = 0, emgHi = 1, gripLo = 0, gripHi = 1;
    auto num = [](std::istringstream& ss) {
        std::string tok;
        if (!(ss >> tok)) throw InputError("model file: missing value");
        return parse_double(tok);
    };
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "format") {
            if (num(ss) != 1.0) throw InputError("model file: unsupported format version");
        } else if (key == "delays") {
            m.hankel.delays = static_cast<int>(num(ss));
        } else if (key == "downsample") {
            m.hankel.downsampleFactor = static_cast<int>(num(ss));
        } else if (key == "grid_divisions") {
            m.grid.divisions = static_cast<int>(num(ss));
        } else if (key == "grid_exponent") {
            m.grid.exponent = num(ss);
        } else if (key == "grid_tau1") {
            m.grid.tau1 = static_cast<int>(num(ss));
        } else if (key == "grid_tau2") {
            m.grid.tau2 = static_cast<int>(num(ss));
        } else if (key == "grid_min_density") {
            m.grid.minDensity = num(ss);
        } else if (key == "emg_rate") {
            m.emgRate = num(ss);
        } else if (key == "emg_scaler") {
            emgLo = num(ss);
            emgHi = num(ss);
        } else if (key == "grip_scaler") {
            gripLo = num(ss);
            gripHi = num(ss);
        } else if (key == "grip_floor") {
            m.gripFloor = num(ss);
        } else if (key == "calibration") {
            for (auto& c : m.calibration.coefficients) c = num(ss);
        } else if (key == "kept") {
            const auto n = static_cast<std::size_t>(num(ss));
            m.keptSubregions.resize(n);
            for (auto& k : m.keptSubregions) k = static_cast<std::int32_t>(num(ss));
        } else if (key == "K") {
            const auto rows = static_cast<Eigen::Index>(num(ss));
            const auto cols = static_cast<Eigen::Index>(num(ss));
            m.K.resize(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                if (!std::getline(is, line)) throw InputError("model file: truncated K matrix");
                std::istringstream row(line);
                for (Eigen::Index c = 0; c < cols; ++c) m.K(r, c) = num(row);
            }
            haveK = true;
        } else {
            throw InputError("model file: unknown key '" + key + "'");
        }
    }
    if (!haveK) throw InputError("model file: missing K matrix");
    m.emgScaler = MinMaxScaler(emgLo, emgHi);
    m.gripScaler = MinMaxScaler(gripLo, gripHi);
    m.hankel.validate();
    m.grid.validate(m.hankel.delays);
    return m;
}

}  // namespace koopgrip
