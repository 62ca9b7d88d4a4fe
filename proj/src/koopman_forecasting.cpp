#include "koopgrip/koopman_forecasting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "koopgrip/errors.hpp"
#include "koopgrip/koopman_estimation.hpp"
#include "koopgrip/metrics.hpp"

namespace koopgrip {

void ForecastHyperparams::validate() const {
    if (!(windowModifier >= 1.0)) throw ConfigError("prediction window modifier must be >= 1");
    if (!(smoothModifier >= 1.0)) throw ConfigError("smoothing window modifier must be >= 1");
    if (thinStep < 3 || thinStep > 8) throw ConfigError("thinning step must lie in [3, 8]");
    if (delays < 4 || delays > 10) throw ConfigError("prediction time delays must lie in [4, 10]");
    if (modes < 1) throw ConfigError("at least one Koopman mode is required");
}

std::size_t ForecastHyperparams::prediction_window(std::size_t batch) const {
    return static_cast<std::size_t>(std::lround(windowModifier * static_cast<double>(batch)));
}

std::size_t ForecastHyperparams::smoothing_neighbours(std::size_t batch) const {
    return static_cast<std::size_t>(std::lround(smoothModifier * static_cast<double>(batch)));
}

namespace {

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
};

LineFit weighted_line(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw;
    const double my = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    const double scaleX = std::max(std::abs(x.front()), std::abs(x.back())) + 1.0;
    if (sxx <= 1e-12 * sw * scaleX * scaleX) return {my, 0.0};
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

}  // namespace

std::vector<double> lowess_smooth(std::span<const double> x, std::span<const double> y, std::size_t neighbours) {
    const std::size_t n = x.size();
    if (y.size() != n) throw InputError("LOWESS inputs differ in length");
    if (neighbours < 3) throw ConfigError("LOWESS window must span at least 3 points");
    std::vector<double> out(n);
    if (n == 0) return out;
    if (n < neighbours) {
        const std::vector<double> ones(n, 1.0);
        const auto line = weighted_line(x, y, ones);
        for (std::size_t i = 0; i < n; ++i) out[i] = line.intercept + line.slope * x[i];
        return out;
    }
    std::vector<double> w(neighbours);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        // slide the k-point window right while that brings it closer to x[i]
        while (lo + neighbours < n && x[lo + neighbours] - x[i] < x[i] - x[lo]) ++lo;
        const double h = std::max(x[i] - x[lo], x[lo + neighbours - 1] - x[i]);
        for (std::size_t j = 0; j < neighbours; ++j) {
            const double u = h > 0.0 ? std::abs(x[lo + j] - x[i]) / h : 0.0;
            const double t = u < 1.0 ? 1.0 - u * u * u : 0.0;
            w[j] = t * t * t;
        }
        const auto line = weighted_line(x.subspan(lo, neighbours), y.subspan(lo, neighbours), w);
        out[i] = line.intercept + line.slope * x[i];
    }
    return out;
}

std::vector<double> lowess_smooth(std::span<const double> y, double fraction) {
    std::vector<double> x(y.size());
    std::iota(x.begin(), x.end(), 0.0);
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(y.size()) - 1e-9));
    return lowess_smooth(x, y, k);
}

Eigen::MatrixXd log_interaction_lift(const Eigen::MatrixXd& delayBlock) {
    if ((delayBlock.array() <= -10.0).any()) throw NumericError("log-interaction lift needs entries > -10");
    const Eigen::MatrixXd logs = (delayBlock.array() + 10.0).log().matrix();
    const Eigen::Index rows = delayBlock.rows();
    Eigen::MatrixXd out(rows * (rows - 1) / 2, delayBlock.cols());
    Eigen::Index r = 0;
    for (Eigen::Index p = 0; p < rows; ++p)
        for (Eigen::Index q = p + 1; q < rows; ++q) out.row(r++) = logs.row(p).cwiseProduct(logs.row(q));
    return out;
}

Eigen::MatrixXd stack_lifted(const Eigen::MatrixXd& delayBlock) {
    const Eigen::MatrixXd inter = log_interaction_lift(delayBlock);
    Eigen::MatrixXd out(inter.rows() + delayBlock.rows(), delayBlock.cols());
    out.topRows(inter.rows()) = inter;
    out.bottomRows(delayBlock.rows()) = delayBlock;
    return out;
}

Eigen::MatrixXd thin(const Eigen::MatrixXd& matrix, int step) {
    if (step < 1) throw ConfigError("thinning step must be >= 1");
    const Eigen::Index cols = matrix.cols();
    if (cols == 0) return matrix;
    const Eigen::Index kept = (cols - 1) / step + 1;
    Eigen::MatrixXd out(matrix.rows(), kept);
    for (Eigen::Index k = 0; k < kept; ++k) out.col(kept - 1 - k) = matrix.col(cols - 1 - k * step);
    return out;
}

DmdModel fit_dmd(const Eigen::MatrixXd& snapshots, int modes, double dtEff, double rankTolerance) {
    using Complex = std::complex<double>;
    if (modes < 1) throw ConfigError("at least one mode is required");
    const Eigen::Index m = snapshots.cols();
    if (m < modes + 1) throw InputError("DMD needs at least modes + 1 snapshots");
    if (!(dtEff > 0.0)) throw ConfigError("effective sample interval must be positive");

    // QR compression of the snapshot matrix onto its column space.
    const Eigen::Index n = snapshots.rows();
    Eigen::MatrixXd basis;  // n x k orthonormal (empty when not compressed)
    Eigen::MatrixXd compressed;
    if (n > m) {
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(snapshots);
        basis = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
        compressed = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    } else {
        compressed = snapshots;
    }
    const Eigen::MatrixXd X = compressed.leftCols(m - 1);
    const Eigen::MatrixXd Y = compressed.rightCols(m - 1);

    const Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sigma = svd.singularValues();
    if (sigma.size() == 0 || !(sigma[0] > 0.0)) throw NumericError("DMD on an all-zero snapshot matrix");
    Eigen::Index rank = 0;
    while (rank < sigma.size() && sigma[rank] > rankTolerance * sigma[0]) ++rank;

    const Eigen::MatrixXd U = svd.matrixU().leftCols(rank);
    const Eigen::MatrixXd B = Y * svd.matrixV().leftCols(rank) * sigma.head(rank).cwiseInverse().asDiagonal();
    const Eigen::MatrixXd rayleigh = U.transpose() * B;
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(rayleigh.cast<Complex>());
    if (eig.info() != Eigen::Success) throw NumericError("Rayleigh quotient eigendecomposition failed");

    // Refined Ritz vectors: minimise ||(B - lambda U) w|| over unit w.
    const Eigen::MatrixXcd Bc = B.cast<Complex>();
    const Eigen::MatrixXcd Uc = U.cast<Complex>();
    std::vector<Complex> lambdas(static_cast<std::size_t>(rank));
    std::vector<Eigen::VectorXcd> vecs(static_cast<std::size_t>(rank));
    std::vector<double> res(static_cast<std::size_t>(rank)), energy(static_cast<std::size_t>(rank));
    for (Eigen::Index j = 0; j < rank; ++j) {
        const Complex lambda = eig.eigenvalues()[j];
        const Eigen::JacobiSVD<Eigen::MatrixXcd> rsvd(Bc - lambda * Uc, Eigen::ComputeFullV);
        const Eigen::Index last = rank - 1;
        const Eigen::VectorXcd w = rsvd.matrixV().col(last);
        const auto idx = static_cast<std::size_t>(j);
        lambdas[idx] = lambda;
        vecs[idx] = Uc * w;
        res[idx] = rsvd.singularValues()[last];
        energy[idx] = (vecs[idx].adjoint() * compressed.cast<Complex>()).norm();
    }

    // Group conjugate pairs so they are kept or dropped together.
    std::vector<std::vector<std::size_t>> groups;
    std::vector<bool> used(lambdas.size(), false);
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        if (used[j]) continue;
        used[j] = true;
        std::vector<std::size_t> g{j};
        if (std::abs(lambdas[j].imag()) > 1e-12 * std::max(1.0, std::abs(lambdas[j]))) {
            std::size_t best = lambdas.size();
            double bestDist = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < lambdas.size(); ++k) {
                if (used[k]) continue;
                const double dist = std::abs(lambdas[k] - std::conj(lambdas[j]));
                if (dist < bestDist) {
                    bestDist = dist;
                    best = k;
                }
            }
            if (best < lambdas.size() && bestDist <= 1e-8 * std::max(1.0, std::abs(lambdas[j]))) {
                used[best] = true;
                g.push_back(best);
            }
        }
        groups.push_back(std::move(g));
    }
    auto groupResidual = [&](const auto& g) {
        double r = 0.0;
        for (auto j : g) r = std::max(r, res[j]);
        return r;
    };
    auto groupEnergy = [&](const auto& g) {
        double e = 0.0;
        for (auto j : g) e += energy[j];
        return e;
    };
    std::stable_sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
        const double ra = groupResidual(a), rb = groupResidual(b);
        const double tol = 1e-12 * std::max(1.0, std::max(ra, rb));
        if (std::abs(ra - rb) > tol) return ra < rb;
        return groupEnergy(a) > groupEnergy(b);
    });
    std::vector<std::size_t> chosen;
    for (const auto& g : groups) {
        if (chosen.size() + g.size() > static_cast<std::size_t>(modes)) continue;
        chosen.insert(chosen.end(), g.begin(), g.end());
        if (chosen.size() == static_cast<std::size_t>(modes)) break;
    }

    DmdModel model;
    model.snapshotCount = static_cast<std::size_t>(m);
    model.dtEff = dtEff;
    const auto l = static_cast<Eigen::Index>(chosen.size());
    model.ritzValues.resize(l);
    model.residuals.resize(l);
    model.ritzVectors.resize(n, l);
    for (Eigen::Index j = 0; j < l; ++j) {
        const auto src = chosen[static_cast<std::size_t>(j)];
        model.ritzValues[j] = lambdas[src];
        model.residuals[j] = res[src];
        Eigen::VectorXcd z = basis.size() ? Eigen::VectorXcd(basis.cast<Complex>() * vecs[src]) : vecs[src];
        model.ritzVectors.col(j) = z / z.norm();
    }
    return model;
}

AmplitudeFit fit_amplitudes(const DmdModel& model, const Eigen::MatrixXd& snapshots, double conditionLimit) {
    using Complex = std::complex<double>;
    const Eigen::Index l = model.ritzValues.size();
    const Eigen::Index m = snapshots.cols();
    const Eigen::Index n = snapshots.rows();
    if (l == 0) throw InputError("model has no modes");
    if (model.ritzVectors.rows() != n) throw InputError("snapshot rows do not match the Ritz vectors");
    if (m > 1 && (model.ritzValues.array().abs() == 0.0).all())
        throw NumericError("degenerate amplitude system: all Ritz values are zero");

    Eigen::MatrixXcd vander(l, m);
    for (Eigen::Index j = 0; j < l; ++j) {
        Complex p = 1.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            vander(j, i) = p;
            p *= model.ritzValues[j];
        }
    }
    const Eigen::MatrixXcd& Z = model.ritzVectors;
    const Eigen::MatrixXcd S = snapshots.cast<Complex>();
    const Eigen::MatrixXcd normal = (Z.adjoint() * Z).cwiseProduct((vander * vander.adjoint()).conjugate());
    const Eigen::VectorXcd rhs = (Z.adjoint() * S * vander.adjoint()).diagonal();

    AmplitudeFit fit;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(normal, Eigen::EigenvaluesOnly);
    const double emax = es.eigenvalues().maxCoeff();
    const double emin = es.eigenvalues().minCoeff();
    fit.condition = emin > 0.0 ? emax / emin : std::numeric_limits<double>::infinity();
    if (fit.condition <= conditionLimit) {
        fit.amplitudes = normal.ldlt().solve(rhs);
        fit.solver = AmplitudeSolver::NormalEquations;
        return fit;
    }
    // Stacked Khatri-Rao system, column-pivoted QR.
    Eigen::MatrixXcd A(n * m, l);
    Eigen::VectorXcd b(n * m);
    for (Eigen::Index i = 0; i < m; ++i) {
        A.middleRows(i * n, n) = Z * vander.col(i).asDiagonal();
        b.segment(i * n, n) = S.col(i);
    }
    fit.amplitudes = A.colPivHouseholderQr().solve(b);
    fit.solver = AmplitudeSolver::QR;
    return fit;
}

Eigen::MatrixXd forecast_lifted(const DmdModel& model, std::size_t horizon) {
    using Complex = std::complex<double>;
    if (model.amplitudes.size() != model.ritzValues.size()) throw InputError("forecast needs fitted amplitudes");
    const Eigen::Index l = model.ritzValues.size();
    Eigen::MatrixXd out(model.ritzVectors.rows(), static_cast<Eigen::Index>(horizon));
    const auto base = static_cast<double>(model.snapshotCount) - 1.0;
    for (std::size_t tau = 1; tau <= horizon; ++tau) {
        Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(model.ritzVectors.rows());
        for (Eigen::Index j = 0; j < l; ++j) {
            const Complex coeff = model.amplitudes[j] * std::pow(model.ritzValues[j], base + static_cast<double>(tau));
            acc += coeff * model.ritzVectors.col(j);
        }
        out.col(static_cast<Eigen::Index>(tau - 1)) = acc.real();
    }
    return out;
}

std::vector<double> forecast(const DmdModel& model, std::size_t horizon, Eigen::Index readoutRow,
                             const MinMaxScaler& gripScaler) {
    const Eigen::MatrixXd lifted = forecast_lifted(model, horizon);
    if (readoutRow < 0 || readoutRow >= lifted.rows()) throw ConfigError("forecast readout row out of range");
    std::vector<double> out(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        const double v = gripScaler.invert(lifted(readoutRow, static_cast<Eigen::Index>(t)));
        out[t] = std::clamp(v, gripScaler.lo(), gripScaler.hi());
    }
    return out;
}

std::optional<BatchForecast> predict_batch(std::span<const double> estimateTimes, std::span<const double> estimatesScaled,
                                           const ForecastHyperparams& hyper, const MinMaxScaler& gripScaler,
                                           double horizonSeconds, double rate) {
    hyper.validate();
    if (estimateTimes.size() != estimatesScaled.size()) throw InputError("estimate times and values differ in length");
    const std::size_t window = hyper.prediction_window();
    const std::size_t n = estimatesScaled.size();
    if (n < window || window < static_cast<std::size_t>(hyper.delays) + 2) return std::nullopt;

    // LOWESS over the current and previous batch (or the prediction window if longer)
    const std::size_t segment = std::min(n, std::max(2 * kDownsampledBatch, window));
    const auto times = estimateTimes.subspan(n - segment);
    const auto values = estimatesScaled.subspan(n - segment);
    const auto smooth = lowess_smooth(times, values, hyper.smoothing_neighbours());

    const std::span<const double> recent(smooth.data() + (segment - window), window);
    const Eigen::MatrixXd delay = hankel_lift(recent, hyper.delays);
    const Eigen::MatrixXd snapshots = thin(stack_lifted(delay), hyper.thinStep);
    if (snapshots.cols() < hyper.modes + 1) return std::nullopt;

    const double dtEff = hyper.thinStep / rate;
    BatchForecast out;
    out.model = fit_dmd(snapshots, hyper.modes, dtEff);
    out.model.amplitudes = fit_amplitudes(out.model, snapshots).amplitudes;

    const auto horizon = static_cast<std::size_t>(std::ceil(horizonSeconds * rate / hyper.thinStep - 1e-9));
    out.values = forecast(out.model, horizon, snapshots.rows() - 1, gripScaler);
    out.times.resize(horizon);
    for (std::size_t t = 0; t < horizon; ++t) out.times[t] = estimateTimes.back() + static_cast<double>(t + 1) * dtEff;
    return out;
}

std::vector<ForecastHyperparams> GridSpec::combinations() const {
    std::vector<ForecastHyperparams> out;
    for (double w : windowModifiers)
        for (double s : smoothModifiers)
            for (int t : thinSteps)
                for (int d : delays)
                    for (int m : modes) out.push_back({w, s, t, d, m});
    return out;
}

double forecast_wmape(const ForecastCorpusItem& item, const ForecastHyperparams& hyper, const MinMaxScaler& gripScaler,
                      std::size_t batch) {
    const auto& est = item.estimatesScaled;
    std::vector<std::size_t> ends = item.batchEnds;
    if (ends.empty())
        for (std::size_t e = batch; e <= est.size(); e += batch) ends.push_back(e);

    std::vector<double> actual, predicted;
    const double tEnd = item.truth.times.back();
    for (std::size_t e : ends) {
        if (e > est.size()) break;
        const auto fc = predict_batch(std::span(est.times).first(e), std::span(est.values).first(e), hyper, gripScaler);
        if (!fc) continue;
        std::vector<double> targets;
        std::vector<double> values;
        for (std::size_t i = 0; i < fc->times.size(); ++i) {
            if (fc->times[i] > tEnd) break;
            targets.push_back(fc->times[i]);
            values.push_back(fc->values[i]);
        }
        if (targets.empty()) continue;
        const auto truth = resample_linear(item.truth, targets);
        actual.insert(actual.end(), truth.values.begin(), truth.values.end());
        predicted.insert(predicted.end(), values.begin(), values.end());
    }
    if (actual.empty()) throw InputError("no forecasts produced for the tuning stream");
    return wmape(actual, predicted);
}

namespace {

TuningRow evaluate_combination(std::span<const ForecastCorpusItem> corpus, const ForecastHyperparams& h,
                               const MinMaxScaler& scaler) {
    TuningRow row;
    row.hyper = h;
    for (const auto& item : corpus) {
        double w = std::numeric_limits<double>::infinity();
        try {
            w = forecast_wmape(item, h, scaler);
        } catch (const Error&) {
        }
        row.perItem.push_back(w);
    }
    row.meanWmape = std::accumulate(row.perItem.begin(), row.perItem.end(), 0.0) / static_cast<double>(row.perItem.size());
    std::vector<double> sorted = row.perItem;
    std::sort(sorted.begin(), sorted.end());
    row.medianWmape = quantile(sorted, 0.5);
    return row;
}

void rank(std::vector<TuningRow>& rows) {
    auto key = [](const ForecastHyperparams& h) {
        return std::tie(h.windowModifier, h.smoothModifier, h.thinStep, h.delays, h.modes);
    };
    std::sort(rows.begin(), rows.end(), [&](const TuningRow& a, const TuningRow& b) {
        const double sa = a.score(), sb = b.score();
        if (sa != sb) return sa < sb;
        return key(a.hyper) < key(b.hyper);
    });
}

}  // namespace

std::vector<TuningRow> hyperparameter_grid_search(std::span<const ForecastCorpusItem> corpus, const GridSpec& grid,
                                                  const MinMaxScaler& gripScaler) {
    const auto combos = grid.combinations();
    if (combos.empty()) throw InputError("empty hyperparameter grid");
    if (corpus.empty()) throw InputError("empty tuning corpus");
    std::vector<TuningRow> rows(combos.size());
    const auto count = static_cast<std::int64_t>(combos.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i)
        rows[static_cast<std::size_t>(i)] = evaluate_combination(corpus, combos[static_cast<std::size_t>(i)], gripScaler);
    rank(rows);
    return rows;
}

std::vector<TuningRow> hyperparameter_grid_search_serial(std::span<const ForecastCorpusItem> corpus,
                                                         const GridSpec& grid, const MinMaxScaler& gripScaler) {
    const auto combos = grid.combinations();
    if (combos.empty()) throw InputError("empty hyperparameter grid");
    if (corpus.empty()) throw InputError("empty tuning corpus");
    std::vector<TuningRow> rows;
    rows.reserve(combos.size());
    for (const auto& h : combos) rows.push_back(evaluate_combination(corpus, h, gripScaler));
    rank(rows);
    return rows;
}

}  // namespace koopgrip
