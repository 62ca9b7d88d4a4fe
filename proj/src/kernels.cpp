#include "koopgrip/kernels.hpp"

#include <cmath>

namespace koopgrip::kernels {

namespace {

double lag_correlation(std::span<const double> a, std::span<const double> b, int lag) {
    const auto n = static_cast<std::ptrdiff_t>(a.size());
    const std::ptrdiff_t begin = lag < 0 ? -lag : 0;
    const std::ptrdiff_t end = lag > 0 ? n - lag : n;
    const auto m = static_cast<double>(end - begin);
    if (end - begin < 2) return 0.0;
    double sa = 0.0, sb = 0.0;
    for (std::ptrdiff_t i = begin; i < end; ++i) {
        sa += a[static_cast<std::size_t>(i)];
        sb += b[static_cast<std::size_t>(i + lag)];
    }
    const double ma = sa / m;
    const double mb = sb / m;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::ptrdiff_t i = begin; i < end; ++i) {
        const double da = a[static_cast<std::size_t>(i)] - ma;
        const double db = b[static_cast<std::size_t>(i + lag)] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::vector<double> lag_correlations(std::span<const double> a, std::span<const double> b, int maxLag) {
    std::vector<double> out(static_cast<std::size_t>(2 * maxLag + 1));
#pragma omp parallel for schedule(static)
    for (int lag = -maxLag; lag <= maxLag; ++lag) out[static_cast<std::size_t>(lag + maxLag)] = lag_correlation(a, b, lag);
    return out;
}

std::vector<double> lag_correlations_serial(std::span<const double> a, std::span<const double> b, int maxLag) {
    std::vector<double> out(static_cast<std::size_t>(2 * maxLag + 1));
    for (int lag = -maxLag; lag <= maxLag; ++lag) out[static_cast<std::size_t>(lag + maxLag)] = lag_correlation(a, b, lag);
    return out;
}

namespace {

std::int32_t cell_of(const Eigen::MatrixXd& h, Eigen::Index col, int r0, int r1, int r2, std::span<const double> edges) {
    const auto d = static_cast<std::int32_t>(edges.size() - 1);
    const int i = grid_interval(h(r0, col), edges);
    const int j = grid_interval(h(r1, col), edges);
    const int k = grid_interval(h(r2, col), edges);
    if (i < 0 || j < 0 || k < 0) return -1;
    return (i * d + j) * d + k;
}

}  // namespace

std::vector<std::int32_t> indicator_cells(const Eigen::MatrixXd& hankel, int r0, int r1, int r2,
                                          std::span<const double> edges) {
    std::vector<std::int32_t> cells(static_cast<std::size_t>(hankel.cols()));
    const Eigen::Index n = hankel.cols();
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < n; ++c) cells[static_cast<std::size_t>(c)] = cell_of(hankel, c, r0, r1, r2, edges);
    return cells;
}

std::vector<std::int32_t> indicator_cells_serial(const Eigen::MatrixXd& hankel, int r0, int r1, int r2,
                                                 std::span<const double> edges) {
    std::vector<std::int32_t> cells(static_cast<std::size_t>(hankel.cols()));
    for (Eigen::Index c = 0; c < hankel.cols(); ++c)
        cells[static_cast<std::size_t>(c)] = cell_of(hankel, c, r0, r1, r2, edges);
    return cells;
}

}  // namespace koopgrip::kernels
