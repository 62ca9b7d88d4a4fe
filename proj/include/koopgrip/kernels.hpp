#pragma once

// Data-parallel inner loops. Every OpenMP kernel has a `_serial` twin with the
// same arithmetic in the same order; tests require bitwise-equal results and
// the benchmark target compares their throughput.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace koopgrip::kernels {

/// Pearson correlation of (a[i], b[i + lag]) over the overlap, for every lag in
/// [-maxLag, maxLag]; entry `lag + maxLag`. Zero-variance overlaps yield 0.
std::vector<double> lag_correlations(std::span<const double> a, std::span<const double> b, int maxLag);
std::vector<double> lag_correlations_serial(std::span<const double> a, std::span<const double> b, int maxLag);

/// Flat grid cell id (i*D*D + j*D + k) of each Hankel column for the triple of
/// rows (r0, r1, r2); -1 when any coordinate is outside [edges.front(), edges.back()].
std::vector<std::int32_t> indicator_cells(const Eigen::MatrixXd& hankel, int r0, int r1, int r2,
                                          std::span<const double> edges);
std::vector<std::int32_t> indicator_cells_serial(const Eigen::MatrixXd& hankel, int r0, int r1, int r2,
                                                 std::span<const double> edges);

/// Lowest-index closed interval [edges[i], edges[i+1]] containing v, or -1.
inline int grid_interval(double v, std::span<const double> edges) {
    if (!(v >= edges.front()) || !(v <= edges.back())) return -1;
    std::size_t lo = 0;
    std::size_t hi = edges.size() - 1;
    // first edge index >= v
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (edges[mid] < v) lo = mid + 1;
        else hi = mid;
    }
    return lo == 0 ? 0 : static_cast<int>(lo) - 1;
}

/// Deterministic per-replicate generator; independent of thread schedule.
inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
    return std::mt19937_64(seq);
}

/// out[i] = fn(i) for i in [0, n); fn must be thread-safe.
template <class Fn>
std::vector<double> map_index(std::size_t n, Fn&& fn) {
    std::vector<double> out(n);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    return out;
}

template <class Fn>
std::vector<double> map_index_serial(std::size_t n, Fn&& fn) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
}

/// Evaluates fn on every row of `samples`.
template <class Fn>
std::vector<double> map_rows(const Eigen::MatrixXd& samples, Fn&& fn) {
    return map_index(static_cast<std::size_t>(samples.rows()),
                     [&](std::size_t r) { return fn(Eigen::VectorXd(samples.row(static_cast<Eigen::Index>(r)).transpose())); });
}

template <class Fn>
std::vector<double> map_rows_serial(const Eigen::MatrixXd& samples, Fn&& fn) {
    return map_index_serial(static_cast<std::size_t>(samples.rows()),
                            [&](std::size_t r) { return fn(Eigen::VectorXd(samples.row(static_cast<Eigen::Index>(r)).transpose())); });
}

/// Row-major (nBoot x width) matrix of bootstrap statistics. fn(rng, out) fills
/// `width` values for one replicate; the generator is seeded per replicate.
template <class Fn>
Eigen::MatrixXd bootstrap(std::size_t nBoot, std::size_t width, std::uint64_t seed, Fn&& fn) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(nBoot), static_cast<Eigen::Index>(width));
    const auto count = static_cast<std::int64_t>(nBoot);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < count; ++b) {
        auto rng = replicate_rng(seed, static_cast<std::uint64_t>(b));
        std::vector<double> row(width);
        fn(rng, row);
        for (std::size_t c = 0; c < width; ++c) out(b, static_cast<Eigen::Index>(c)) = row[c];
    }
    return out;
}

template <class Fn>
Eigen::MatrixXd bootstrap_serial(std::size_t nBoot, std::size_t width, std::uint64_t seed, Fn&& fn) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(nBoot), static_cast<Eigen::Index>(width));
    for (std::size_t b = 0; b < nBoot; ++b) {
        auto rng = replicate_rng(seed, b);
        std::vector<double> row(width);
        fn(rng, row);
        for (std::size_t c = 0; c < width; ++c) out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) = row[c];
    }
    return out;
}

}  // namespace koopgrip::kernels
