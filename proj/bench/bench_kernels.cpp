// Serial vs OpenMP throughput of the data-parallel kernels.
#include <benchmark/benchmark.h>

#include <random>

#include "koopgrip/kernels.hpp"
#include "koopgrip/koopman_forecasting.hpp"
#include "koopgrip/pipeline.hpp"
#include "koopgrip/sensitivity.hpp"
#include "koopgrip/synth.hpp"

using namespace koopgrip;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

const std::vector<ObjectiveRecording>& objective_data() {
    static const auto data = [] {
        SynthProfile p;
        p.totalDuration = 10.0;
        const auto rec = synth_recording(p, 1);
        return std::vector<ObjectiveRecording>{{rec.emg, grip_force(rec)}};
    }();
    return data;
}

void BM_LagCorrelations(benchmark::State& state) {
    const auto a = noise(30000, 1), b = noise(30000, 2);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::lag_correlations(a, b, 160));
}
void BM_LagCorrelationsSerial(benchmark::State& state) {
    const auto a = noise(30000, 1), b = noise(30000, 2);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::lag_correlations_serial(a, b, 160));
}

void BM_IndicatorCells(benchmark::State& state) {
    const Eigen::MatrixXd h = Eigen::MatrixXd::Random(61, 200000).cwiseAbs();
    const auto edges = power_grid_bounds(22, 1.8);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::indicator_cells(h, 0, 29, 59, edges));
}
void BM_IndicatorCellsSerial(benchmark::State& state) {
    const Eigen::MatrixXd h = Eigen::MatrixXd::Random(61, 200000).cwiseAbs();
    const auto edges = power_grid_bounds(22, 1.8);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::indicator_cells_serial(h, 0, 29, 59, edges));
}

void BM_Objective(benchmark::State& state) {
    const auto x = latin_hypercube(initial_decision_bounds(), 8, 3);
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_objective(objective_data(), x));
}
void BM_ObjectiveSerial(benchmark::State& state) {
    const auto x = latin_hypercube(initial_decision_bounds(), 8, 3);
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_objective_serial(objective_data(), x));
}

std::vector<ForecastCorpusItem> corpus() {
    ForecastCorpusItem item;
    for (int i = 0; i < 1200; ++i) {
        const double t = i / 124.0;
        item.estimatesScaled.times.push_back(t);
        item.estimatesScaled.values.push_back(0.5 + 0.3 * std::sin(1.5 * t));
        item.truth.times.push_back(t);
        item.truth.values.push_back(150.0 + 90.0 * std::sin(1.5 * t));
    }
    return {item};
}
const GridSpec kGrid{{1.3, 1.5}, {1.1}, {5, 7}, {8}, {2, 4}};

void BM_GridSearch(benchmark::State& state) {
    const auto c = corpus();
    for (auto _ : state) benchmark::DoNotOptimize(hyperparameter_grid_search(c, kGrid, MinMaxScaler(0, 300)));
}
void BM_GridSearchSerial(benchmark::State& state) {
    const auto c = corpus();
    for (auto _ : state) benchmark::DoNotOptimize(hyperparameter_grid_search_serial(c, kGrid, MinMaxScaler(0, 300)));
}

}  // namespace

BENCHMARK(BM_LagCorrelations)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LagCorrelationsSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_IndicatorCells)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_IndicatorCellsSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Objective)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ObjectiveSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GridSearch)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GridSearchSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
