#include "koopgrip/cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "koopgrip/errors.hpp"
#include "koopgrip/metrics.hpp"
#include "koopgrip/pipeline.hpp"
#include "koopgrip/sensitivity.hpp"
#include "koopgrip/synth.hpp"

namespace fs = std::filesystem;

namespace koopgrip {

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> config;
    std::optional<std::string> out;
    Config cfg;

    void load() {
        if (config) cfg = Config::load(*config);
    }
    std::uint64_t seed_value() const {
        if (seed) return *seed;
        if (const auto v = cfg.get("general.seed")) {
            std::uint64_t s = 0;
            const auto res = std::from_chars(v->data(), v->data() + v->size(), s);
            if (res.ec != std::errc() || res.ptr != v->data() + v->size())
                throw ConfigError("general.seed is not an unsigned integer: " + *v);
            return s;
        }
        return 1;
    }
    fs::path out_dir() const {
        const char* env = std::getenv("KOOPGRIP_OUT_DIR");
        const fs::path dir = cfg.resolve<std::string>("general.out", out, env ? std::string(env) : std::string("."));
        fs::create_directories(dir);
        return dir;
    }
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path.string());
    return os;
}

std::string stem_name(const std::string& stem) { return fs::path(stem).filename().string(); }

struct PipelineFlags {
    std::optional<std::string> maskFile;
    std::optional<int> window;
    std::optional<double> decay;
    std::optional<double> windowModifier, smoothModifier;
    std::optional<int> thinStep, delays, modes;
};

void add_pipeline_flags(CLI::App* sub, PipelineFlags& f) {
    sub->add_option("--mask-file", f.maskFile, "Spectral mask file (frequency<TAB>gain)");
    sub->add_option("--window", f.window, "Smoothing window (samples)");
    sub->add_option("--decay", f.decay, "Exponential smoothing decay");
    sub->add_option("--window-modifier", f.windowModifier, "Prediction window modifier");
    sub->add_option("--smooth-modifier", f.smoothModifier, "LOWESS window modifier");
    sub->add_option("--thin", f.thinStep, "Thinning step");
    sub->add_option("--delays", f.delays, "Prediction time delays");
    sub->add_option("--modes", f.modes, "Koopman modes");
}

PipelineConfig pipeline_config(const Common& c, const PipelineFlags& f) {
    PipelineConfig p;
    const auto maskFile = c.cfg.resolve<std::string>("signal.mask_file", f.maskFile, "");
    if (!maskFile.empty()) {
        std::ifstream is(maskFile);
        if (!is) throw InputError("cannot open mask " + maskFile);
        p.mask = read_mask(is);
    }
    p.smoothing.windowSize = static_cast<std::size_t>(c.cfg.resolve<int>("signal.window", f.window, 300));
    p.smoothing.decay = c.cfg.resolve<double>("signal.decay", f.decay, 0.0);
    p.smoothing.validate(p.batchSize);
    p.forecast.windowModifier = c.cfg.resolve<double>("forecast.window_modifier", f.windowModifier, 1.3);
    p.forecast.smoothModifier = c.cfg.resolve<double>("forecast.smooth_modifier", f.smoothModifier, 1.1);
    p.forecast.thinStep = c.cfg.resolve<int>("forecast.thin_step", f.thinStep, 7);
    p.forecast.delays = c.cfg.resolve<int>("forecast.delays", f.delays, 8);
    p.forecast.modes = c.cfg.resolve<int>("forecast.modes", f.modes, 4);
    p.forecast.validate();
    return p;
}

EstimatorModel load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open model " + path);
    return read_model(is);
}

std::vector<ObjectiveRecording> objective_dataset(const std::vector<std::string>& stems, double zeroWindow) {
    std::vector<ObjectiveRecording> data;
    for (const auto& s : stems) {
        const auto rec = read_recording(s);
        data.push_back({rec.emg, grip_force(rec, zeroWindow)});
    }
    return data;
}

Bounds bounds_from(const std::optional<std::string>& file) {
    if (!file) return initial_decision_bounds();
    std::ifstream is(*file);
    if (!is) throw InputError("cannot open bounds file " + *file);
    const auto record = NarrowingRecord::read(is);
    if (record.steps().empty()) throw InputError("bounds file has no steps");
    return record.steps().back().bounds;
}

void write_samples(std::ostream& os, const Eigen::MatrixXd& samples, std::span<const double> y) {
    for (Eigen::Index c = 0; c < samples.cols(); ++c) os << 'x' << c << ',';
    os << "objective\n";
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        for (Eigen::Index c = 0; c < samples.cols(); ++c) os << format_double(samples(r, c)) << ',';
        os << format_double(y[static_cast<std::size_t>(r)]) << '\n';
    }
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
    if (out.empty()) throw ConfigError("empty list: '" + text + "'");
    return out;
}

template <class T>
std::vector<T> as(const std::vector<double>& v) {
    return std::vector<T>(v.begin(), v.end());
}

void write_tuning(std::ostream& os, const std::vector<TuningRow>& rows) {
    os << "rank,window_modifier,smooth_modifier,thin_step,delays,modes,mean_wmape,median_wmape,score\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << i + 1 << ',' << format_double(r.hyper.windowModifier) << ',' << format_double(r.hyper.smoothModifier) << ','
           << r.hyper.thinStep << ',' << r.hyper.delays << ',' << r.hyper.modes << ',' << format_double(r.meanWmape)
           << ',' << format_double(r.medianWmape) << ',' << format_double(r.score()) << '\n';
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"EMG grip-force estimation and short-term prediction"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--seed", common.seed, "Random seed");
    app.add_option("--config", common.config, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", common.out, "Output directory (default $KOOPGRIP_OUT_DIR or .)");

    std::function<void()> action;
    PipelineFlags pf;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic recordings");
    std::string synthName = "synthetic";
    int synthCount = 1;
    std::optional<double> synthDuration, synthForce;
    std::string synthSubject = "synthetic";
    synth->add_option("--name", synthName, "File stem");
    synth->add_option("--count", synthCount, "Number of recordings")->check(CLI::PositiveNumber);
    synth->add_option("--duration", synthDuration, "Seconds per recording");
    synth->add_option("--max-force", synthForce, "Force at 100% level (N)");
    synth->add_option("--subject", synthSubject, "Subject label");
    synth->callback([&] {
        action = [&] {
            SynthProfile p;
            p.totalDuration = common.cfg.resolve<double>("synth.duration", synthDuration, p.totalDuration);
            p.maxForce = common.cfg.resolve<double>("synth.max_force", synthForce, p.maxForce);
            p.meta.subject = synthSubject;
            const auto dir = common.out_dir();
            const auto seed = common.seed_value();
            for (int i = 0; i < synthCount; ++i) {
                p.meta.replication = i + 1;
                const auto stem = dir / (synthCount == 1 ? synthName : synthName + "_" + std::to_string(i + 1));
                write_recording(stem, synth_recording(p, seed + static_cast<std::uint64_t>(i)));
                out << stem.string() << '\n';
            }
        };
    });

    // mask
    auto* mask = app.add_subcommand("mask", "Spectral mask files");
    mask->require_subcommand(1);
    auto* maskDefault = mask->add_subcommand("default", "Write the default mask");
    std::optional<std::string> maskOut;
    maskDefault->add_option("--file", maskOut, "Output file (default <out>/mask.tsv)");
    maskDefault->callback([&] {
        action = [&] {
            const fs::path path = maskOut ? fs::path(*maskOut) : common.out_dir() / "mask.tsv";
            auto os = open_out(path);
            write_mask(os, default_optimal_mask());
            out << path.string() << '\n';
        };
    });
    auto* maskShow = mask->add_subcommand("show", "Print the mask in effect");
    add_pipeline_flags(maskShow, pf);
    maskShow->callback([&] { action = [&] { write_mask(out, pipeline_config(common, pf).mask); }; });

    // process
    auto* process = app.add_subcommand("process", "Raw EMG to processed EMG");
    std::string processInput;
    process->add_option("--input", processInput, "Recording stem")->required();
    add_pipeline_flags(process, pf);
    process->callback([&] {
        action = [&] {
            const auto cfg = pipeline_config(common, pf);
            const auto rec = read_recording(processInput);
            const auto processed = process_recording(rec.emg, cfg.mask, cfg.smoothing, cfg.batchSize);
            const auto path = common.out_dir() / (stem_name(processInput) + "_processed.csv");
            write_series_file(path, processed, &rec.meta);
            out << path.string() << '\n';
        };
    });

    // xcorr
    auto* xcorr = app.add_subcommand("xcorr", "Peak cross-correlation summary");
    std::vector<std::string> xcorrInputs;
    xcorr->add_option("--input", xcorrInputs, "Recording stems")->required();
    add_pipeline_flags(xcorr, pf);
    xcorr->callback([&] {
        action = [&] {
            const auto cfg = pipeline_config(common, pf);
            auto os = open_out(common.out_dir() / "xcorr.csv");
            os << "recording,peak,lag_ms\n";
            std::vector<double> peaks, lags;
            for (const auto& s : xcorrInputs) {
                const auto rec = read_recording(s);
                const auto cc = recording_cross_correlation(rec, cfg);
                const double lagMs = 1000.0 * cc.lag / estimate_rate(rec.emg);
                os << stem_name(s) << ',' << format_double(cc.peak) << ',' << format_double(lagMs) << '\n';
                peaks.push_back(cc.peak);
                lags.push_back(lagMs);
            }
            write_summary(out, "peak", summary_stats(peaks));
            write_summary(out, "lag_ms", summary_stats(lags));
        };
    });

    // sa
    auto* sa = app.add_subcommand("sa", "Sensitivity analysis of the processing parameters");
    sa->require_subcommand(1);
    std::vector<std::string> saInputs;
    std::size_t saSamples = 256;
    std::size_t saBoot = 100;
    bool saGroups = false;
    std::optional<std::string> saBounds;
    std::size_t saHarmonics = 10;
    auto saOptions = [&](CLI::App* s) {
        s->add_option("--input", saInputs, "Recording stems")->required();
        s->add_option("--samples", saSamples, "Base samples (Sobol) or sample count");
        s->add_option("--boot", saBoot, "Bootstrap resamples");
        s->add_flag("--groups", saGroups, "Group mask bins / window / decay");
        s->add_option("--bounds-file", saBounds, "Narrowing record; last step's bounds are used");
    };
    auto* saSobol = sa->add_subcommand("sobol", "Saltelli sampling + Sobol indices");
    auto* saRbd = sa->add_subcommand("rbdfast", "RBD-FAST first-order indices");
    auto* saLh = sa->add_subcommand("lh", "Latin hypercube samples with projections");
    saOptions(saSobol);
    saOptions(saRbd);
    saOptions(saLh);
    saRbd->add_option("--harmonics", saHarmonics, "Harmonics for RBD-FAST");
    auto runSa = [&](const std::string& kind) {
        action = [&, kind] {
            const auto bounds = bounds_from(saBounds);
            const auto data = objective_dataset(saInputs, 5.0);
            const auto seed = common.seed_value();
            const auto dir = common.out_dir();
            Eigen::MatrixXd samples;
            if (kind == "sobol") {
                const auto groups = saGroups ? decision_groups() : std::vector<int>{};
                samples = saltelli_sample(bounds, saSamples, groups, seed);
                const auto y = evaluate_objective(data, samples);
                auto res = sobol_indices(samples, y, groups, saBoot, seed);
                if (saGroups) res.labels = {"mask", "window", "decay"};
                auto os = open_out(dir / "sa_sobol.txt");
                write_sa_report(os, res);
                write_sa_report(out, res);
            } else if (kind == "rbdfast") {
                samples = rbdfast_sample(bounds, saSamples, seed);
                const auto y = evaluate_objective(data, samples);
                const auto res = rbdfast_indices(samples, y, saHarmonics, saBoot, seed);
                auto os = open_out(dir / "sa_rbdfast.txt");
                write_sa_report(os, res);
                write_sa_report(out, res);
            } else {
                samples = latin_hypercube(bounds, saSamples, seed);
                const auto y = evaluate_objective(data, samples);
                auto os = open_out(dir / "sa_lh.csv");
                write_samples(os, samples, y);
                auto ps = open_out(dir / "sa_lh_projections.csv");
                ps << "variable,bin_center,bin_mean,count,trend\n";
                for (std::size_t v : {kMaskVariables, kMaskVariables + 1}) {
                    const auto p = projection_summary(samples, y, v, 10);
                    for (std::size_t b = 0; b < p.binCenters.size(); ++b)
                        ps << (v == kMaskVariables ? "window" : "decay") << ',' << format_double(p.binCenters[b]) << ','
                           << format_double(p.binMeans[b]) << ',' << p.binCounts[b] << ','
                           << format_double(p.trend[b]) << '\n';
                }
                out << "objective min " << format_double(*std::min_element(y.begin(), y.end())) << '\n';
            }
        };
    };
    saSobol->callback([&] { runSa("sobol"); });
    saRbd->callback([&] { runSa("rbdfast"); });
    saLh->callback([&] { runSa("lh"); });

    // fit
    auto* fit = app.add_subcommand("fit", "Train the static estimator on a calibration recording");
    std::string fitInput;
    fit->add_option("--calibration", fitInput, "Calibration recording stem")->required();
    add_pipeline_flags(fit, pf);
    fit->callback([&] {
        action = [&] {
            const auto cfg = pipeline_config(common, pf);
            const auto rec = read_recording(fitInput);
            const auto t0 = std::chrono::steady_clock::now();
            const auto model = train_estimator(rec, cfg);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const auto path = common.out_dir() / "model.txt";
            auto os = open_out(path);
            write_model(os, model);
            out << "model " << path.string() << "\nkept_indicators " << model.keptSubregions.size()
                << "\ntraining_s " << format_double(secs) << '\n';
        };
    });

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Offline grip estimates for a recording");
    std::string estModel, estInput;
    estimate->add_option("--model", estModel, "Model file")->required();
    estimate->add_option("--input", estInput, "Recording stem")->required();
    add_pipeline_flags(estimate, pf);
    estimate->callback([&] {
        action = [&] {
            const auto cfg = pipeline_config(common, pf);
            const auto model = load_model(estModel);
            const auto rec = read_recording(estInput);
            const auto t0 = std::chrono::steady_clock::now();
            const auto processed = process_recording(rec.emg, cfg.mask, cfg.smoothing, cfg.batchSize);
            TimestampedSeries est;
            est.values = estimate_batch(model, processed.values);
            const auto f = static_cast<std::size_t>(model.hankel.downsampleFactor);
            for (std::size_t j = 0; j < est.values.size(); ++j) est.times.push_back(processed.times[j * f]);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            const auto truth = resample_linear(grip_force(rec, cfg.zeroWindow), est.times);
            const double w = wmape(truth.values, est.values);
            const auto dir = common.out_dir();
            write_series_file(dir / (stem_name(estInput) + "_estimates.csv"), est, &rec.meta);
            auto os = open_out(dir / (stem_name(estInput) + "_estimate_report.txt"));
            os << "wmape_percent " << format_double(w) << "\nruntime_ms " << format_double(ms) << '\n';
            out << "wmape_percent " << format_double(w) << "\nruntime_ms " << format_double(ms) << '\n';
        };
    });

    // predict
    auto* predict = app.add_subcommand("predict", "Batch forecasts from an estimate stream");
    std::string predModel, predEstimates;
    predict->add_option("--model", predModel, "Model file (for the grip scaler)")->required();
    predict->add_option("--estimates", predEstimates, "Estimate series file (t_s,value in N)")->required();
    add_pipeline_flags(predict, pf);
    predict->callback([&] {
        action = [&] {
            const auto cfg = pipeline_config(common, pf);
            const auto model = load_model(predModel);
            const auto est = read_series_file(predEstimates);
            std::vector<double> scaled;
            for (double v : est.values) scaled.push_back(std::max(model.gripScaler.apply(v), model.gripFloor));
            std::vector<ForecastRecord> records;
            std::size_t batch = 0;
            for (std::size_t end = kDownsampledBatch; end <= scaled.size(); end += kDownsampledBatch, ++batch) {
                const auto fc = predict_batch(std::span(est.times).first(end), std::span(scaled).first(end),
                                              cfg.forecast, model.gripScaler);
                if (!fc) continue;
                for (std::size_t i = 0; i < fc->times.size(); ++i) records.push_back({batch, fc->times[i], fc->values[i]});
            }
            const auto path = common.out_dir() / "forecasts.csv";
            auto os = open_out(path);
            write_forecasts(os, records);
            out << path.string() << '\n';
        };
    });

    // tune
    auto* tune = app.add_subcommand("tune", "Grid search over the prediction hyperparameters");
    std::string tuneModel;
    std::vector<std::string> tuneInputs;
    std::string gWindow = "1.1,1.3,1.5", gSmooth = "1,1.1,1.3", gThin = "5,7", gDelays = "6,8", gModes = "2,4";
    tune->add_option("--model", tuneModel, "Model file")->required();
    tune->add_option("--input", tuneInputs, "Recording stems")->required();
    tune->add_option("--grid-window", gWindow, "Prediction window modifiers");
    tune->add_option("--grid-smooth", gSmooth, "Smoothing window modifiers");
    tune->add_option("--grid-thin", gThin, "Thinning steps");
    tune->add_option("--grid-delays", gDelays, "Time delays");
    tune->add_option("--grid-modes", gModes, "Mode counts");
    add_pipeline_flags(tune, pf);
    tune->callback([&] {
        action = [&] {
            const auto cfg = pipeline_config(common, pf);
            const auto model = load_model(tuneModel);
            std::vector<ForecastCorpusItem> corpus;
            for (const auto& s : tuneInputs) {
                const auto rec = read_recording(s);
                const auto sim = stream_simulate(rec, model, cfg);
                corpus.push_back({sim.estimatesScaled, grip_force(rec, cfg.zeroWindow), sim.batchEnds});
            }
            GridSpec grid{parse_list(gWindow), parse_list(gSmooth), as<int>(parse_list(gThin)),
                          as<int>(parse_list(gDelays)), as<int>(parse_list(gModes))};
            const auto rows = hyperparameter_grid_search(corpus, grid, model.gripScaler);
            auto os = open_out(common.out_dir() / "tuning.csv");
            write_tuning(os, rows);
            write_tuning(out, std::vector<TuningRow>(rows.begin(), rows.begin() + 1));
        };
    });

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Block effects, ANOVA and summaries of per-run metrics");
    std::string evalRuns;
    std::string evalName = "evaluation";
    evaluate->add_option("--runs", evalRuns, "Run records (subject,position,replication,metric)")->required();
    evaluate->add_option("--name", evalName, "Report name");
    evaluate->callback([&] {
        action = [&] {
            std::ifstream is(evalRuns);
            if (!is) throw InputError("cannot open " + evalRuns);
            const auto runs = read_run_records(is);
            std::ostringstream report;
            std::vector<double> metric;
            for (const auto& r : runs) metric.push_back(r.metric);
            write_summary(report, "metric", summary_stats(metric));
            write_effects(report, block_effects(runs, BlockBy::Position), "position");
            write_effects(report, block_effects(runs, BlockBy::Subject), "subject");
            write_anova(report, anova_rbd(runs));
            auto os = open_out(common.out_dir() / (evalName + ".txt"));
            os << report.str();
            out << report.str();
        };
    });

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Stream a recording batch by batch");
    std::string simModel, simInput;
    bool simRealtime = false;
    simulate->add_option("--model", simModel, "Model file")->required();
    simulate->add_option("--input", simInput, "Recording stem")->required();
    simulate->add_flag("--realtime", simRealtime, "Sleep to the batch cadence");
    add_pipeline_flags(simulate, pf);
    simulate->callback([&] {
        action = [&] {
            const auto cfg = pipeline_config(common, pf);
            const auto model = load_model(simModel);
            const auto rec = read_recording(simInput);
            const auto sim = stream_simulate(rec, model, cfg, simRealtime);
            const auto metrics = evaluate_simulation(sim, grip_force(rec, cfg.zeroWindow));
            const auto dir = common.out_dir();
            const auto name = stem_name(simInput);
            write_series_file(dir / (name + "_estimates.csv"), sim.estimates, &rec.meta);
            {
                auto os = open_out(dir / (name + "_forecasts.csv"));
                write_forecasts(os, sim.forecasts);
            }
            {
                auto os = open_out(dir / (name + "_latency.csv"));
                os << "batch,process_ms,estimate_ms,predict_ms,total_ms\n";
                for (std::size_t b = 0; b < sim.batches; ++b)
                    os << b << ',' << format_double(sim.latency.processMs[b]) << ','
                       << format_double(sim.latency.estimateMs[b]) << ',' << format_double(sim.latency.predictMs[b])
                       << ',' << format_double(sim.latency.totalMs[b]) << '\n';
            }
            std::ostringstream report;
            report << "batches " << sim.batches << "\nforecasts " << metrics.forecastCount << "\nestimation_wmape "
                   << format_double(metrics.estimationWmape) << "\nprediction_wmape "
                   << format_double(metrics.predictionWmape) << "\nlatency_p50_ms "
                   << format_double(sim.latency.percentile(0.5)) << "\nlatency_p90_ms "
                   << format_double(sim.latency.percentile(0.9)) << "\nlatency_p99_ms "
                   << format_double(sim.latency.percentile(0.99)) << '\n';
            auto os = open_out(dir / (name + "_simulation.txt"));
            os << report.str();
            out << report.str();
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "error: " << e.what() << "\nrun with --help for usage\n";
        return 1;
    }

    try {
        common.load();
        if (action) action();
        return 0;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace koopgrip
