// Command-line front end: dataset generation, gradient checking, training,
// evaluation, and the loss-comparison / ablation harnesses.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparseloc/eval.hpp"
#include "sparseloc/runconfig.hpp"
#include "sparseloc/svg_plot.hpp"

namespace fs = std::filesystem;
using namespace sparseloc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return default_run_config();
    return load_run_config(path);
}

struct RunRow {
    std::string label;
    uint64_t seed = 0;
    bool failed = false;
    PRF loc;
    PRF ml;
};

struct EvalOutput {
    MetricsReport report;
};

MetricsReport evaluate_split(const ModelState& state, const std::vector<Sample>& samples,
                             LossVariant variant, const RunConfig& cfg) {
    MetricsReport report;
    std::vector<KeypointSet> preds;
    std::vector<const std::vector<uint8_t>*> maps;
    std::vector<std::array<int, 6>> presence;
    std::vector<PRF> per_image_prf;
    for (const Sample& sample : samples) {
        Heatmap logits = forward(state, sample.image, sample.height, sample.width);
        KeypointSet pred = decode_model_output(logits, variant, cfg);
        std::vector<std::vector<uint8_t>> masks;
        masks.reserve(sample.instances.size());
        for (const Instance& inst : sample.instances) masks.push_back(inst.mask);
        LocalizationResult loc =
            point_localization_metrics(pred, masks, sample.height, sample.width);
        report.per_image.push_back(loc);
        per_image_prf.push_back(loc.prf);
        preds.push_back(std::move(pred));
        maps.push_back(&sample.station_map);
        presence.push_back(sample.station_presence);
    }
    report.localization_mean = aggregate_localization(per_image_prf);
    report.stations = multilabel_station_metrics(preds, maps, presence,
                                                 samples.front().height, samples.front().width);
    return report;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_runs_csv(const std::string& path, const std::vector<RunRow>& rows,
                    const std::vector<std::string>& labels) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "loss,seed,locP,locR,locF1,mlP,mlR,mlF1\n";
    char buf[320];
    for (const RunRow& r : rows) {
        if (r.failed) {
            std::snprintf(buf, sizeof(buf), "%s,%llu,nan,nan,nan,nan,nan,nan\n", r.label.c_str(),
                          static_cast<unsigned long long>(r.seed));
        } else {
            std::snprintf(buf, sizeof(buf), "%s,%llu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                          r.label.c_str(), static_cast<unsigned long long>(r.seed),
                          r.loc.precision, r.loc.recall, r.loc.f1, r.ml.precision, r.ml.recall,
                          r.ml.f1);
        }
        f << buf;
    }
    for (const std::string& label : labels) {
        std::vector<double> lp, lr, lf, mp, mr, mf;
        for (const RunRow& r : rows) {
            if (r.label != label || r.failed) continue;
            lp.push_back(r.loc.precision);
            lr.push_back(r.loc.recall);
            lf.push_back(r.loc.f1);
            mp.push_back(r.ml.precision);
            mr.push_back(r.ml.recall);
            mf.push_back(r.ml.f1);
        }
        std::snprintf(buf, sizeof(buf), "%s,median,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      label.c_str(), median(lp), median(lr), median(lf), median(mp), median(mr),
                      median(mf));
        f << buf;
    }
}

void render_plot_from_csv(const std::string& csv_path, const std::string& svg_path,
                          const std::string& title) {
    std::ifstream f(csv_path);
    if (!f) throw IoError("cannot open: " + csv_path);
    std::string line;
    std::getline(f, line);  // header
    std::vector<BarGroup> groups;
    while (std::getline(f, line)) {
        auto fields = split_list(line);
        if (fields.size() < 8 || fields[1] != "median") continue;
        groups.push_back({fields[0],
                          {std::stod(fields[2]), std::stod(fields[3]), std::stod(fields[4])}});
    }
    if (groups.empty()) throw InputError("no median rows found in " + csv_path);
    write_bar_chart_svg(svg_path, title, {"precision", "recall", "F1"}, groups);
}

struct RunItem {
    std::string label;
    LossConfig loss;
};

int run_matrix(const RunConfig& cfg, const std::vector<RunItem>& items,
               const std::vector<uint64_t>& seeds, int threads, const std::string& out_dir,
               const std::string& plot_title) {
    const std::string manifest_path = (fs::path(cfg.dataset_dir) / "manifest.json").string();
    DatasetManifest manifest = load_manifest(manifest_path);
    const std::vector<Sample> train_samples = load_split(manifest, cfg.dataset_dir, "train");
    const std::vector<Sample> val_samples = load_split(manifest, cfg.dataset_dir, "val");
    const std::vector<Sample> test_samples = load_split(manifest, cfg.dataset_dir, "test");
    if (train_samples.empty() || val_samples.empty() || test_samples.empty())
        throw InputError("dataset at " + cfg.dataset_dir + " is missing a split");

    fs::create_directories(fs::path(out_dir) / "runs");

    struct Job {
        size_t item;
        uint64_t seed;
    };
    std::vector<Job> jobs;
    for (size_t i = 0; i < items.size(); ++i)
        for (uint64_t s : seeds) jobs.push_back({i, s});

    std::vector<RunRow> rows(jobs.size());
    std::atomic<size_t> next{0};
    std::mutex io_mutex;

    auto worker = [&]() {
        for (;;) {
            const size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            const Job& job = jobs[j];
            const RunItem& item = items[job.item];
            RunRow& row = rows[j];
            row.label = item.label;
            row.seed = job.seed;
            const std::string run_dir =
                (fs::path(out_dir) / "runs" / (item.label + "_seed" + std::to_string(job.seed)))
                    .string();
            fs::create_directories(run_dir);
            try {
                TrainConfig tc = cfg.train;
                tc.loss = item.loss;
                tc.seed = job.seed;
                TrainResult result = train(train_samples, val_samples, cfg.model, tc, cfg.codec);
                save_checkpoint(result.best_state, run_dir + "/best.ckpt");
                train_log_to_csv(result.log, run_dir + "/trainlog.csv");
                MetricsReport report =
                    evaluate_split(result.best_state, test_samples, item.loss.variant, cfg);
                report_to_csv(report, run_dir + "/metrics.csv");
                report_to_json(report, run_dir + "/metrics.json");
                row.loc = report.localization_mean;
                row.ml = report.stations.average;
                std::lock_guard<std::mutex> lock(io_mutex);
                std::printf("[done] %s seed %llu  locF1=%.3f mlF1=%.3f (%zu/%zu)\n",
                            item.label.c_str(), static_cast<unsigned long long>(job.seed),
                            row.loc.f1, row.ml.f1, j + 1, jobs.size());
                std::fflush(stdout);
            } catch (const std::exception& e) {
                row.failed = true;
                std::lock_guard<std::mutex> lock(io_mutex);
                std::fprintf(stderr, "[failed] %s seed %llu: %s\n", item.label.c_str(),
                             static_cast<unsigned long long>(job.seed), e.what());
            }
        }
    };

    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<std::string> labels;
    for (const RunItem& item : items) labels.push_back(item.label);
    write_runs_csv((fs::path(out_dir) / "runs.csv").string(), rows, labels);
    render_plot_from_csv((fs::path(out_dir) / "runs.csv").string(),
                         (fs::path(out_dir) / "runs.svg").string(), plot_title);
    return kExitOk;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_override) {
    RunConfig cfg = load_config_or_default(config_path);
    cfg.validate();
    const std::string out = out_override.empty() ? cfg.dataset_dir : out_override;
    DatasetManifest manifest = build_dataset(cfg.scene, cfg.counts, cfg.data_seed, out);
    std::printf("dataset written to %s (%zu samples)\n", out.c_str(), manifest.entries.size());
    return kExitOk;
}

int cmd_gradcheck(int trials, uint64_t seed, bool corrupt) {
    struct Entry {
        std::string name;
        LossConfig cfg;
    };
    std::vector<Entry> entries;
    for (LossVariant v : {LossVariant::MSE, LossVariant::Hill, LossVariant::CragAndTail,
                          LossVariant::MaskedMSE, LossVariant::SoftUncertainRegion,
                          LossVariant::HillPlusMSE}) {
        LossConfig c;
        c.variant = v;
        entries.push_back({"variant:" + to_string(v), c});
    }
    for (const std::string& row : ablation_row_names())
        entries.push_back({"ablation:" + row, make_ablation_config(row)});

    constexpr double kTolerance = 1e-5;
    bool all_ok = true;
    std::printf("%-32s %14s\n", "configuration", "max_rel_error");
    for (const Entry& e : entries) {
        double err = finite_difference_gradcheck(e.cfg, trials, seed);
        if (corrupt) err += 1.0;  // test hook: force a failure
        const bool ok = err < kTolerance;
        all_ok = all_ok && ok;
        std::printf("%-32s %14.3e %s\n", e.name.c_str(), err, ok ? "ok" : "FAIL");
    }
    return all_ok ? kExitOk : kExitRuntime;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& loss_name, int64_t seed_override) {
    RunConfig cfg = load_config_or_default(config_path);
    if (!loss_name.empty()) cfg.loss.variant = loss_variant_from_string(loss_name);
    cfg.train.loss = cfg.loss;
    if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);
    cfg.validate();

    DatasetManifest manifest =
        load_manifest((fs::path(cfg.dataset_dir) / "manifest.json").string());
    const auto train_samples = load_split(manifest, cfg.dataset_dir, "train");
    const auto val_samples = load_split(manifest, cfg.dataset_dir, "val");

    fs::create_directories(out_dir);
    TrainResult result = train(train_samples, val_samples, cfg.model, cfg.train, cfg.codec);
    save_checkpoint(result.best_state, (fs::path(out_dir) / "best.ckpt").string());
    train_log_to_csv(result.log, (fs::path(out_dir) / "trainlog.csv").string());
    std::printf("best epoch %d (val loss %.6g), stop: %s\n", result.log.best_epoch,
                result.log.best_val_loss, result.log.stop_reason.c_str());
    return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& split, const std::string& out_dir, const std::string& loss_name) {
    RunConfig cfg = load_config_or_default(config_path);
    if (!loss_name.empty()) cfg.loss.variant = loss_variant_from_string(loss_name);
    cfg.validate();

    ModelState state = load_checkpoint(checkpoint_path);
    DatasetManifest manifest =
        load_manifest((fs::path(cfg.dataset_dir) / "manifest.json").string());
    const auto samples = load_split(manifest, cfg.dataset_dir, split);
    if (samples.empty()) throw InputError("split '" + split + "' is empty");

    fs::create_directories(out_dir);
    MetricsReport report = evaluate_split(state, samples, cfg.loss.variant, cfg);
    report_to_csv(report, (fs::path(out_dir) / "metrics.csv").string());
    report_to_json(report, (fs::path(out_dir) / "metrics.json").string());
    std::printf("localization P/R/F1 = %.4f/%.4f/%.4f  multilabel P/R/F1 = %.4f/%.4f/%.4f\n",
                report.localization_mean.precision, report.localization_mean.recall,
                report.localization_mean.f1, report.stations.average.precision,
                report.stations.average.recall, report.stations.average.f1);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse-point heatmap localization toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint_path, split = "test";
    std::string losses_arg, rows_arg, seeds_arg, loss_name, csv_path;
    int trials = 1000;
    int threads = 1;
    int64_t seed_override = -1;
    bool corrupt = false;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    gen->add_option("--config", config_path);
    gen->add_option("--out", out_dir);

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of all loss gradients");
    grad->add_option("--trials", trials);
    grad->add_flag("--corrupt-gradient", corrupt)->group("");  // test hook, hidden

    auto* tr = app.add_subcommand("train", "train one model");
    tr->add_option("--config", config_path);
    tr->add_option("--out", out_dir)->required();
    tr->add_option("--loss", loss_name);
    tr->add_option("--seed", seed_override);

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    ev->add_option("--config", config_path);
    ev->add_option("--checkpoint", checkpoint_path)->required();
    ev->add_option("--split", split);
    ev->add_option("--out", out_dir)->required();
    ev->add_option("--loss", loss_name);

    auto* bench = app.add_subcommand("benchmark", "train/evaluate a set of losses over seeds");
    bench->add_option("--config", config_path);
    bench->add_option("--out", out_dir)->required();
    bench->add_option("--losses", losses_arg)->required();
    bench->add_option("--seeds", seeds_arg);
    bench->add_option("--threads", threads);

    auto* abl = app.add_subcommand("ablate", "run ablation-table rows over seeds");
    abl->add_option("--config", config_path);
    abl->add_option("--out", out_dir)->required();
    abl->add_option("--rows", rows_arg)->required();
    abl->add_option("--seeds", seeds_arg);
    abl->add_option("--threads", threads);

    auto* rep = app.add_subcommand("report", "re-render plots from an existing runs CSV");
    rep->add_option("--csv", csv_path)->required();
    rep->add_option("--out", out_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
        if (grad->parsed()) return cmd_gradcheck(trials, 20240817, corrupt);
        if (tr->parsed()) return cmd_train(config_path, out_dir, loss_name, seed_override);
        if (ev->parsed()) return cmd_eval(config_path, checkpoint_path, split, out_dir, loss_name);

        if (bench->parsed() || abl->parsed()) {
            RunConfig cfg = load_config_or_default(config_path);
            cfg.validate();
            std::vector<uint64_t> seeds = cfg.seeds;
            if (!seeds_arg.empty()) {
                seeds.clear();
                for (const std::string& s : split_list(seeds_arg))
                    seeds.push_back(std::stoull(s));
            }
            std::vector<RunItem> items;
            if (bench->parsed()) {
                for (const std::string& name : split_list(losses_arg)) {
                    LossConfig lc = cfg.loss;
                    lc.variant = loss_variant_from_string(name);
                    items.push_back({name, lc});
                }
            } else {
                for (const std::string& row : split_list(rows_arg))
                    items.push_back({row, make_ablation_config(row)});
            }
            fs::create_directories(out_dir);
            return run_matrix(cfg, items, seeds, threads, out_dir,
                              bench->parsed() ? "loss comparison (median over seeds)"
                                              : "ablation (median over seeds)");
        }
        if (rep->parsed()) {
            fs::create_directories(out_dir);
            render_plot_from_csv(csv_path, (fs::path(out_dir) / "runs.svg").string(),
                                 "loss comparison (median over seeds)");
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitValidation;
}
