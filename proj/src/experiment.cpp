#include "kvda/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;

namespace kvda {

std::string config_hash_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) h = (h ^ c) * 1099511628211ULL;
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::string resolve_out_dir(const std::string& dir) {
    if (dir.empty()) throw std::invalid_argument("output directory required");
    fs::path p(dir);
    if (p.is_absolute()) return dir;
    const char* root = std::getenv("KVDA_OUT_ROOT");
    if (root && *root) return (fs::path(root) / p).string();
    return dir;
}

void ExperimentConfig::validate() const {
    method_from_string(method);  // throws on unknown names
    if (seeds.empty()) throw std::invalid_argument("config: seed list must be non-empty");
    if (folds.empty()) throw std::invalid_argument("config: fold list must be non-empty");
    for (int f : folds)
        if (f < 0 || f >= k_folds)
            throw std::invalid_argument("config: fold index out of range");
    if (lambda < 0 || lambda > 1) throw std::invalid_argument("config: lambda must be in [0,1]");
    if (min_frames < 3)
        throw std::invalid_argument("config: min_frames must be >= 3 (scale 2 needs T-1 >= 2)");
}

ModelConfig ExperimentConfig::model_config(int vis_dim) const {
    ModelConfig m;
    m.method = method_from_string(method);
    m.vis_dim = vis_dim;
    if (paper_scale) {
        m.hidden_dim = 256;
        m.lstm_hidden = 128;
        m.fusion_dim = 256;
        m.head_hidden = 128;
    } else {
        m.hidden_dim = hidden_dim;
        m.lstm_hidden = lstm_hidden;
        m.fusion_dim = fusion_dim > 0 ? fusion_dim : hidden_dim;
        m.head_hidden = head_hidden > 0 ? head_hidden : hidden_dim;
    }
    m.max_scale = max_scale;
    m.subsets_per_scale = subsets_per_scale;
    m.fusion_mode = fusion_mode_from_string(fusion_mode);
    m.lambda = lambda;
    m.grl_beta = grl_beta;
    return m;
}

TrainConfig ExperimentConfig::train_config(std::uint64_t seed) const {
    TrainConfig t;
    t.lr = lr;
    t.batch_per_domain = paper_scale ? 256 : batch_per_domain;
    t.epochs = epochs;
    t.seed = seed;
    t.grl_warmup = grl_warmup;
    return t;
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json js;
    js["data_dir"] = data_dir;
    js["method"] = method;
    js["epochs"] = epochs;
    js["batch_per_domain"] = batch_per_domain;
    js["hidden_dim"] = hidden_dim;
    js["lstm_hidden"] = lstm_hidden;
    js["max_scale"] = max_scale;
    js["subsets_per_scale"] = subsets_per_scale;
    js["fusion_dim"] = fusion_dim;
    js["head_hidden"] = head_hidden;
    js["fusion_mode"] = fusion_mode;
    js["lambda"] = lambda;
    js["lr"] = lr;
    js["grl_beta"] = grl_beta;
    js["grl_warmup"] = grl_warmup;
    js["paper_scale"] = paper_scale;
    js["k_folds"] = k_folds;
    js["fold_seed"] = fold_seed;
    js["folds"] = folds;
    js["seeds"] = seeds;
    js["min_frames"] = min_frames;
    return js.dump();
}

namespace {

std::vector<Segment> filter_min_frames(const std::vector<Segment>& segments, int min_frames,
                                       int* dropped = nullptr) {
    std::vector<Segment> out;
    int n_dropped = 0;
    for (const auto& s : segments) {
        if (s.length() >= min_frames) out.push_back(s);
        else ++n_dropped;
    }
    if (n_dropped > 0)
        std::cerr << "kvda: skipping " << n_dropped << " segment(s) shorter than "
                  << min_frames << " frames\n";
    if (dropped) *dropped = n_dropped;
    return out;
}

}  // namespace

FoldData fold_data(const PairedDataset& data, int fold, int k_folds, std::uint64_t fold_seed,
                   int min_frames) {
    const DatasetSplit sim_split = make_folds(data.sim.segments, k_folds, fold_seed);
    const DatasetSplit real_split = make_folds(data.real.segments, k_folds, fold_seed);
    FoldData out;
    for (const auto& s : filter_min_frames(data.sim.segments, min_frames)) {
        if (sim_split.is_test_trial(fold, s.trial_id)) out.source_test.push_back(s);
        else out.source_train.push_back(s);
    }
    for (const auto& s : filter_min_frames(data.real.segments, min_frames)) {
        if (real_split.is_test_trial(fold, s.trial_id)) out.target_test.push_back(s);
        else out.target_train.push_back(s);
    }
    return out;
}

void cmd_generate(const GenerateOptions& opt) {
    const std::string out_dir = resolve_out_dir(opt.out_dir);
    const ShiftConfig shift = preset(opt.preset_name);
    SynthParams params;
    params.vis_dim = opt.vis_dim;
    const PairedDataset data = generate_dataset(shift, opt.n_trials, opt.seed, params);
    write_dataset(out_dir, data, opt.preset_name, shift, opt.n_trials, opt.seed, params);
    std::cout << "wrote dataset (" << data.sim.segments.size() << " sim / "
              << data.real.segments.size() << " real segments) to " << out_dir << "\n";
}

RunInfo cmd_train(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    cfg.out_dir = resolve_out_dir(cfg.out_dir);
    cfg.validate();
    const std::string hash = config_hash_hex(cfg.to_json());

    const PairedDataset data = load_dataset_dir(cfg.data_dir);
    fs::create_directories(cfg.out_dir);
    write_segment_index(data.sim.segments, cfg.out_dir + "/segments_sim.json");
    write_segment_index(data.real.segments, cfg.out_dir + "/segments_real.json");

    const ModelConfig mc = cfg.model_config(data.sim.vis_dim);

    RunInfo info;
    info.run_dir = cfg.out_dir;
    info.config_hash = hash;
    info.config = cfg;

    for (int fold : cfg.folds) {
        const FoldData fd = fold_data(data, fold, cfg.k_folds, cfg.fold_seed, cfg.min_frames);
        for (std::uint64_t seed : cfg.seeds) {
            Model model = Model::init(mc, seed);
            const auto source = prepare_inputs(fd.source_train, mc);
            const auto target = prepare_inputs(fd.target_train, mc);
            const TrainResult result = train(model, source, target, cfg.train_config(seed));

            const std::string sub = cfg.out_dir + "/fold" + std::to_string(fold) + "_seed" +
                                    std::to_string(seed);
            fs::create_directories(sub);
            RunEntry entry;
            entry.fold = fold;
            entry.seed = seed;
            entry.checkpoint_path = sub + "/checkpoint.json";
            entry.log_path = sub + "/train_log.csv";
            save_checkpoint(model, entry.checkpoint_path,
                            {{"config_hash", hash},
                             {"fold", std::to_string(fold)},
                             {"seed", std::to_string(seed)}});
            write_train_log(result, model, entry.log_path);
            info.entries.push_back(entry);
            if (!result.log.empty())
                std::cout << "fold " << fold << " seed " << seed << " method " << cfg.method
                          << ": final L=" << result.log.back().loss_c +
                                                result.log.back().loss_kd +
                                                result.log.back().loss_kvd
                          << " source_acc=" << result.log.back().source_acc << "\n";
        }
    }

    nlohmann::json manifest;
    manifest["format"] = "kvda.run.v1";
    manifest["config"] = nlohmann::json::parse(cfg.to_json());
    manifest["config_hash"] = hash;
    manifest["model_config"] = nlohmann::json::parse(model_config_to_json(mc));
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : info.entries)
        entries.push_back({{"fold", e.fold},
                           {"seed", e.seed},
                           {"checkpoint", e.checkpoint_path},
                           {"log", e.log_path}});
    manifest["entries"] = entries;
    std::ofstream out(cfg.out_dir + "/run_manifest.json");
    if (!out) throw std::runtime_error("cannot write run manifest");
    out << manifest.dump(1) << "\n";
    return info;
}

RunInfo load_run_info(const std::string& run_dir) {
    std::ifstream in(run_dir + "/run_manifest.json");
    if (!in) throw std::runtime_error("no run_manifest.json in " + run_dir);
    nlohmann::json js;
    in >> js;
    if (js.value("format", "") != "kvda.run.v1")
        throw std::runtime_error("not a kvda run directory: " + run_dir);
    RunInfo info;
    info.run_dir = run_dir;
    info.config_hash = js.at("config_hash").get<std::string>();
    const auto& c = js.at("config");
    ExperimentConfig cfg;
    cfg.data_dir = c.at("data_dir").get<std::string>();
    cfg.method = c.at("method").get<std::string>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.batch_per_domain = c.at("batch_per_domain").get<int>();
    cfg.hidden_dim = c.at("hidden_dim").get<int>();
    cfg.lstm_hidden = c.at("lstm_hidden").get<int>();
    cfg.max_scale = c.at("max_scale").get<int>();
    cfg.subsets_per_scale = c.at("subsets_per_scale").get<int>();
    cfg.fusion_dim = c.at("fusion_dim").get<int>();
    cfg.head_hidden = c.at("head_hidden").get<int>();
    cfg.fusion_mode = c.at("fusion_mode").get<std::string>();
    cfg.lambda = c.at("lambda").get<double>();
    cfg.lr = c.at("lr").get<double>();
    cfg.grl_beta = c.at("grl_beta").get<double>();
    cfg.grl_warmup = c.at("grl_warmup").get<bool>();
    cfg.paper_scale = c.at("paper_scale").get<bool>();
    cfg.k_folds = c.at("k_folds").get<int>();
    cfg.fold_seed = c.at("fold_seed").get<std::uint64_t>();
    cfg.folds = c.at("folds").get<std::vector<int>>();
    cfg.seeds = c.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.min_frames = c.at("min_frames").get<int>();
    info.config = cfg;
    for (const auto& e : js.at("entries")) {
        RunEntry entry;
        entry.fold = e.at("fold").get<int>();
        entry.seed = e.at("seed").get<std::uint64_t>();
        entry.checkpoint_path = e.at("checkpoint").get<std::string>();
        entry.log_path = e.at("log").get<std::string>();
        info.entries.push_back(entry);
    }
    return info;
}

namespace {

std::vector<Segment> domain_test_segments(const PairedDataset& data, const std::string& domain,
                                          int fold, int k_folds, std::uint64_t fold_seed,
                                          int min_frames) {
    const FoldData fd = fold_data(data, fold, k_folds, fold_seed, min_frames);
    if (domain == "real") return fd.target_test;
    if (domain == "sim") return fd.source_test;
    throw std::invalid_argument("domain must be 'sim' or 'real'");
}

}  // namespace

MetricsReport cmd_evaluate(const EvalOptions& opt) {
    if (opt.data_dir.empty()) throw std::invalid_argument("evaluate: data directory required");
    const PairedDataset data = load_dataset_dir(opt.data_dir);

    std::vector<MetricsReport> reports;
    std::string out_path = opt.out_path;

    if (!opt.run_dir.empty()) {
        const RunInfo info = load_run_info(opt.run_dir);
        for (const auto& e : info.entries) {
            const Model model = load_checkpoint(e.checkpoint_path);
            if (model.cfg.use_visual() && model.cfg.vis_dim != data.sim.vis_dim)
                throw std::runtime_error(
                    "checkpoint/dataset mismatch: visual dimension differs (" +
                    std::to_string(model.cfg.vis_dim) + " vs " +
                    std::to_string(data.sim.vis_dim) + ")");
            const auto segments =
                domain_test_segments(data, opt.domain, e.fold, info.config.k_folds,
                                     info.config.fold_seed, info.config.min_frames);
            MetricsReport r = evaluate(model, segments);
            r.seeds = {e.seed};
            reports.push_back(std::move(r));
        }
        if (out_path.empty())
            out_path = opt.run_dir + "/report_" + opt.domain + ".json";
    } else if (!opt.checkpoint_path.empty()) {
        const Model model = load_checkpoint(opt.checkpoint_path);
        if (model.cfg.use_visual() && model.cfg.vis_dim != data.sim.vis_dim)
            throw std::runtime_error("checkpoint/dataset mismatch: visual dimension differs");
        std::vector<Segment> segments;
        for (const auto& s : opt.domain == "real" ? data.real.segments : data.sim.segments)
            if (s.length() >= 3) segments.push_back(s);
        reports.push_back(evaluate(model, segments));
    } else {
        throw std::invalid_argument("evaluate: --run or --checkpoint required");
    }

    MetricsReport agg = aggregate(reports);
    if (!out_path.empty()) {
        write_report(agg, out_path);
        write_confusion_csv(agg, out_path + ".confusion.csv");
    }
    std::cout << format_report_table(agg);
    return agg;
}

std::vector<AblationRow> cmd_ablate(const ExperimentConfig& base) {
    const std::vector<std::string> methods = {"baseline-position", "baseline-direction", "mdok",
                                              "mdok+kvatt"};
    const std::string out_dir = resolve_out_dir(base.out_dir);
    fs::create_directories(out_dir);

    std::vector<AblationRow> rows;
    for (const auto& method : methods) {
        ExperimentConfig cfg = base;
        cfg.method = method;
        cfg.out_dir = out_dir + "/" + method;
        const RunInfo info = cmd_train(cfg);

        EvalOptions eval;
        eval.run_dir = info.run_dir;
        eval.data_dir = cfg.data_dir;
        eval.domain = "real";
        AblationRow row;
        row.method = method;
        row.report = cmd_evaluate(eval);
        rows.push_back(std::move(row));
    }
    const double baseline_acc = rows.front().report.accuracy;
    for (auto& row : rows) row.gain_acc = row.report.accuracy - baseline_acc;

    std::ofstream out(out_dir + "/ablation.csv");
    if (!out) throw std::runtime_error("cannot write ablation table");
    out << "method,acc_mean,acc_std,pr_mean,re_mean,ja_mean,f1_mean,gain_acc\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << row.method << ',' << 100 * r.accuracy << ',' << 100 * r.accuracy_std << ','
            << 100 * r.precision << ',' << 100 * r.recall << ',' << 100 * r.jaccard << ','
            << 100 * r.f1 << ',' << 100 * row.gain_acc << '\n';
    }
    std::cout << "ablation table written to " << out_dir << "/ablation.csv\n";
    for (const auto& row : rows)
        std::cout << row.method << ": acc " << 100 * row.report.accuracy << "% (gain "
                  << 100 * row.gain_acc << ")\n";
    return rows;
}

std::vector<SweepRow> cmd_sweep_lambda(const ExperimentConfig& base,
                                       const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("sweep-lambda: no values");
    const std::string out_dir = resolve_out_dir(base.out_dir);
    fs::create_directories(out_dir);

    std::vector<SweepRow> rows;
    std::ofstream per_seed(out_dir + "/lambda_sweep_runs.csv");
    per_seed << "lambda,seed,acc\n";
    for (double lam : values) {
        ExperimentConfig cfg = base;
        cfg.method = "mdok+kvatt";
        cfg.lambda = lam;
        char tag[32];
        std::snprintf(tag, sizeof tag, "lambda_%.3f", lam);
        cfg.out_dir = out_dir + "/" + tag;
        const RunInfo info = cmd_train(cfg);

        const PairedDataset data = load_dataset_dir(cfg.data_dir);
        std::vector<double> accs;
        for (const auto& e : info.entries) {
            const Model model = load_checkpoint(e.checkpoint_path);
            const auto segments = domain_test_segments(data, "real", e.fold, cfg.k_folds,
                                                       cfg.fold_seed, cfg.min_frames);
            const MetricsReport r = evaluate(model, segments);
            accs.push_back(r.accuracy);
            per_seed << lam << ',' << e.seed << ',' << r.accuracy << '\n';
        }
        SweepRow row;
        row.lambda = lam;
        for (double a : accs) row.acc_mean += a;
        row.acc_mean /= static_cast<double>(accs.size());
        double var = 0;
        for (double a : accs) var += (a - row.acc_mean) * (a - row.acc_mean);
        row.acc_std = std::sqrt(var / static_cast<double>(accs.size()));
        rows.push_back(row);
    }

    std::ofstream out(out_dir + "/lambda_sweep.csv");
    if (!out) throw std::runtime_error("cannot write lambda sweep table");
    out << "lambda,acc_mean,acc_std\n";
    for (const auto& r : rows) out << r.lambda << ',' << r.acc_mean << ',' << r.acc_std << '\n';
    std::cout << "lambda sweep written to " << out_dir << "/lambda_sweep.csv\n";
    for (const auto& r : rows)
        std::cout << "lambda " << r.lambda << ": acc " << 100 * r.acc_mean << "%\n";
    return rows;
}

namespace {

void add_experiment_flags(CLI::App* app, ExperimentConfig& cfg) {
    app->add_option("--data", cfg.data_dir, "dataset directory (sim/ and real/ tables)")
        ->required();
    app->add_option("--out", cfg.out_dir, "output directory")->required();
    app->add_option("--epochs", cfg.epochs, "training epochs");
    app->add_option("--batch", cfg.batch_per_domain, "batch size per domain");
    app->add_option("--hidden", cfg.hidden_dim, "relation feature width");
    app->add_option("--lstm-hidden", cfg.lstm_hidden, "LSTM state width (0 = hidden/2)");
    app->add_option("--max-scale", cfg.max_scale, "largest relation scale S");
    app->add_option("--subsets", cfg.subsets_per_scale, "index subsets per scale");
    app->add_option("--fusion-dim", cfg.fusion_dim, "fused feature width (0 = hidden)");
    app->add_option("--head-hidden", cfg.head_hidden, "head hidden width (0 = hidden)");
    app->add_option("--fusion-mode", cfg.fusion_mode, "elementwise | scalar-attention");
    app->add_option("--lambda", cfg.lambda, "classifier mixture weight");
    app->add_option("--lr", cfg.lr, "learning rate");
    app->add_option("--grl-beta", cfg.grl_beta, "gradient reversal coefficient");
    app->add_flag("--grl-warmup", cfg.grl_warmup, "ramp the GRL coefficient");
    app->add_flag("--paper-scale", cfg.paper_scale, "use the published sizes (hidden 256, batch 256)");
    app->add_option("--k-folds", cfg.k_folds, "cross-validation folds");
    app->add_option("--fold-seed", cfg.fold_seed, "fold split seed");
    app->add_option("--folds", cfg.folds, "fold indices to run")->delimiter(',');
    app->add_option("--seeds", cfg.seeds, "training seeds")->delimiter(',');
    app->add_option("--min-frames", cfg.min_frames, "minimum segment length used");
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"kvda: sim-to-real domain adaptation for multi-modal gesture sequences"};
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* generate = app.add_subcommand("generate", "generate a paired two-domain dataset");
    generate->add_option("--preset", gen.preset_name, "shift preset")->required();
    generate->add_option("--trials", gen.n_trials, "trials per domain");
    generate->add_option("--seed", gen.seed, "generator seed");
    generate->add_option("--vis-dim", gen.vis_dim, "visual feature dimension");
    generate->add_option("--out", gen.out_dir, "output dataset directory")->required();

    ExperimentConfig train_cfg;
    auto* train_cmd = app.add_subcommand("train", "train one method over folds and seeds");
    train_cmd->add_option("--method", train_cfg.method,
                          "baseline-position | baseline-direction | mdok | mdok+kvatt");
    add_experiment_flags(train_cmd, train_cfg);

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a run or checkpoint");
    eval_cmd->add_option("--run", eval.run_dir, "run directory from `kvda train`");
    eval_cmd->add_option("--checkpoint", eval.checkpoint_path, "single checkpoint file");
    eval_cmd->add_option("--data", eval.data_dir, "dataset directory")->required();
    eval_cmd->add_option("--domain", eval.domain, "sim | real");
    eval_cmd->add_option("--out", eval.out_path, "report output path");

    ExperimentConfig ablate_cfg;
    auto* ablate_cmd = app.add_subcommand("ablate", "compare all methods on one dataset");
    add_experiment_flags(ablate_cmd, ablate_cfg);

    ExperimentConfig sweep_cfg;
    std::vector<double> sweep_values{0.2, 0.5, 0.7, 0.8};
    auto* sweep_cmd = app.add_subcommand("sweep-lambda", "accuracy across lambda values");
    sweep_cmd->add_option("--values", sweep_values, "lambda values")->delimiter(',');
    add_experiment_flags(sweep_cmd, sweep_cfg);

    try {
        app.parse(argc, argv);
        if (*generate) cmd_generate(gen);
        if (*train_cmd) cmd_train(train_cfg);
        if (*eval_cmd) cmd_evaluate(eval);
        if (*ablate_cmd) cmd_ablate(ablate_cfg);
        if (*sweep_cmd) cmd_sweep_lambda(sweep_cfg, sweep_values);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "kvda: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace kvda
