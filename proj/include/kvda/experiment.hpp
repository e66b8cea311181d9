#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kvda/metrics.hpp"
#include "kvda/model.hpp"
#include "kvda/synthgen.hpp"
#include "kvda/train.hpp"

namespace kvda {

/// FNV-1a hash of a canonical config string, hex-encoded. Every emitted
/// artifact carries the hash of the config that produced it.
std::string config_hash_hex(const std::string& text);

/// Resolves an output directory against $KVDA_OUT_ROOT when relative.
std::string resolve_out_dir(const std::string& dir);

struct GenerateOptions {
    std::string preset_name = "none";
    int n_trials = 20;
    std::uint64_t seed = 7;
    int vis_dim = 32;
    std::string out_dir;
};

/// Experiment configuration shared by train / ablate / sweep-lambda.
struct ExperimentConfig {
    std::string data_dir;
    std::string out_dir;
    std::string method = "mdok+kvatt";

    // Desk-scale defaults; --paper-scale switches to the published sizes.
    int epochs = 30;
    int batch_per_domain = 32;
    int hidden_dim = 64;
    int lstm_hidden = 0;
    int max_scale = 10;
    int subsets_per_scale = 3;
    int fusion_dim = 0;   // 0 -> hidden_dim
    int head_hidden = 0;  // 0 -> hidden_dim
    std::string fusion_mode = "elementwise";
    double lambda = 0.8;
    double lr = 1e-3;
    double grl_beta = 0.5;
    bool grl_warmup = false;
    bool paper_scale = false;

    int k_folds = 5;
    std::uint64_t fold_seed = 1234;
    std::vector<int> folds{0};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int min_frames = 3;  // segments shorter than this are skipped (scale 2 needs T-1 >= 2)

    void validate() const;
    ModelConfig model_config(int vis_dim) const;
    TrainConfig train_config(std::uint64_t seed) const;
    std::string to_json() const;
};

struct RunEntry {
    int fold = 0;
    std::uint64_t seed = 0;
    std::string checkpoint_path;
    std::string log_path;
};

struct RunInfo {
    std::string run_dir;
    std::string config_hash;
    ExperimentConfig config;
    std::vector<RunEntry> entries;
};

/// Pools for one fold: labeled simulator train segments, unlabeled real
/// train segments, and both domains' held-out test segments.
struct FoldData {
    std::vector<Segment> source_train, target_train;
    std::vector<Segment> source_test, target_test;
};

FoldData fold_data(const PairedDataset& data, int fold, int k_folds, std::uint64_t fold_seed,
                   int min_frames);

void cmd_generate(const GenerateOptions& opt);
RunInfo cmd_train(const ExperimentConfig& cfg);

struct EvalOptions {
    std::string run_dir;          // evaluate every checkpoint of a run...
    std::string checkpoint_path;  // ...or a single checkpoint
    std::string data_dir;
    std::string domain = "real";  // real | sim
    std::string out_path;         // report JSON; default under the run dir
};

MetricsReport cmd_evaluate(const EvalOptions& opt);

struct AblationRow {
    std::string method;
    MetricsReport report;
    double gain_acc = 0;  // vs the position baseline
};

std::vector<AblationRow> cmd_ablate(const ExperimentConfig& base);

struct SweepRow {
    double lambda = 0;
    double acc_mean = 0;
    double acc_std = 0;
};

std::vector<SweepRow> cmd_sweep_lambda(const ExperimentConfig& base,
                                       const std::vector<double>& values);

RunInfo load_run_info(const std::string& run_dir);

int cli_main(int argc, char** argv);

}  // namespace kvda
