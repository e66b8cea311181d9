#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kvda/model.hpp"

namespace kvda {

struct TrainConfig {
    double lr = 1e-3;
    int batch_per_domain = 256;
    int epochs = 30;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // epochs between checkpoints, 0 = none
    std::string checkpoint_dir;
    bool grl_warmup = false;  // DANN-style 2/(1+e^-10p)-1 ramp on beta, off by default
    int n_chunks = 8;
    int log_accuracy_cap = 512;  // source segments scored for the epoch log

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double loss_c = 0, loss_kd = 0, loss_kvd = 0;
    double source_acc = 0;
};

struct TrainResult {
    std::vector<EpochLog> log;
};

/// End-to-end training loop: balanced two-domain batches, total loss
/// (classification + active discriminator terms), Adam updates. Mutates
/// `model` in place; fully deterministic under cfg.seed. Aborts with a
/// diagnostic when the loss goes non-finite.
TrainResult train(Model& model, const std::vector<SegmentInput>& source,
                  const std::vector<SegmentInput>& target, const TrainConfig& cfg);

/// Per-epoch log as delimited text; loss columns follow the method
/// (L_K-D / L_KV-D present only when those terms train).
void write_train_log(const TrainResult& result, const Model& model, const std::string& path);

}  // namespace kvda
