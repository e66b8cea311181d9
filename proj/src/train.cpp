#include "kvda/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace kvda {

void TrainConfig::validate() const {
    if (lr <= 0) throw std::invalid_argument("train: learning rate must be > 0");
    if (batch_per_domain < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    if (n_chunks < 1) throw std::invalid_argument("train: n_chunks must be >= 1");
}

namespace {

double source_accuracy(const Model& model, const std::vector<SegmentInput>& source, int cap) {
    const int n = std::min<int>(cap, static_cast<int>(source.size()));
    if (n == 0) return 0.0;
    std::vector<SegmentInput> subset(source.begin(), source.begin() + n);
    const auto preds = model.predict_batch(subset);
    int correct = 0;
    for (int i = 0; i < n; ++i)
        if (preds[i] == subset[i].label) ++correct;
    return static_cast<double>(correct) / n;
}

}  // namespace

TrainResult train(Model& model, const std::vector<SegmentInput>& source,
                  const std::vector<SegmentInput>& target, const TrainConfig& cfg) {
    cfg.validate();
    if (source.empty()) throw std::invalid_argument("train: empty source pool");
    const bool need_target = model.cfg.use_kd() || model.cfg.use_kvd();
    if (need_target && target.empty())
        throw std::invalid_argument("train: empty target pool with adversarial terms active");
    for (const auto& s : source)
        if (s.domain != kDomainSimulator || s.label < 0)
            throw std::invalid_argument("train: source pool must be labeled simulator segments");
    for (const auto& t : target)
        if (t.domain != kDomainReal)
            throw std::invalid_argument("train: target pool must be real-domain segments");

    std::vector<int> src_pool(source.size());
    for (size_t i = 0; i < source.size(); ++i) src_pool[i] = static_cast<int>(i);
    std::vector<int> tgt_pool(target.size());
    for (size_t i = 0; i < target.size(); ++i) tgt_pool[i] = static_cast<int>(i);

    const size_t driver = std::max(source.size(), need_target ? target.size() : size_t{0});
    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>((driver + cfg.batch_per_domain - 1) /
                                          cfg.batch_per_domain));
    const double base_beta = model.cfg.grl_beta;
    const long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

    AdamOptimizer adam(cfg.lr);
    ParamStore grads = model.params.zeros_like();
    TrainResult result;
    long global_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochLog log;
        log.epoch = epoch;
        for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
            std::vector<SegmentInput> src_batch, tgt_batch;
            if (need_target) {
                auto [si, ti] = sample_batch(src_pool, tgt_pool, cfg.batch_per_domain, cfg.seed,
                                             static_cast<std::uint64_t>(global_step));
                for (int i : si) src_batch.push_back(source[i]);
                for (int i : ti) tgt_batch.push_back(target[i]);
            } else {
                auto [si, ti] = sample_batch(src_pool, src_pool, cfg.batch_per_domain, cfg.seed,
                                             static_cast<std::uint64_t>(global_step));
                (void)ti;
                for (int i : si) src_batch.push_back(source[i]);
            }

            if (cfg.grl_warmup && total_steps > 0) {
                const double p = static_cast<double>(global_step) / total_steps;
                model.cfg.grl_beta = base_beta * (2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0);
            }

            Rng plan_rng(mix64(mix64(cfg.seed, 0x91A7ULL),
                               static_cast<std::uint64_t>(global_step)));
            const Plan src_plan = model.make_plan(src_batch, Mode::train, plan_rng);
            const Plan tgt_plan = model.make_plan(tgt_batch, Mode::train, plan_rng);

            grads.set_zero();
            const LossValues lv = model.losses_with_grad(src_batch, tgt_batch, src_plan,
                                                         tgt_plan, grads, {}, cfg.n_chunks);
            if (!std::isfinite(lv.total))
                throw std::runtime_error(
                    "training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                    " step " + std::to_string(step) + " (L_C=" + std::to_string(lv.classification) +
                    ", L_K-D=" + std::to_string(lv.kd) + ", L_KV-D=" + std::to_string(lv.kvd) +
                    ")");
            adam.step(model.params, grads);

            log.loss_c += lv.classification;
            log.loss_kd += lv.kd;
            log.loss_kvd += lv.kvd;
        }
        log.loss_c /= steps_per_epoch;
        log.loss_kd /= steps_per_epoch;
        log.loss_kvd /= steps_per_epoch;
        log.source_acc = source_accuracy(model, source, cfg.log_accuracy_cap);
        result.log.push_back(log);

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
            (epoch + 1) % cfg.checkpoint_every == 0) {
            std::filesystem::create_directories(cfg.checkpoint_dir);
            save_checkpoint(model, cfg.checkpoint_dir + "/epoch_" + std::to_string(epoch + 1) +
                                       ".json",
                            {{"epoch", std::to_string(epoch + 1)}});
        }
    }
    model.cfg.grl_beta = base_beta;
    return result;
}

void write_train_log(const TrainResult& result, const Model& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write train log: " + path);
    out << "epoch,L_C";
    if (model.cfg.use_kd()) out << ",L_K-D";
    if (model.cfg.use_kvd()) out << ",L_KV-D";
    out << ",source_acc\n";
    for (const auto& e : result.log) {
        out << e.epoch << ',' << e.loss_c;
        if (model.cfg.use_kd()) out << ',' << e.loss_kd;
        if (model.cfg.use_kvd()) out << ',' << e.loss_kvd;
        out << ',' << e.source_acc << '\n';
    }
}

}  // namespace kvda
