#include "kvda/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "kvda/mdok.hpp"

namespace kvda {

Method method_from_string(const std::string& s) {
    if (s == "baseline-position") return Method::baseline_position;
    if (s == "baseline-direction") return Method::baseline_direction;
    if (s == "mdok") return Method::mdok;
    if (s == "mdok+kvatt") return Method::mdok_kvatt;
    throw std::invalid_argument(
        "unknown method '" + s +
        "' (known: baseline-position, baseline-direction, mdok, mdok+kvatt)");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::baseline_position: return "baseline-position";
        case Method::baseline_direction: return "baseline-direction";
        case Method::mdok: return "mdok";
        case Method::mdok_kvatt: return "mdok+kvatt";
    }
    throw std::logic_error("bad method enum");
}

EncoderConfig ModelConfig::kin_encoder() const {
    EncoderConfig e;
    e.feature_dim = kin_dim;
    e.hidden_dim = hidden_dim;
    e.lstm_hidden = lstm_hidden;
    e.max_scale = max_scale;
    e.subsets_per_scale = subsets_per_scale;
    return e;
}

EncoderConfig ModelConfig::vis_encoder() const {
    EncoderConfig e = kin_encoder();
    e.feature_dim = vis_dim;
    return e;
}

FusionConfig ModelConfig::fusion() const {
    FusionConfig f;
    f.mode = fusion_mode;
    f.input_dim = hidden_dim;
    f.common_dim = fusion_dim;
    f.min_scale = 2;
    f.max_scale = max_scale;
    return f;
}

void ModelConfig::validate() const {
    kin_encoder().validate();
    if (use_visual()) {
        if (vis_dim < 1)
            throw std::invalid_argument("model: vis_dim required for method " + to_string(method));
        vis_encoder().validate();
        fusion().validate();
    }
    if (head_hidden < 1) throw std::invalid_argument("model: head_hidden must be >= 1");
    if (n_classes < 2) throw std::invalid_argument("model: n_classes must be >= 2");
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("model: lambda must be in [0, 1]");
}

SegmentInput prepare_input(const Segment& segment, const ModelConfig& cfg) {
    SegmentInput in;
    in.kin = cfg.position_input() ? position_matrix(segment) : mdok_matrix(segment);
    if (cfg.use_visual()) in.vis = visual_matrix(segment);
    in.label = segment.gesture;
    in.domain = segment.domain;
    in.id = segment.id;
    return in;
}

std::vector<SegmentInput> prepare_inputs(const std::vector<Segment>& segments,
                                         const ModelConfig& cfg) {
    std::vector<SegmentInput> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(prepare_input(s, cfg));
    return out;
}

namespace {

void add_head_params(ParamStore& params, const std::string& prefix, int in_dim, int hidden,
                     int out_dim, Rng& rng) {
    auto& w1 = params.add(prefix + ".W1", hidden, in_dim);
    ParamStore::init_uniform(w1, in_dim, rng);
    auto& b1 = params.add(prefix + ".b1", hidden, 1);
    ParamStore::init_uniform(b1, in_dim, rng);
    auto& w2 = params.add(prefix + ".W2", out_dim, hidden);
    ParamStore::init_uniform(w2, hidden, rng);
    auto& b2 = params.add(prefix + ".b2", out_dim, 1);
    ParamStore::init_uniform(b2, hidden, rng);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

}  // namespace

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    Rng rng(mix64(seed, 0x1417ULL));
    add_encoder_params(m.params, "kin", cfg.kin_encoder(), rng);
    if (cfg.use_visual()) {
        add_encoder_params(m.params, "vis", cfg.vis_encoder(), rng);
        add_fusion_params(m.params, cfg.fusion(), rng);
    }
    add_head_params(m.params, "kc", cfg.hidden_dim, cfg.head_hidden, cfg.n_classes, rng);
    if (cfg.use_kd())
        add_head_params(m.params, "kd", cfg.hidden_dim, cfg.head_hidden, 2, rng);
    if (cfg.use_visual())
        add_head_params(m.params, "kvc", cfg.fusion_dim, cfg.head_hidden, cfg.n_classes, rng);
    if (cfg.use_kvd())
        add_head_params(m.params, "kvd", cfg.fusion_dim, cfg.head_hidden, 2, rng);
    return m;
}

Plan Model::make_plan(const std::vector<SegmentInput>& batch, Mode mode, Rng& rng) const {
    const EncoderConfig enc = cfg.kin_encoder();
    Plan plan;
    plan.reserve(batch.size());
    for (const auto& seg : batch) plan.push_back(make_segment_plan(seg.frames(), enc, mode, rng));
    return plan;
}

Plan Model::make_eval_plan(const std::vector<SegmentInput>& batch) const {
    Rng unused(0);
    return make_plan(batch, Mode::eval, unused);
}

namespace {

HeadCache head_forward(const ParamStore& params, const std::string& prefix,
                       const Eigen::VectorXd& x) {
    HeadCache c;
    c.active = true;
    c.input = x;
    c.hidden = (params.at(prefix + ".W1") * x + params.at(prefix + ".b1").col(0))
                   .array()
                   .tanh()
                   .matrix();
    c.logits = params.at(prefix + ".W2") * c.hidden + params.at(prefix + ".b2").col(0);
    c.probs = softmax(c.logits);
    return c;
}

void head_backward(const ParamStore& params, const std::string& prefix, const HeadCache& cache,
                   const Eigen::VectorXd& d_logits, ParamStore& grads,
                   Eigen::VectorXd& d_input) {
    grads.at(prefix + ".W2").noalias() += d_logits * cache.hidden.transpose();
    grads.at(prefix + ".b2").col(0) += d_logits;
    const Eigen::VectorXd dh = params.at(prefix + ".W2").transpose() * d_logits;
    const Eigen::VectorXd dz =
        (dh.array() * (1.0 - cache.hidden.array().square())).matrix();
    grads.at(prefix + ".W1").noalias() += dz * cache.input.transpose();
    grads.at(prefix + ".b1").col(0) += dz;
    if (d_input.size() != cache.input.size())
        d_input = Eigen::VectorXd::Zero(cache.input.size());
    d_input.noalias() += params.at(prefix + ".W1").transpose() * dz;
}

}  // namespace

SegmentForward Model::forward_segment(const SegmentInput& input, const SegmentPlan& plan) const {
    if (input.kin.cols() != cfg.kin_dim)
        throw std::invalid_argument("forward: kinematic dim mismatch");
    SegmentForward f;
    f.kin = encode_all_scales(params, "kin", cfg.kin_encoder(), input.kin, plan);
    f.f_k = f.kin.pooled;
    f.kc = head_forward(params, "kc", f.f_k);
    if (cfg.use_kd()) f.kd = head_forward(params, "kd", f.f_k);
    if (cfg.use_visual()) {
        if (input.vis.cols() != cfg.vis_dim)
            throw std::invalid_argument("forward: visual dim mismatch");
        f.vis = encode_all_scales(params, "vis", cfg.vis_encoder(), input.vis, plan);
        for (const auto& [scale, sc] : f.kin.scales)
            f.fused_per_scale[scale] =
                kv_relation_scale(f.vis.scales.at(scale).feature, sc.feature, cfg.fusion_mode);
        f.f_kvr = multi_scale_fuse(f.fused_per_scale, params, cfg.fusion());
        f.kvc = head_forward(params, "kvc", f.f_kvr);
        if (cfg.use_kvd()) f.kvd = head_forward(params, "kvd", f.f_kvr);
    }
    return f;
}

namespace {

void check_mixed_domains(const std::vector<SegmentInput>& batch, const char* what) {
    bool has_src = false, has_tgt = false;
    for (const auto& s : batch) {
        if (s.domain == kDomainSimulator) has_src = true;
        else has_tgt = true;
    }
    if (!has_src || !has_tgt)
        throw std::invalid_argument(std::string(what) +
                                    ": batch must contain both domains (adversarial signal "
                                    "undefined otherwise)");
}

void check_plan(const std::vector<SegmentInput>& batch, const Plan& plan, const char* what) {
    if (batch.size() != plan.size())
        throw std::invalid_argument(std::string(what) + ": plan/batch size mismatch");
}

}  // namespace

double Model::kd_loss(const std::vector<SegmentInput>& batch, const Plan& plan) const {
    if (!cfg.use_kd()) throw std::invalid_argument("kd_loss: method has no KD discriminator");
    if (batch.empty()) throw std::invalid_argument("kd_loss: empty batch");
    check_mixed_domains(batch, "kd_loss");
    check_plan(batch, plan, "kd_loss");
    double loss = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto f = forward_segment(batch[i], plan[i]);
        loss -= safe_log(f.kd.probs[batch[i].domain]);
    }
    return loss / static_cast<double>(batch.size());
}

double Model::kvd_loss(const std::vector<SegmentInput>& batch, const Plan& plan) const {
    if (!cfg.use_kvd()) throw std::invalid_argument("kvd_loss: method has no KVD discriminator");
    if (batch.empty()) throw std::invalid_argument("kvd_loss: empty batch");
    check_mixed_domains(batch, "kvd_loss");
    check_plan(batch, plan, "kvd_loss");
    double loss = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto f = forward_segment(batch[i], plan[i]);
        loss -= safe_log(f.kvd.probs[batch[i].domain]);
    }
    return loss / static_cast<double>(batch.size());
}

double Model::classification_loss(const std::vector<SegmentInput>& batch,
                                  const Plan& plan) const {
    if (batch.empty()) throw std::invalid_argument("classification_loss: empty batch");
    check_plan(batch, plan, "classification_loss");
    double loss = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto& seg = batch[i];
        if (seg.domain != kDomainSimulator)
            throw std::invalid_argument(
                "classification_loss: target-domain segment in source batch");
        if (seg.label < 0 || seg.label >= cfg.n_classes)
            throw std::invalid_argument("classification_loss: unlabeled segment");
        const Eigen::VectorXd pc = class_probs(seg, plan[i]);
        loss -= safe_log(pc[seg.label]);
    }
    return loss / static_cast<double>(batch.size());
}

LossValues Model::total_loss(const std::vector<SegmentInput>& source,
                             const std::vector<SegmentInput>& target, const Plan& source_plan,
                             const Plan& target_plan) const {
    ParamStore grads = params.zeros_like();
    return losses_with_grad(source, target, source_plan, target_plan, grads);
}

LossValues Model::losses_with_grad(const std::vector<SegmentInput>& source,
                                   const std::vector<SegmentInput>& target,
                                   const Plan& source_plan, const Plan& target_plan,
                                   ParamStore& grads, const LossMask& mask,
                                   int n_chunks) const {
    if (source.empty()) throw std::invalid_argument("total_loss: empty source batch");
    check_plan(source, source_plan, "total_loss(source)");
    check_plan(target, target_plan, "total_loss(target)");
    const bool want_kd = mask.kd && cfg.use_kd();
    const bool want_kvd = mask.kvd && cfg.use_kvd();
    if ((want_kd || want_kvd) && target.empty())
        throw std::invalid_argument("total_loss: empty target batch");
    for (const auto& s : source) {
        if (s.domain != kDomainSimulator)
            throw std::invalid_argument("total_loss: non-source segment in source batch");
        if (mask.classification && (s.label < 0 || s.label >= cfg.n_classes))
            throw std::invalid_argument("total_loss: unlabeled source segment");
    }
    for (const auto& t : target)
        if (t.domain != kDomainReal)
            throw std::invalid_argument("total_loss: non-target segment in target batch");

    const int n_src = static_cast<int>(source.size());
    const int n_all = n_src + static_cast<int>(target.size());
    const double w_cls = 1.0 / n_src;
    const double w_dom = 1.0 / n_all;
    const double grl_mult = mask.grl_enabled ? -cfg.grl_beta : 1.0;
    const double lambda = cfg.use_visual() ? cfg.lambda : 1.0;

    struct ChunkAcc {
        ParamStore grads;
        double loss_c = 0, loss_kd = 0, loss_kvd = 0;
        int correct = 0;
    };

    auto process = [&](size_t index, ChunkAcc& acc) {
        const bool is_source = index < static_cast<size_t>(n_src);
        const SegmentInput& seg = is_source ? source[index] : target[index - n_src];
        const SegmentPlan& plan = is_source ? source_plan[index] : target_plan[index - n_src];
        const SegmentForward f = forward_segment(seg, plan);

        Eigen::VectorXd d_f_k = Eigen::VectorXd::Zero(cfg.hidden_dim);
        Eigen::VectorXd d_f_kvr;
        if (cfg.use_visual()) d_f_kvr = Eigen::VectorXd::Zero(cfg.fusion_dim);

        if (mask.classification && is_source) {
            const int y = seg.label;
            Eigen::VectorXd pc = lambda * f.kc.probs;
            if (cfg.use_visual()) pc += (1.0 - lambda) * f.kvc.probs;
            acc.loss_c -= w_cls * safe_log(pc[y]);
            int argmax = 0;
            pc.maxCoeff(&argmax);
            if (argmax == y) ++acc.correct;

            const double inv_pc = 1.0 / std::max(pc[y], 1e-300);
            {
                const double s1 = -w_cls * lambda * inv_pc * f.kc.probs[y];
                Eigen::VectorXd d_logits = -s1 * f.kc.probs;
                d_logits[y] += s1;
                head_backward(params, "kc", f.kc, d_logits, acc.grads, d_f_k);
            }
            if (cfg.use_visual() && lambda < 1.0) {
                const double s2 = -w_cls * (1.0 - lambda) * inv_pc * f.kvc.probs[y];
                Eigen::VectorXd d_logits = -s2 * f.kvc.probs;
                d_logits[y] += s2;
                head_backward(params, "kvc", f.kvc, d_logits, acc.grads, d_f_kvr);
            }
        }
        if (want_kd) {
            acc.loss_kd -= w_dom * safe_log(f.kd.probs[seg.domain]);
            Eigen::VectorXd d_logits = w_dom * f.kd.probs;
            d_logits[seg.domain] -= w_dom;
            Eigen::VectorXd d_feat = Eigen::VectorXd::Zero(cfg.hidden_dim);
            head_backward(params, "kd", f.kd, d_logits, acc.grads, d_feat);
            d_f_k += grl_mult * d_feat;
        }
        if (want_kvd) {
            acc.loss_kvd -= w_dom * safe_log(f.kvd.probs[seg.domain]);
            Eigen::VectorXd d_logits = w_dom * f.kvd.probs;
            d_logits[seg.domain] -= w_dom;
            Eigen::VectorXd d_feat = Eigen::VectorXd::Zero(cfg.fusion_dim);
            head_backward(params, "kvd", f.kvd, d_logits, acc.grads, d_feat);
            d_f_kvr += grl_mult * d_feat;
        }

        EncoderGrad kin_up, vis_up;
        kin_up.pooled = d_f_k;
        if (cfg.use_visual() && !d_f_kvr.isZero(0.0)) {
            auto d_fused = multi_scale_fuse_backward(f.fused_per_scale, params, cfg.fusion(),
                                                     d_f_kvr, acc.grads);
            for (const auto& [scale, d_m] : d_fused) {
                Eigen::VectorXd d_rv, d_rk;
                kv_relation_scale_backward(f.vis.scales.at(scale).feature,
                                           f.kin.scales.at(scale).feature, cfg.fusion_mode, d_m,
                                           d_rv, d_rk);
                vis_up.scale_feature[scale] = std::move(d_rv);
                kin_up.scale_feature[scale] = std::move(d_rk);
            }
        }
        encoder_backward(params, "kin", cfg.kin_encoder(), f.kin, kin_up, acc.grads);
        if (cfg.use_visual() && (!vis_up.scale_feature.empty()))
            encoder_backward(params, "vis", cfg.vis_encoder(), f.vis, vis_up, acc.grads);
    };

    const size_t total = static_cast<size_t>(n_all);
    n_chunks = std::max(1, std::min<int>(n_chunks, static_cast<int>(total)));
    std::vector<ChunkAcc> chunks(n_chunks);
    for (auto& c : chunks) c.grads = params.zeros_like();

    auto run_chunk = [&](int ci) {
        for (size_t i = ci; i < total; i += static_cast<size_t>(n_chunks))
            process(i, chunks[ci]);
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (n_chunks > 1 && hw > 1 && total >= 8) {
        std::vector<std::thread> pool;
        pool.reserve(n_chunks);
        for (int ci = 0; ci < n_chunks; ++ci) pool.emplace_back(run_chunk, ci);
        for (auto& t : pool) t.join();
    } else {
        for (int ci = 0; ci < n_chunks; ++ci) run_chunk(ci);
    }

    LossValues lv;
    lv.source_total = mask.classification ? n_src : 0;
    for (const auto& c : chunks) {
        lv.classification += c.loss_c;
        lv.kd += c.loss_kd;
        lv.kvd += c.loss_kvd;
        lv.source_correct += c.correct;
        for (auto& [name, g] : grads) g += c.grads.at(name);
    }
    lv.total = lv.classification + lv.kd + lv.kvd;
    return lv;
}

Eigen::VectorXd Model::class_probs(const SegmentInput& input, const SegmentPlan& plan) const {
    const auto f = forward_segment(input, plan);
    if (!cfg.use_visual()) return f.kc.probs;
    return cfg.lambda * f.kc.probs + (1.0 - cfg.lambda) * f.kvc.probs;
}

Eigen::VectorXd Model::kc_probs(const SegmentInput& input, const SegmentPlan& plan) const {
    return forward_segment(input, plan).kc.probs;
}

Eigen::VectorXd Model::kvc_probs(const SegmentInput& input, const SegmentPlan& plan) const {
    if (!cfg.use_visual()) throw std::invalid_argument("kvc_probs: method has no visual branch");
    return forward_segment(input, plan).kvc.probs;
}

Eigen::VectorXd Model::kd_probs(const SegmentInput& input, const SegmentPlan& plan) const {
    if (!cfg.use_kd()) throw std::invalid_argument("kd_probs: method has no KD discriminator");
    return forward_segment(input, plan).kd.probs;
}

Eigen::VectorXd Model::kvd_probs(const SegmentInput& input, const SegmentPlan& plan) const {
    if (!cfg.use_kvd()) throw std::invalid_argument("kvd_probs: method has no KVD discriminator");
    return forward_segment(input, plan).kvd.probs;
}

int Model::predict(const SegmentInput& input, const SegmentPlan& plan) const {
    int argmax = 0;
    class_probs(input, plan).maxCoeff(&argmax);
    return argmax;
}

std::vector<int> Model::predict_batch(const std::vector<SegmentInput>& batch) const {
    const Plan plan = make_eval_plan(batch);
    std::vector<int> out(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) out[i] = predict(batch[i], plan[i]);
    return out;
}

std::string model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json js;
    js["method"] = to_string(cfg.method);
    js["kin_dim"] = cfg.kin_dim;
    js["vis_dim"] = cfg.vis_dim;
    js["hidden_dim"] = cfg.hidden_dim;
    js["lstm_hidden"] = cfg.lstm_hidden;
    js["max_scale"] = cfg.max_scale;
    js["subsets_per_scale"] = cfg.subsets_per_scale;
    js["fusion_dim"] = cfg.fusion_dim;
    js["fusion_mode"] = to_string(cfg.fusion_mode);
    js["head_hidden"] = cfg.head_hidden;
    js["n_classes"] = cfg.n_classes;
    js["lambda"] = cfg.lambda;
    js["grl_beta"] = cfg.grl_beta;
    return js.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    const auto js = nlohmann::json::parse(text);
    ModelConfig cfg;
    cfg.method = method_from_string(js.at("method").get<std::string>());
    cfg.kin_dim = js.at("kin_dim").get<int>();
    cfg.vis_dim = js.at("vis_dim").get<int>();
    cfg.hidden_dim = js.at("hidden_dim").get<int>();
    cfg.lstm_hidden = js.at("lstm_hidden").get<int>();
    cfg.max_scale = js.at("max_scale").get<int>();
    cfg.subsets_per_scale = js.at("subsets_per_scale").get<int>();
    cfg.fusion_dim = js.at("fusion_dim").get<int>();
    cfg.fusion_mode = fusion_mode_from_string(js.at("fusion_mode").get<std::string>());
    cfg.head_hidden = js.at("head_hidden").get<int>();
    cfg.n_classes = js.at("n_classes").get<int>();
    cfg.lambda = js.at("lambda").get<double>();
    cfg.grl_beta = js.at("grl_beta").get<double>();
    return cfg;
}

void save_checkpoint(const Model& model, const std::string& path,
                     const std::map<std::string, std::string>& extra) {
    nlohmann::json js;
    js["format"] = "kvda.checkpoint.v1";
    js["model_config"] = nlohmann::json::parse(model_config_to_json(model.cfg));
    for (const auto& [k, v] : extra) js[k] = v;
    nlohmann::json ps;
    for (const auto& [name, m] : model.params) {
        nlohmann::json t;
        t["shape"] = {m.rows(), m.cols()};
        std::vector<double> data(m.data(), m.data() + m.size());
        t["data"] = data;
        ps[name] = std::move(t);
    }
    js["params"] = std::move(ps);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << js.dump() << "\n";
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json js;
    in >> js;
    if (js.value("format", "") != "kvda.checkpoint.v1")
        throw std::runtime_error("not a kvda checkpoint: " + path);
    Model m;
    m.cfg = model_config_from_json(js.at("model_config").dump());
    for (const auto& [name, t] : js.at("params").items()) {
        const auto shape = t.at("shape");
        const Eigen::Index rows = shape.at(0).get<Eigen::Index>();
        const Eigen::Index cols = shape.at(1).get<Eigen::Index>();
        auto& mat = m.params.add(name, rows, cols);
        const auto data = t.at("data").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(data.size()) != rows * cols)
            throw std::runtime_error("checkpoint tensor size mismatch for " + name);
        std::copy(data.begin(), data.end(), mat.data());
    }
    return m;
}

}  // namespace kvda
