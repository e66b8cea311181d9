#include "kvda/fusion.hpp"

#include <stdexcept>

namespace kvda {

FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "elementwise") return FusionMode::elementwise;
    if (s == "scalar-attention") return FusionMode::scalar_attention;
    throw std::invalid_argument("unknown fusion mode '" + s +
                                "' (known: elementwise, scalar-attention)");
}

std::string to_string(FusionMode m) {
    return m == FusionMode::elementwise ? "elementwise" : "scalar-attention";
}

void FusionConfig::validate() const {
    if (input_dim < 1) throw std::invalid_argument("fusion: input_dim must be >= 1");
    if (common_dim < 1) throw std::invalid_argument("fusion: common_dim must be >= 1");
    if (min_scale < 2 || max_scale < min_scale)
        throw std::invalid_argument("fusion: invalid scale range");
}

Eigen::VectorXd kv_relation_scale(const Eigen::VectorXd& rv, const Eigen::VectorXd& rk,
                                  FusionMode mode) {
    if (rv.size() != rk.size())
        throw std::invalid_argument("kv_relation_scale: dimension mismatch (" +
                                    std::to_string(rv.size()) + " vs " +
                                    std::to_string(rk.size()) + ")");
    if (mode == FusionMode::elementwise) return rv.cwiseProduct(rk);
    const double alpha = rv.dot(rk) / static_cast<double>(rv.size());
    Eigen::VectorXd out(2 * rv.size());
    out << alpha * rv, alpha * rk;
    return out;
}

void kv_relation_scale_backward(const Eigen::VectorXd& rv, const Eigen::VectorXd& rk,
                                FusionMode mode, const Eigen::VectorXd& d_out,
                                Eigen::VectorXd& d_rv, Eigen::VectorXd& d_rk) {
    const auto n = rv.size();
    if (d_rv.size() != n) d_rv = Eigen::VectorXd::Zero(n);
    if (d_rk.size() != n) d_rk = Eigen::VectorXd::Zero(n);
    if (mode == FusionMode::elementwise) {
        d_rv += d_out.cwiseProduct(rk);
        d_rk += d_out.cwiseProduct(rv);
        return;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const double alpha = rv.dot(rk) * inv_n;
    const double d_alpha = d_out.head(n).dot(rv) + d_out.tail(n).dot(rk);
    d_rv += alpha * d_out.head(n) + (d_alpha * inv_n) * rk;
    d_rk += alpha * d_out.tail(n) + (d_alpha * inv_n) * rv;
}

void add_fusion_params(ParamStore& params, const FusionConfig& cfg, Rng& rng) {
    cfg.validate();
    const int in = cfg.scale_input_dim();
    for (int s = cfg.min_scale; s <= cfg.max_scale; ++s) {
        auto& w = params.add("fusion.q" + std::to_string(s) + ".W", cfg.common_dim, in);
        ParamStore::init_uniform(w, in, rng);
        auto& b = params.add("fusion.q" + std::to_string(s) + ".b", cfg.common_dim, 1);
        ParamStore::init_uniform(b, in, rng);
    }
}

Eigen::VectorXd multi_scale_fuse(const std::map<int, Eigen::VectorXd>& per_scale,
                                 const ParamStore& params, const FusionConfig& cfg) {
    if (per_scale.empty()) throw std::invalid_argument("multi_scale_fuse: no scales present");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(cfg.common_dim);
    for (const auto& [scale, x] : per_scale) {
        const std::string key = "fusion.q" + std::to_string(scale);
        if (!params.has(key + ".W"))
            throw std::invalid_argument("multi_scale_fuse: no projection for scale " +
                                        std::to_string(scale));
        out.noalias() += params.at(key + ".W") * x;
        out += params.at(key + ".b").col(0);
    }
    return out;
}

std::map<int, Eigen::VectorXd> multi_scale_fuse_backward(
    const std::map<int, Eigen::VectorXd>& per_scale, const ParamStore& params,
    const FusionConfig& cfg, const Eigen::VectorXd& d_out, ParamStore& grads) {
    (void)cfg;
    std::map<int, Eigen::VectorXd> d_inputs;
    for (const auto& [scale, x] : per_scale) {
        const std::string key = "fusion.q" + std::to_string(scale);
        grads.at(key + ".W").noalias() += d_out * x.transpose();
        grads.at(key + ".b").col(0) += d_out;
        d_inputs[scale] = params.at(key + ".W").transpose() * d_out;
    }
    return d_inputs;
}

}  // namespace kvda
