#include "kvda/relation.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace kvda {

void EncoderConfig::validate() const {
    if (feature_dim < 1) throw std::invalid_argument("encoder: feature_dim must be >= 1");
    if (hidden_dim < 1) throw std::invalid_argument("encoder: hidden_dim must be >= 1");
    if (max_scale < 2) throw std::invalid_argument("encoder: max_scale must be >= 2");
    if (subsets_per_scale < 1) throw std::invalid_argument("encoder: subsets_per_scale must be >= 1");
}

namespace {

// C(T, s) capped at `cap` to avoid overflow; only the comparison with k matters.
long long count_subsets_capped(int T, int s, long long cap) {
    long long c = 1;
    for (int i = 1; i <= s; ++i) {
        c = c * (T - s + i) / i;
        if (c >= cap) return cap;
    }
    return c;
}

void enumerate_subsets(int T, int s, std::vector<std::vector<int>>& out) {
    std::vector<int> cur(s);
    for (int i = 0; i < s; ++i) cur[i] = i;
    while (true) {
        out.push_back(cur);
        int i = s - 1;
        while (i >= 0 && cur[i] == T - s + i) --i;
        if (i < 0) break;
        ++cur[i];
        for (int j = i + 1; j < s; ++j) cur[j] = cur[j - 1] + 1;
    }
}

std::vector<int> random_subset(int T, int s, Rng& rng) {
    // Partial Fisher-Yates, then sort for a strictly increasing subset.
    std::vector<int> idx(T);
    for (int i = 0; i < T; ++i) idx[i] = i;
    for (int i = 0; i < s; ++i) std::swap(idx[i], idx[rng.uniform_int(i, T - 1)]);
    std::vector<int> out(idx.begin(), idx.begin() + s);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<std::vector<int>> sample_scale_indices(int T, int scale, int k, Mode mode, Rng& rng) {
    if (scale < 2) throw std::invalid_argument("sample_scale_indices: scale must be >= 2");
    if (scale > T)
        throw std::invalid_argument("sample_scale_indices: scale " + std::to_string(scale) +
                                    " exceeds segment length " + std::to_string(T));
    if (k < 1) throw std::invalid_argument("sample_scale_indices: k must be >= 1");

    std::vector<std::vector<int>> out;
    const long long available = count_subsets_capped(T, scale, k + 1);
    if (available <= k) {
        enumerate_subsets(T, scale, out);
        return out;
    }
    if (mode == Mode::train) {
        std::set<std::vector<int>> seen;
        while (static_cast<int>(out.size()) < k) {
            auto s = random_subset(T, scale, rng);
            if (seen.insert(s).second) out.push_back(std::move(s));
        }
        return out;
    }
    // eval: evenly spaced subsets with k phase offsets. floor((t + phi) T / s)
    // is strictly increasing in t since T/s >= 1.
    std::set<std::vector<int>> seen;
    for (int j = 0; j < k; ++j) {
        const double phi = static_cast<double>(j + 1) / (k + 1);
        std::vector<int> s(scale);
        for (int t = 0; t < scale; ++t)
            s[t] = static_cast<int>((t + phi) * T / scale);
        if (seen.insert(s).second) out.push_back(std::move(s));
    }
    return out;
}

SegmentPlan make_segment_plan(int T, const EncoderConfig& cfg, Mode mode, Rng& rng) {
    if (T < 2) throw std::invalid_argument("make_segment_plan: segment length >= 2 required");
    SegmentPlan plan;
    const int top = std::min(cfg.max_scale, T);
    for (int s = 2; s <= top; ++s)
        plan.scale_subsets[s] = sample_scale_indices(T, s, cfg.subsets_per_scale, mode, rng);
    return plan;
}

void add_encoder_params(ParamStore& params, const std::string& prefix,
                        const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    const int h = cfg.lstm();
    const int in = cfg.feature_dim;
    for (const char* dir : {"fw", "bw"}) {
        auto& w = params.add(prefix + ".lstm." + dir + ".W", 4 * h, in);
        ParamStore::init_uniform(w, in, rng);
        auto& u = params.add(prefix + ".lstm." + dir + ".U", 4 * h, h);
        ParamStore::init_uniform(u, h, rng);
        auto& b = params.add(prefix + ".lstm." + dir + ".b", 4 * h, 1);
        ParamStore::init_uniform(b, h, rng);
    }
    auto& pw = params.add(prefix + ".proj.W", cfg.hidden_dim, 2 * h);
    ParamStore::init_uniform(pw, 2 * h, rng);
    auto& pb = params.add(prefix + ".proj.b", cfg.hidden_dim, 1);
    ParamStore::init_uniform(pb, 2 * h, rng);
}

namespace {

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& z) {
    return 1.0 / (1.0 + (-z).exp());
}

Eigen::VectorXd lstm_forward(const Eigen::MatrixXd& w, const Eigen::MatrixXd& u,
                             const Eigen::MatrixXd& b, LstmCache& cache) {
    const int h = static_cast<int>(u.cols());
    const int steps = static_cast<int>(cache.x.rows());
    cache.i.resize(steps);
    cache.f.resize(steps);
    cache.g.resize(steps);
    cache.o.resize(steps);
    cache.c.resize(steps);
    cache.h.resize(steps);
    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
    for (int t = 0; t < steps; ++t) {
        const Eigen::VectorXd z = w * cache.x.row(t).transpose() + u * h_prev + b.col(0);
        cache.i[t] = sigmoid(z.head(h).array());
        cache.f[t] = sigmoid(z.segment(h, h).array());
        cache.g[t] = z.segment(2 * h, h).array().tanh();
        cache.o[t] = sigmoid(z.tail(h).array());
        cache.c[t] = cache.f[t].cwiseProduct(c_prev) + cache.i[t].cwiseProduct(cache.g[t]);
        cache.h[t] = cache.o[t].cwiseProduct(cache.c[t].array().tanh().matrix());
        h_prev = cache.h[t];
        c_prev = cache.c[t];
    }
    return h_prev;
}

void lstm_backward(const Eigen::MatrixXd& w, const Eigen::MatrixXd& u, const LstmCache& cache,
                   const Eigen::VectorXd& dh_last, Eigen::MatrixXd& gw, Eigen::MatrixXd& gu,
                   Eigen::MatrixXd& gb) {
    const int h = static_cast<int>(u.cols());
    const int steps = static_cast<int>(cache.x.rows());
    Eigen::VectorXd dh = dh_last;
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd dz(4 * h);
    for (int t = steps - 1; t >= 0; --t) {
        const Eigen::ArrayXd tc = cache.c[t].array().tanh();
        const Eigen::ArrayXd do_ = dh.array() * tc;
        dc.array() += dh.array() * cache.o[t].array() * (1.0 - tc.square());
        const Eigen::VectorXd c_prev = t > 0 ? cache.c[t - 1] : Eigen::VectorXd::Zero(h);
        const Eigen::ArrayXd di = dc.array() * cache.g[t].array();
        const Eigen::ArrayXd dg = dc.array() * cache.i[t].array();
        const Eigen::ArrayXd df = dc.array() * c_prev.array();
        dz.head(h) = (di * cache.i[t].array() * (1.0 - cache.i[t].array())).matrix();
        dz.segment(h, h) = (df * cache.f[t].array() * (1.0 - cache.f[t].array())).matrix();
        dz.segment(2 * h, h) = (dg * (1.0 - cache.g[t].array().square())).matrix();
        dz.tail(h) = (do_ * cache.o[t].array() * (1.0 - cache.o[t].array())).matrix();

        gw.noalias() += dz * cache.x.row(t);
        if (t > 0) gu.noalias() += dz * cache.h[t - 1].transpose();
        gb.col(0) += dz;

        dh.noalias() = u.transpose() * dz;
        dc = dc.cwiseProduct(cache.f[t]);
    }
    (void)w;
}

}  // namespace

SubsetCache encode_subset(const ParamStore& params, const std::string& prefix,
                          const EncoderConfig& cfg, const Eigen::MatrixXd& frames,
                          const std::vector<int>& idx) {
    if (static_cast<int>(frames.cols()) != cfg.feature_dim)
        throw std::invalid_argument("encode_subset: frame dimension " +
                                    std::to_string(frames.cols()) + " does not match encoder " +
                                    std::to_string(cfg.feature_dim));
    SubsetCache sc;
    sc.idx = idx;
    const int s = static_cast<int>(idx.size());
    sc.fw.x.resize(s, cfg.feature_dim);
    sc.bw.x.resize(s, cfg.feature_dim);
    for (int t = 0; t < s; ++t) {
        if (idx[t] < 0 || idx[t] >= frames.rows())
            throw std::invalid_argument("encode_subset: index out of range");
        sc.fw.x.row(t) = frames.row(idx[t]);
        sc.bw.x.row(t) = frames.row(idx[s - 1 - t]);
    }
    const Eigen::VectorXd hf = lstm_forward(params.at(prefix + ".lstm.fw.W"),
                                            params.at(prefix + ".lstm.fw.U"),
                                            params.at(prefix + ".lstm.fw.b"), sc.fw);
    const Eigen::VectorXd hb = lstm_forward(params.at(prefix + ".lstm.bw.W"),
                                            params.at(prefix + ".lstm.bw.U"),
                                            params.at(prefix + ".lstm.bw.b"), sc.bw);
    sc.u.resize(hf.size() + hb.size());
    sc.u << hf, hb;
    sc.r = params.at(prefix + ".proj.W") * sc.u + params.at(prefix + ".proj.b").col(0);
    return sc;
}

Eigen::VectorXd encode_relation(const Eigen::MatrixXd& frames,
                                const std::vector<std::vector<int>>& subsets,
                                const ParamStore& params, const std::string& prefix,
                                const EncoderConfig& cfg) {
    if (subsets.empty()) throw std::invalid_argument("encode_relation: no index subsets");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(cfg.hidden_dim);
    for (const auto& idx : subsets) acc += encode_subset(params, prefix, cfg, frames, idx).r;
    return acc / static_cast<double>(subsets.size());
}

EncoderOut encode_all_scales(const ParamStore& params, const std::string& prefix,
                             const EncoderConfig& cfg, const Eigen::MatrixXd& frames,
                             const SegmentPlan& plan) {
    const int T = static_cast<int>(frames.rows());
    if (T < 2) throw std::invalid_argument("encode_all_scales: segment length >= 2 required");
    EncoderOut out;
    out.pooled = Eigen::VectorXd::Zero(cfg.hidden_dim);
    for (const auto& [scale, subsets] : plan.scale_subsets) {
        if (scale > T) continue;
        ScaleCache sc;
        sc.scale = scale;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(cfg.hidden_dim);
        for (const auto& idx : subsets) {
            sc.subsets.push_back(encode_subset(params, prefix, cfg, frames, idx));
            acc += sc.subsets.back().r;
        }
        sc.feature = acc / static_cast<double>(subsets.size());
        out.pooled += sc.feature;
        out.scales.emplace(scale, std::move(sc));
    }
    if (out.scales.empty())
        throw std::invalid_argument("encode_all_scales: no active scales for T = " +
                                    std::to_string(T));
    out.pooled /= static_cast<double>(out.scales.size());
    return out;
}

void encoder_backward(const ParamStore& params, const std::string& prefix,
                      const EncoderConfig& cfg, const EncoderOut& out,
                      const EncoderGrad& upstream, ParamStore& grads) {
    const int h = cfg.lstm();
    const Eigen::MatrixXd& proj_w = params.at(prefix + ".proj.W");
    Eigen::MatrixXd& g_proj_w = grads.at(prefix + ".proj.W");
    Eigen::MatrixXd& g_proj_b = grads.at(prefix + ".proj.b");

    const double n_scales = static_cast<double>(out.scales.size());
    for (const auto& [scale, sc] : out.scales) {
        Eigen::VectorXd d_feature = Eigen::VectorXd::Zero(cfg.hidden_dim);
        if (upstream.pooled.size() > 0) d_feature += upstream.pooled / n_scales;
        auto it = upstream.scale_feature.find(scale);
        if (it != upstream.scale_feature.end()) d_feature += it->second;
        if (d_feature.isZero(0.0)) continue;

        const double inv_k = 1.0 / static_cast<double>(sc.subsets.size());
        for (const auto& sub : sc.subsets) {
            const Eigen::VectorXd dr = d_feature * inv_k;
            g_proj_w.noalias() += dr * sub.u.transpose();
            g_proj_b.col(0) += dr;
            const Eigen::VectorXd du = proj_w.transpose() * dr;
            lstm_backward(params.at(prefix + ".lstm.fw.W"), params.at(prefix + ".lstm.fw.U"),
                          sub.fw, du.head(h), grads.at(prefix + ".lstm.fw.W"),
                          grads.at(prefix + ".lstm.fw.U"), grads.at(prefix + ".lstm.fw.b"));
            lstm_backward(params.at(prefix + ".lstm.bw.W"), params.at(prefix + ".lstm.bw.U"),
                          sub.bw, du.tail(h), grads.at(prefix + ".lstm.bw.W"),
                          grads.at(prefix + ".lstm.bw.U"), grads.at(prefix + ".lstm.bw.b"));
        }
    }
}

}  // namespace kvda
