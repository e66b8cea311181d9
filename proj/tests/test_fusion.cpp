#include <doctest.h>

#include <cmath>
#include <map>

#include "kvda/fusion.hpp"
#include "kvda/rng.hpp"
#include "test_util.hpp"

using namespace kvda;

namespace {

Eigen::VectorXd random_vec(Rng& rng, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1, 1);
    return v;
}

}  // namespace

TEST_CASE("elementwise co-occurrence on one-hot inputs") {
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4), e2 = Eigen::VectorXd::Zero(4);
    e1[0] = 1;
    e2[1] = 1;
    CHECK(kv_relation_scale(e1, e2, FusionMode::elementwise).isZero(0.0));
    CHECK(kv_relation_scale(e1, e1, FusionMode::elementwise) == e1);
}

TEST_CASE("elementwise mode matches a componentwise product oracle") {
    Rng rng(1);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::VectorXd rv = random_vec(rng, 256);
        const Eigen::VectorXd rk = random_vec(rng, 256);
        const Eigen::VectorXd out = kv_relation_scale(rv, rk, FusionMode::elementwise);
        REQUIRE(out.size() == 256);
        for (int i = 0; i < 256; ++i) CHECK(out[i] == rv[i] * rk[i]);
    }
}

TEST_CASE("elementwise mode is bilinear and support-symmetric") {
    Rng rng(2);
    const Eigen::VectorXd rv = random_vec(rng, 32);
    const Eigen::VectorXd rk = random_vec(rng, 32);
    const double a = 2.7;
    const Eigen::VectorXd lhs = kv_relation_scale(a * rv, rk, FusionMode::elementwise);
    const Eigen::VectorXd rhs = a * kv_relation_scale(rv, rk, FusionMode::elementwise);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);

    Eigen::VectorXd rv0 = rv;
    rv0[5] = 0.0;
    const Eigen::VectorXd out = kv_relation_scale(rv0, rk, FusionMode::elementwise);
    CHECK(out[5] == 0.0);
}

TEST_CASE("scalar-attention mode scales the concatenation by the mean dot product") {
    Rng rng(3);
    const Eigen::VectorXd rv = random_vec(rng, 8);
    const Eigen::VectorXd rk = random_vec(rng, 8);
    const Eigen::VectorXd out = kv_relation_scale(rv, rk, FusionMode::scalar_attention);
    REQUIRE(out.size() == 16);
    const double alpha = rv.dot(rk) / 8.0;
    for (int i = 0; i < 8; ++i) {
        CHECK(out[i] == doctest::Approx(alpha * rv[i]).epsilon(1e-12));
        CHECK(out[8 + i] == doctest::Approx(alpha * rk[i]).epsilon(1e-12));
    }
}

TEST_CASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(
        kv_relation_scale(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4),
                          FusionMode::elementwise),
        std::invalid_argument);
}

TEST_CASE("multi_scale_fuse: identity, annihilation, affine-then-sum oracle") {
    FusionConfig cfg;
    cfg.input_dim = 3;
    cfg.common_dim = 3;
    cfg.min_scale = 2;
    cfg.max_scale = 4;
    ParamStore params;
    Rng rng(4);
    add_fusion_params(params, cfg, rng);

    SUBCASE("single scale with identity projection") {
        params.at("fusion.q2.W") = Eigen::MatrixXd::Identity(3, 3);
        params.at("fusion.q2.b").setZero();
        std::map<int, Eigen::VectorXd> per_scale{{2, Eigen::Vector3d(1, -2, 3)}};
        CHECK(multi_scale_fuse(per_scale, params, cfg) == Eigen::Vector3d(1, -2, 3));
    }
    SUBCASE("zero maps annihilate") {
        params.set_zero();
        std::map<int, Eigen::VectorXd> per_scale{{2, Eigen::Vector3d(1, 1, 1)},
                                                 {3, Eigen::Vector3d(2, 2, 2)}};
        CHECK(multi_scale_fuse(per_scale, params, cfg).isZero(0.0));
    }
    SUBCASE("three scales match an independent affine-then-sum oracle") {
        Rng vrng(5);
        std::map<int, Eigen::VectorXd> per_scale;
        for (int s : {2, 3, 4}) per_scale[s] = random_vec(vrng, 3);
        const Eigen::VectorXd out = multi_scale_fuse(per_scale, params, cfg);
        Eigen::VectorXd expect = Eigen::VectorXd::Zero(3);
        for (int s : {2, 3, 4}) {
            const auto& w = params.at("fusion.q" + std::to_string(s) + ".W");
            const auto& b = params.at("fusion.q" + std::to_string(s) + ".b");
            for (int i = 0; i < 3; ++i) {
                double acc = b(i, 0);
                for (int j = 0; j < 3; ++j) acc += w(i, j) * per_scale[s][j];
                expect[i] += acc;
            }
        }
        CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("missing projection for a present scale") {
        std::map<int, Eigen::VectorXd> per_scale{{7, Eigen::Vector3d(1, 1, 1)}};
        CHECK_THROWS_WITH_AS(multi_scale_fuse(per_scale, params, cfg),
                             doctest::Contains("scale 7"), std::invalid_argument);
    }
}

TEST_CASE("fusion gradients match finite differences in both modes") {
    for (FusionMode mode : {FusionMode::elementwise, FusionMode::scalar_attention}) {
        CAPTURE(to_string(mode));
        FusionConfig cfg;
        cfg.mode = mode;
        cfg.input_dim = 3;
        cfg.common_dim = 2;
        cfg.min_scale = 2;
        cfg.max_scale = 3;
        ParamStore params;
        Rng rng(6);
        add_fusion_params(params, cfg, rng);
        // Leaf inputs as parameters so the check covers the upstream path too.
        Rng vrng(7);
        for (int s : {2, 3}) {
            ParamStore::init_uniform(params.add("rv" + std::to_string(s), 3, 1), 3, vrng);
            ParamStore::init_uniform(params.add("rk" + std::to_string(s), 3, 1), 3, vrng);
        }

        auto forward = [&]() {
            std::map<int, Eigen::VectorXd> per_scale;
            for (int s : {2, 3})
                per_scale[s] = kv_relation_scale(params.at("rv" + std::to_string(s)).col(0),
                                                 params.at("rk" + std::to_string(s)).col(0), mode);
            return multi_scale_fuse(per_scale, params, cfg);
        };
        auto loss = [&]() { return 0.5 * forward().squaredNorm(); };

        std::map<int, Eigen::VectorXd> per_scale;
        for (int s : {2, 3})
            per_scale[s] = kv_relation_scale(params.at("rv" + std::to_string(s)).col(0),
                                             params.at("rk" + std::to_string(s)).col(0), mode);
        const Eigen::VectorXd out = multi_scale_fuse(per_scale, params, cfg);
        ParamStore grads = params.zeros_like();
        const auto d_inputs = multi_scale_fuse_backward(per_scale, params, cfg, out, grads);
        for (int s : {2, 3}) {
            Eigen::VectorXd d_rv, d_rk;
            kv_relation_scale_backward(params.at("rv" + std::to_string(s)).col(0),
                                       params.at("rk" + std::to_string(s)).col(0), mode,
                                       d_inputs.at(s), d_rv, d_rk);
            grads.at("rv" + std::to_string(s)).col(0) = d_rv;
            grads.at("rk" + std::to_string(s)).col(0) = d_rk;
        }

        const auto res = kvda_test::finite_diff_check(params, grads, loss);
        CHECK(res.failures == 0);
        CHECK(res.max_rel < 1e-4);
    }
}
