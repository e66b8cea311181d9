#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "kvda/mdok.hpp"
#include "kvda/synthgen.hpp"

using namespace kvda;
namespace fs = std::filesystem;

namespace {

bool segments_equal(const Segment& a, const Segment& b) {
    if (a.length() != b.length() || a.gesture != b.gesture) return false;
    for (int t = 0; t < a.length(); ++t) {
        if (a.kin[t].flat() != b.kin[t].flat()) return false;
        if (a.vis[t] != b.vis[t]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("presets") {
    CHECK(preset("none").is_identity());
    const ShiftConfig t = preset("translation");
    CHECK(t.translation == Eigen::Vector3d(0.2, -0.1, 0.05));
    CHECK(t.scale_factor == 1.0);
    CHECK(t.tilt_angle == 0.0);
    CHECK(!t.vis.active);
    const ShiftConfig c = preset("combined");
    CHECK(c.scale_factor == doctest::Approx(1.3));
    CHECK(c.tilt_angle == doctest::Approx(0.15));
    CHECK(c.vis.active);
    CHECK_THROWS_WITH_AS(preset("bogus"), doctest::Contains("translation"),
                         std::invalid_argument);
}

TEST_CASE("null shift: simulator and real trials from one seed are identical") {
    Rng rng(10);
    const GestureScript script = standard_script(rng);
    const ShiftConfig none = preset("none");
    const auto sim = generate_trial(script, kDomainSimulator, none, 123);
    const auto real = generate_trial(script, kDomainReal, none, 123);
    REQUIRE(sim.size() == real.size());
    for (size_t i = 0; i < sim.size(); ++i) CHECK(segments_equal(sim[i], real[i]));
}

TEST_CASE("translation-only shift adds the offset exactly") {
    Rng rng(11);
    const GestureScript script = standard_script(rng);
    const ShiftConfig shift = preset("translation");
    const auto sim = generate_trial(script, kDomainSimulator, shift, 5);
    const auto real = generate_trial(script, kDomainReal, shift, 5);
    REQUIRE(sim.size() == real.size());
    for (size_t i = 0; i < sim.size(); ++i) {
        for (int t = 0; t < sim[i].length(); ++t) {
            for (auto pick : {&KinematicFrame::left, &KinematicFrame::right}) {
                const Eigen::Vector3d s = (sim[i].kin[t].*pick).position;
                const Eigen::Vector3d r = (real[i].kin[t].*pick).position;
                for (int ax = 0; ax < 3; ++ax) CHECK(r[ax] == shift.translation[ax] + s[ax]);
            }
        }
    }
}

TEST_CASE("approach and lift move in opposite directions") {
    Rng rng(12);
    const GestureScript script = standard_script(rng);
    const auto segs = generate_trial(script, kDomainSimulator, preset("none"), 21);

    auto mean_active_dir = [&](int gesture, int arm) {
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        for (const auto& seg : segs) {
            if (seg.gesture != gesture) continue;
            for (const auto& frame : transform_segment(seg))
                acc += arm == 0 ? frame.dir_left : frame.dir_right;
        }
        return unit_normalize(acc);
    };
    // Cycle 0 uses the left arm for approach and lift.
    const Eigen::Vector3d approach = mean_active_dir(kApproach, 0);
    const Eigen::Vector3d lift = mean_active_dir(kLift, 0);
    CHECK(approach.dot(lift) < 0.0);
}

TEST_CASE("generated datasets cover every gesture class") {
    const auto data = generate_dataset(preset("none"), 5, 99);
    CHECK(data.sim.segments.size() >= 70);
    std::set<int> classes;
    for (const auto& s : data.sim.segments) classes.insert(s.gesture);
    CHECK(classes.size() == kNumGestures);
}

TEST_CASE("mdok features match across domains for translation and scale presets") {
    for (const char* name : {"translation", "scale"}) {
        const auto data = generate_dataset(preset(name), 2, 7);
        REQUIRE(data.sim.segments.size() == data.real.segments.size());
        for (size_t i = 0; i < data.sim.segments.size(); ++i) {
            const Eigen::MatrixXd a = mdok_matrix(data.sim.segments[i]);
            const Eigen::MatrixXd b = mdok_matrix(data.real.segments[i]);
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
}

TEST_CASE("tilt changes mdok features") {
    const auto data = generate_dataset(preset("tilt"), 1, 7);
    double max_diff = 0;
    for (size_t i = 0; i < data.sim.segments.size(); ++i) {
        const Eigen::MatrixXd a = mdok_matrix(data.sim.segments[i]);
        const Eigen::MatrixXd b = mdok_matrix(data.real.segments[i]);
        max_diff = std::max(max_diff, (a - b).cwiseAbs().maxCoeff());
    }
    CHECK(max_diff > 1e-3);
}

TEST_CASE("generation replays under seed and differs across seeds") {
    Rng rng_a(13), rng_b(13), rng_c(14);
    const GestureScript sa = standard_script(rng_a);
    const GestureScript sb = standard_script(rng_b);
    const auto a = generate_trial(sa, kDomainReal, preset("combined"), 42);
    const auto b = generate_trial(sb, kDomainReal, preset("combined"), 42);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(segments_equal(a[i], b[i]));

    const GestureScript sc = standard_script(rng_c);
    const auto c = generate_trial(sc, kDomainReal, preset("combined"), 43);
    bool all_equal = a.size() == c.size();
    for (size_t i = 0; all_equal && i < a.size(); ++i) all_equal = segments_equal(a[i], c[i]);
    CHECK(!all_equal);
}

TEST_CASE("invalid script inputs are rejected") {
    MotionStep bad;
    bad.gesture = 9;
    CHECK_THROWS_AS(generate_trial({bad}, kDomainSimulator, preset("none"), 1),
                    std::invalid_argument);
    MotionStep short_step;
    short_step.duration = 1;
    CHECK_THROWS_AS(generate_trial({short_step}, kDomainSimulator, preset("none"), 1),
                    std::invalid_argument);
    ShiftConfig bad_shift;
    bad_shift.scale_factor = -1;
    MotionStep ok;
    CHECK_THROWS_AS(generate_trial({ok}, kDomainReal, bad_shift, 1), std::invalid_argument);
}

TEST_CASE("write + load round-trips the dataset") {
    const fs::path dir =
        fs::temp_directory_path() / ("kvda_test_roundtrip_" + std::to_string(::getpid()));
    fs::remove_all(dir);

    SynthParams params;
    params.vis_dim = 4;
    const auto data = generate_dataset(preset("combined"), 2, 17, params);
    write_dataset(dir.string(), data, "combined", preset("combined"), 2, 17, params);
    const PairedDataset loaded = load_dataset_dir(dir.string());

    CHECK(loaded.sim.vis_dim == 4);
    REQUIRE(loaded.sim.segments.size() == data.sim.segments.size());
    REQUIRE(loaded.real.segments.size() == data.real.segments.size());
    for (size_t i = 0; i < data.real.segments.size(); ++i) {
        const Segment& a = data.real.segments[i];
        const Segment& b = loaded.real.segments[i];
        CHECK(a.trial_id == b.trial_id);
        CHECK(a.gesture == b.gesture);
        CHECK(a.first_frame == b.first_frame);
        REQUIRE(a.length() == b.length());
        CHECK(b.domain == kDomainReal);
        for (int t = 0; t < a.length(); ++t) {
            CHECK(a.kin[t].flat() == b.kin[t].flat());  // %.17g round-trips doubles
            CHECK(a.vis[t] == b.vis[t]);
        }
    }
    fs::remove_all(dir);
}
