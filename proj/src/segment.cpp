#include "kvda/segment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kvda/rng.hpp"

namespace kvda {

Eigen::Matrix<double, kKinDim, 1> KinematicFrame::flat() const {
    Eigen::Matrix<double, kKinDim, 1> v;
    v << left.position.x(), left.position.y(), left.position.z(),
        left.yaw, left.pitch, left.roll, left.gripper,
        right.position.x(), right.position.y(), right.position.z(),
        right.yaw, right.pitch, right.roll, right.gripper;
    return v;
}

KinematicFrame KinematicFrame::from_flat(const Eigen::Matrix<double, kKinDim, 1>& v) {
    KinematicFrame f;
    f.left.position = v.segment<3>(0);
    f.left.yaw = v[3];
    f.left.pitch = v[4];
    f.left.roll = v[5];
    f.left.gripper = v[6];
    f.right.position = v.segment<3>(7);
    f.right.yaw = v[10];
    f.right.pitch = v[11];
    f.right.roll = v[12];
    f.right.gripper = v[13];
    return f;
}

bool DatasetSplit::is_test_trial(int fold, int trial_id) const {
    const auto& t = test_trials.at(fold);
    return std::find(t.begin(), t.end(), trial_id) != t.end();
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(field);
    return out;
}

struct Table {
    std::vector<std::string> header;
    // (trial, frame) -> values
    std::map<std::pair<int, int>, std::vector<double>> rows;
};

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open table: " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty table: " + path);
    t.header = split_line(line, ',');
    if (t.header.size() < 3 || t.header[0] != "trial_id" || t.header[1] != "frame")
        throw std::runtime_error("table " + path + " must start with trial_id,frame columns");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_line(line, ',');
        if (fields.size() != t.header.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected " + std::to_string(t.header.size()) +
                                     " fields, got " + std::to_string(fields.size()));
        const int trial = std::stoi(fields[0]);
        const int frame = std::stoi(fields[1]);
        std::vector<double> vals(fields.size() - 2);
        for (size_t i = 2; i < fields.size(); ++i) vals[i - 2] = std::stod(fields[i]);
        if (!t.rows.emplace(std::make_pair(trial, frame), std::move(vals)).second)
            throw std::runtime_error(path + ": duplicate row for trial " +
                                     std::to_string(trial) + " frame " + std::to_string(frame));
    }
    return t;
}

}  // namespace

Dataset load_trials(const std::string& kinematics_csv,
                    const std::string& features_csv,
                    const std::string& labels_csv,
                    int domain) {
    const Table kin = read_table(kinematics_csv);
    const Table feat = read_table(features_csv);
    const Table lab = read_table(labels_csv);

    if (!kin.rows.empty() && kin.rows.begin()->second.size() != kKinDim)
        throw std::runtime_error("kinematics table must carry 14 values per frame");

    for (const auto& [key, vals] : kin.rows) {
        if (!feat.rows.count(key))
            throw std::runtime_error("features table missing trial " + std::to_string(key.first) +
                                     " frame " + std::to_string(key.second));
        if (!lab.rows.count(key))
            throw std::runtime_error("labels table missing trial " + std::to_string(key.first) +
                                     " frame " + std::to_string(key.second));
        for (double v : vals)
            if (!std::isfinite(v))
                throw std::runtime_error("non-finite kinematic value at trial " +
                                         std::to_string(key.first) + " frame " +
                                         std::to_string(key.second));
    }
    for (const auto& [key, vals] : feat.rows) {
        (void)vals;
        if (!kin.rows.count(key))
            throw std::runtime_error("kinematics table missing trial " + std::to_string(key.first) +
                                     " frame " + std::to_string(key.second));
    }
    for (const auto& [key, vals] : lab.rows) {
        (void)vals;
        if (!kin.rows.count(key))
            throw std::runtime_error("kinematics table missing trial " + std::to_string(key.first) +
                                     " frame " + std::to_string(key.second));
    }

    const int vis_dim = feat.rows.empty() ? 0 : static_cast<int>(feat.rows.begin()->second.size());

    Dataset ds;
    ds.vis_dim = vis_dim;

    // Rows are keyed (trial, frame) so iteration is already trial-grouped
    // and frame-ordered.
    int next_id = 0;
    Segment cur;
    bool open = false;
    int prev_trial = -1, prev_frame = -1;

    auto flush = [&](int trial) {
        if (!open) return;
        if (cur.length() >= 2) {
            cur.id = next_id++;
            ds.segments.push_back(std::move(cur));
        } else {
            std::cerr << "kvda: dropping single-frame run (trial " << trial
                      << ", frame " << cur.first_frame << ", gesture " << cur.gesture
                      << "): T >= 2 required\n";
        }
        cur = Segment{};
        open = false;
    };

    for (const auto& [key, kvals] : kin.rows) {
        const auto [trial, frame] = key;
        const auto& fvals = feat.rows.at(key);
        const double lraw = lab.rows.at(key).at(0);
        const int label = static_cast<int>(std::lround(lraw));
        if (label < 0 || label >= kNumGestures)
            throw std::runtime_error("unknown gesture id " + std::to_string(label) +
                                     " at trial " + std::to_string(trial) +
                                     " frame " + std::to_string(frame));
        if (static_cast<int>(fvals.size()) != vis_dim)
            throw std::runtime_error("inconsistent feature dimension at trial " +
                                     std::to_string(trial) + " frame " + std::to_string(frame));

        const bool boundary = !open || trial != prev_trial || frame != prev_frame + 1 ||
                              label != cur.gesture;
        if (boundary) {
            flush(prev_trial);
            cur.trial_id = trial;
            cur.first_frame = frame;
            cur.gesture = label;
            cur.domain = domain;
            open = true;
        }
        Eigen::Matrix<double, kKinDim, 1> kv;
        for (int i = 0; i < kKinDim; ++i) kv[i] = kvals[i];
        cur.kin.push_back(KinematicFrame::from_flat(kv));
        cur.vis.push_back(Eigen::Map<const Eigen::VectorXd>(fvals.data(), vis_dim));
        prev_trial = trial;
        prev_frame = frame;
    }
    flush(prev_trial);
    return ds;
}

PairedDataset load_dataset_dir(const std::string& dir) {
    PairedDataset d;
    d.sim = load_trials(dir + "/sim/kinematics.csv", dir + "/sim/features.csv",
                        dir + "/sim/labels.csv", kDomainSimulator);
    d.real = load_trials(dir + "/real/kinematics.csv", dir + "/real/features.csv",
                         dir + "/real/labels.csv", kDomainReal);
    return d;
}

std::vector<int> trial_ids(const std::vector<Segment>& segments) {
    std::set<int> ids;
    for (const auto& s : segments) ids.insert(s.trial_id);
    return {ids.begin(), ids.end()};
}

DatasetSplit make_folds(const std::vector<Segment>& segments, int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("fold count must be >= 1");
    std::vector<int> ids = trial_ids(segments);
    if (static_cast<int>(ids.size()) < k)
        throw std::invalid_argument("need at least " + std::to_string(k) + " trials for " +
                                    std::to_string(k) + "-fold split, got " +
                                    std::to_string(ids.size()));
    Rng rng(mix64(seed, 0xF01D5ULL));
    for (int i = static_cast<int>(ids.size()) - 1; i > 0; --i)
        std::swap(ids[i], ids[rng.uniform_int(0, i)]);

    DatasetSplit split;
    split.folds = k;
    split.test_trials.resize(k);
    for (size_t i = 0; i < ids.size(); ++i)
        split.test_trials[i % k].push_back(ids[i]);
    for (auto& t : split.test_trials) std::sort(t.begin(), t.end());
    return split;
}

namespace {

std::vector<int> draw_from_pool(const std::vector<int>& pool, int n, Rng& rng) {
    std::vector<int> out;
    out.reserve(n);
    if (static_cast<int>(pool.size()) >= n) {
        std::vector<int> idx(pool.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        for (int i = 0; i < n; ++i) {
            const int j = rng.uniform_int(i, static_cast<int>(idx.size()) - 1);
            std::swap(idx[i], idx[j]);
            out.push_back(pool[idx[i]]);
        }
    } else {
        for (int i = 0; i < n; ++i)
            out.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
    }
    return out;
}

}  // namespace

std::pair<std::vector<int>, std::vector<int>>
sample_batch(const std::vector<int>& source_pool, const std::vector<int>& target_pool,
             int n_per_domain, std::uint64_t seed, std::uint64_t step) {
    if (source_pool.empty() || target_pool.empty())
        throw std::invalid_argument("sample_batch: empty segment pool");
    if (n_per_domain < 1) throw std::invalid_argument("sample_batch: n_per_domain must be >= 1");
    Rng rng(mix64(mix64(seed, 0xBA7C4ULL), step));
    auto src = draw_from_pool(source_pool, n_per_domain, rng);
    auto tgt = draw_from_pool(target_pool, n_per_domain, rng);
    return {std::move(src), std::move(tgt)};
}

void write_segment_index(const std::vector<Segment>& segments, const std::string& path) {
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : segments) {
        js.push_back({{"id", s.id},
                      {"trial_id", s.trial_id},
                      {"first_frame", s.first_frame},
                      {"last_frame", s.last_frame()},
                      {"length", s.length()},
                      {"gesture", s.gesture},
                      {"domain", s.domain}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write segment index: " + path);
    out << js.dump(1) << "\n";
}

}  // namespace kvda
