#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kvda/experiment.hpp"
#include "kvda/mdok.hpp"
#include "kvda/metrics.hpp"
#include "kvda/relation.hpp"
#include "kvda/synthgen.hpp"

namespace py = pybind11;
using namespace kvda;

namespace {

Segment segment_from_matrix(const Eigen::MatrixXd& kin) {
    if (kin.cols() != kKinDim)
        throw std::invalid_argument("kinematics must have 14 columns");
    Segment seg;
    seg.gesture = 0;
    for (Eigen::Index t = 0; t < kin.rows(); ++t) {
        seg.kin.push_back(KinematicFrame::from_flat(kin.row(t).transpose()));
        seg.vis.push_back(Eigen::VectorXd::Zero(1));
    }
    return seg;
}

py::dict report_to_dict(const MetricsReport& r) {
    py::dict d;
    d["accuracy"] = r.accuracy;
    d["accuracy_std"] = r.accuracy_std;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["jaccard"] = r.jaccard;
    d["f1"] = r.f1;
    d["total"] = r.total;
    d["confusion"] = r.confusion;
    d["class_precision"] = r.class_precision;
    d["class_recall"] = r.class_recall;
    d["class_jaccard"] = r.class_jaccard;
    d["class_f1"] = r.class_f1;
    return d;
}

}  // namespace

PYBIND11_MODULE(_kvda, m) {
    m.doc() = "Sim-to-real domain adaptation for multi-modal gesture sequences";

    m.def("relative_direction", &relative_direction, py::arg("p_t"), py::arg("p_t1"),
          "Relative direction vector p_t1 - p_t.");
    m.def("unit_normalize", &unit_normalize, py::arg("d"),
          "D/|D|, zero vector for the degenerate stationary case.");
    m.def("normalize_gripper", &normalize_gripper, py::arg("raw"),
          "Gripper raw 30-100 scale mapped onto [0, 1], clamped.");
    m.def(
        "mdok_transform",
        [](const Eigen::MatrixXd& kin) { return mdok_matrix(segment_from_matrix(kin)); },
        py::arg("kinematics"),
        "Motion-direction transform of a (T, 14) kinematic matrix; returns (T-1, 14).");

    m.def(
        "sample_scale_indices",
        [](int T, int scale, int k, const std::string& mode, std::uint64_t seed) {
            Rng rng(seed);
            return sample_scale_indices(T, scale, k,
                                        mode == "train" ? Mode::train : Mode::eval, rng);
        },
        py::arg("T"), py::arg("scale"), py::arg("k") = 3, py::arg("mode") = "eval",
        py::arg("seed") = 0, "Strictly increasing index subsets for one relation scale.");

    m.def("preset_names", &preset_names, "Known shift preset names.");
    m.def(
        "generate_dataset",
        [](const std::string& preset_name, int trials, std::uint64_t seed, int vis_dim,
           const std::string& out_dir) {
            GenerateOptions opt;
            opt.preset_name = preset_name;
            opt.n_trials = trials;
            opt.seed = seed;
            opt.vis_dim = vis_dim;
            opt.out_dir = out_dir;
            cmd_generate(opt);
        },
        py::arg("preset"), py::arg("trials"), py::arg("seed"), py::arg("vis_dim"),
        py::arg("out_dir"), "Write a paired simulator/real dataset to out_dir.");

    m.def(
        "dataset_summary",
        [](const std::string& dir) {
            const PairedDataset d = load_dataset_dir(dir);
            py::dict out;
            out["sim_segments"] = d.sim.segments.size();
            out["real_segments"] = d.real.segments.size();
            out["vis_dim"] = d.sim.vis_dim;
            return out;
        },
        py::arg("dir"), "Segment counts and feature dimension of a dataset directory.");

    m.def(
        "train",
        [](const std::string& data_dir, const std::string& out_dir, const std::string& method,
           int epochs, int batch, int hidden, double lam, double lr,
           const std::vector<std::uint64_t>& seeds, const std::vector<int>& folds) {
            ExperimentConfig cfg;
            cfg.data_dir = data_dir;
            cfg.out_dir = out_dir;
            cfg.method = method;
            cfg.epochs = epochs;
            cfg.batch_per_domain = batch;
            cfg.hidden_dim = hidden;
            cfg.lambda = lam;
            cfg.lr = lr;
            cfg.seeds = seeds;
            cfg.folds = folds;
            const RunInfo info = cmd_train(cfg);
            py::dict out;
            out["run_dir"] = info.run_dir;
            out["config_hash"] = info.config_hash;
            std::vector<std::string> ckpts;
            for (const auto& e : info.entries) ckpts.push_back(e.checkpoint_path);
            out["checkpoints"] = ckpts;
            return out;
        },
        py::arg("data_dir"), py::arg("out_dir"), py::arg("method") = "mdok+kvatt",
        py::arg("epochs") = 30, py::arg("batch") = 32, py::arg("hidden") = 64,
        py::arg("lambda_") = 0.8, py::arg("lr") = 1e-3,
        py::arg("seeds") = std::vector<std::uint64_t>{1, 2, 3},
        py::arg("folds") = std::vector<int>{0},
        "Train one method over folds and seeds; returns run metadata.");

    m.def(
        "evaluate",
        [](const std::string& run_dir, const std::string& data_dir, const std::string& domain) {
            EvalOptions opt;
            opt.run_dir = run_dir;
            opt.data_dir = data_dir;
            opt.domain = domain;
            return report_to_dict(cmd_evaluate(opt));
        },
        py::arg("run_dir"), py::arg("data_dir"), py::arg("domain") = "real",
        "Evaluate a run on one domain's held-out segments.");

    m.def(
        "evaluate_predictions",
        [](const std::vector<int>& labels, const std::vector<int>& preds, int n_classes) {
            return report_to_dict(evaluate_predictions(labels, preds, n_classes));
        },
        py::arg("labels"), py::arg("preds"), py::arg("n_classes") = kNumGestures,
        "Confusion matrix and macro ACC/PR/RE/JA/F1 from parallel label lists.");

    m.attr("NUM_GESTURES") = kNumGestures;
    m.attr("KIN_DIM") = kKinDim;
#ifdef VERSION_INFO
#define KVDA_STR2(x) #x
#define KVDA_STR(x) KVDA_STR2(x)
    m.attr("__version__") = KVDA_STR(VERSION_INFO);
#else
    m.attr("__version__") = "0.1.0";
#endif
}
