#include "kvda/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

namespace kvda {

MetricsReport evaluate_predictions(const std::vector<int>& labels, const std::vector<int>& preds,
                                   int n_classes) {
    if (labels.empty()) throw std::invalid_argument("evaluate: empty prediction list");
    if (labels.size() != preds.size())
        throw std::invalid_argument("evaluate: label/prediction count mismatch");

    MetricsReport r;
    r.n_classes = n_classes;
    r.confusion = Eigen::MatrixXd::Zero(n_classes, n_classes);
    r.total = static_cast<int>(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes || preds[i] < 0 || preds[i] >= n_classes)
            throw std::invalid_argument("evaluate: class id out of range");
        r.confusion(labels[i], preds[i]) += 1.0;
    }
    r.accuracy = r.confusion.trace() / r.total;

    r.class_precision.assign(n_classes, 0.0);
    r.class_recall.assign(n_classes, 0.0);
    r.class_jaccard.assign(n_classes, 0.0);
    r.class_f1.assign(n_classes, 0.0);
    r.class_included.assign(n_classes, false);

    int included = 0;
    double sum_pr = 0, sum_re = 0, sum_ja = 0, sum_f1 = 0;
    for (int c = 0; c < n_classes; ++c) {
        const double tp = r.confusion(c, c);
        const double fn = r.confusion.row(c).sum() - tp;
        const double fp = r.confusion.col(c).sum() - tp;
        if (tp + fp + fn == 0.0) continue;  // absent from labels and predictions
        r.class_included[c] = true;
        ++included;
        double pr = 0, re = 0;
        if (tp + fp > 0) pr = tp / (tp + fp);
        else std::cerr << "kvda: class " << c << " never predicted, precision counted as 0\n";
        if (tp + fn > 0) re = tp / (tp + fn);
        else std::cerr << "kvda: class " << c << " absent from labels, recall counted as 0\n";
        const double ja = tp / (tp + fp + fn);
        const double f1 = (pr + re > 0) ? 2.0 * pr * re / (pr + re) : 0.0;
        r.class_precision[c] = pr;
        r.class_recall[c] = re;
        r.class_jaccard[c] = ja;
        r.class_f1[c] = f1;
        sum_pr += pr;
        sum_re += re;
        sum_ja += ja;
        sum_f1 += f1;
    }
    if (included > 0) {
        r.precision = sum_pr / included;
        r.recall = sum_re / included;
        r.jaccard = sum_ja / included;
        r.f1 = sum_f1 / included;
    }
    return r;
}

MetricsReport evaluate(const Model& model, const std::vector<Segment>& segments) {
    if (segments.empty()) throw std::invalid_argument("evaluate: empty segment list");
    std::vector<int> labels;
    labels.reserve(segments.size());
    for (const auto& s : segments) {
        if (s.gesture < 0) throw std::invalid_argument("evaluate: unlabeled segment");
        labels.push_back(s.gesture);
    }
    const auto inputs = prepare_inputs(segments, model.cfg);
    const auto preds = model.predict_batch(inputs);
    return evaluate_predictions(labels, preds, model.cfg.n_classes);
}

MetricsReport aggregate(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
    const int n = reports[0].n_classes;
    for (const auto& r : reports)
        if (r.n_classes != n) throw std::invalid_argument("aggregate: inconsistent class counts");

    MetricsReport out;
    out.n_classes = n;
    out.confusion = Eigen::MatrixXd::Zero(n, n);
    out.class_precision.assign(n, 0.0);
    out.class_recall.assign(n, 0.0);
    out.class_jaccard.assign(n, 0.0);
    out.class_f1.assign(n, 0.0);
    out.class_included.assign(n, false);

    const double k = static_cast<double>(reports.size());
    auto mean_std = [&](auto pick) {
        double mean = 0;
        for (const auto& r : reports) mean += pick(r);
        mean /= k;
        double var = 0;
        for (const auto& r : reports) var += (pick(r) - mean) * (pick(r) - mean);
        return std::make_pair(mean, std::sqrt(var / k));
    };

    std::tie(out.accuracy, out.accuracy_std) = mean_std([](const auto& r) { return r.accuracy; });
    std::tie(out.precision, out.precision_std) =
        mean_std([](const auto& r) { return r.precision; });
    std::tie(out.recall, out.recall_std) = mean_std([](const auto& r) { return r.recall; });
    std::tie(out.jaccard, out.jaccard_std) = mean_std([](const auto& r) { return r.jaccard; });
    std::tie(out.f1, out.f1_std) = mean_std([](const auto& r) { return r.f1; });

    for (const auto& r : reports) {
        out.confusion += r.confusion / k;
        out.total += r.total;
        for (const auto s : r.seeds) out.seeds.push_back(s);
    }
    for (int c = 0; c < n; ++c) {
        int cnt = 0;
        for (const auto& r : reports) {
            if (!r.class_included[c]) continue;
            ++cnt;
            out.class_precision[c] += r.class_precision[c];
            out.class_recall[c] += r.class_recall[c];
            out.class_jaccard[c] += r.class_jaccard[c];
            out.class_f1[c] += r.class_f1[c];
        }
        if (cnt > 0) {
            out.class_included[c] = true;
            out.class_precision[c] /= cnt;
            out.class_recall[c] /= cnt;
            out.class_jaccard[c] /= cnt;
            out.class_f1[c] /= cnt;
        }
    }
    return out;
}

std::string report_to_json(const MetricsReport& r) {
    nlohmann::json js;
    js["format"] = "kvda.metrics.v1";
    js["n_classes"] = r.n_classes;
    js["total"] = r.total;
    std::vector<std::vector<double>> conf(r.n_classes, std::vector<double>(r.n_classes));
    for (int i = 0; i < r.n_classes; ++i)
        for (int j = 0; j < r.n_classes; ++j) conf[i][j] = r.confusion(i, j);
    js["confusion"] = conf;
    js["accuracy"] = {{"mean", r.accuracy}, {"std", r.accuracy_std}};
    js["precision"] = {{"mean", r.precision}, {"std", r.precision_std}};
    js["recall"] = {{"mean", r.recall}, {"std", r.recall_std}};
    js["jaccard"] = {{"mean", r.jaccard}, {"std", r.jaccard_std}};
    js["f1"] = {{"mean", r.f1}, {"std", r.f1_std}};
    js["class_precision"] = r.class_precision;
    js["class_recall"] = r.class_recall;
    js["class_jaccard"] = r.class_jaccard;
    js["class_f1"] = r.class_f1;
    std::vector<int> inc;
    for (int c = 0; c < r.n_classes; ++c) inc.push_back(r.class_included[c] ? 1 : 0);
    js["class_included"] = inc;
    js["seeds"] = r.seeds;
    return js.dump(1);
}

MetricsReport report_from_json(const std::string& text) {
    const auto js = nlohmann::json::parse(text);
    if (js.value("format", "") != "kvda.metrics.v1")
        throw std::runtime_error("not a kvda metrics report");
    MetricsReport r;
    r.n_classes = js.at("n_classes").get<int>();
    r.total = js.at("total").get<int>();
    r.confusion = Eigen::MatrixXd::Zero(r.n_classes, r.n_classes);
    const auto conf = js.at("confusion");
    for (int i = 0; i < r.n_classes; ++i)
        for (int j = 0; j < r.n_classes; ++j) r.confusion(i, j) = conf.at(i).at(j).get<double>();
    auto load = [&](const char* key, double& mean, double& std_) {
        mean = js.at(key).at("mean").get<double>();
        std_ = js.at(key).at("std").get<double>();
    };
    load("accuracy", r.accuracy, r.accuracy_std);
    load("precision", r.precision, r.precision_std);
    load("recall", r.recall, r.recall_std);
    load("jaccard", r.jaccard, r.jaccard_std);
    load("f1", r.f1, r.f1_std);
    r.class_precision = js.at("class_precision").get<std::vector<double>>();
    r.class_recall = js.at("class_recall").get<std::vector<double>>();
    r.class_jaccard = js.at("class_jaccard").get<std::vector<double>>();
    r.class_f1 = js.at("class_f1").get<std::vector<double>>();
    for (int v : js.at("class_included").get<std::vector<int>>())
        r.class_included.push_back(v != 0);
    r.seeds = js.at("seeds").get<std::vector<std::uint64_t>>();
    return r;
}

void write_report(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << report_to_json(report) << "\n";
}

MetricsReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return report_from_json(text);
}

void write_confusion_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write confusion matrix: " + path);
    out << "true\\pred";
    for (int j = 0; j < report.n_classes; ++j) out << ",c" << j;
    out << "\n";
    for (int i = 0; i < report.n_classes; ++i) {
        out << 'c' << i;
        for (int j = 0; j < report.n_classes; ++j) out << ',' << report.confusion(i, j);
        out << "\n";
    }
}

std::string format_report_table(const MetricsReport& r) {
    char buf[256];
    std::string out = "metric     mean(%)   std(%)\n";
    auto row = [&](const char* name, double m, double s) {
        std::snprintf(buf, sizeof buf, "%-9s %8.2f %8.2f\n", name, 100.0 * m, 100.0 * s);
        out += buf;
    };
    row("ACC", r.accuracy, r.accuracy_std);
    row("PR", r.precision, r.precision_std);
    row("RE", r.recall, r.recall_std);
    row("JA", r.jaccard, r.jaccard_std);
    row("F1", r.f1, r.f1_std);
    return out;
}

}  // namespace kvda
