#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "kvda/model.hpp"
#include "kvda/segment.hpp"

namespace kvda {

/// Per-class confusion plus macro-averaged rates. Rows of the confusion
/// matrix are true labels, columns predictions. Aggregated reports carry
/// mean and population std over seeds.
struct MetricsReport {
    int n_classes = kNumGestures;
    Eigen::MatrixXd confusion;  // fractional after aggregation
    int total = 0;

    double accuracy = 0, precision = 0, recall = 0, jaccard = 0, f1 = 0;
    double accuracy_std = 0, precision_std = 0, recall_std = 0, jaccard_std = 0, f1_std = 0;

    std::vector<double> class_precision, class_recall, class_jaccard, class_f1;
    std::vector<bool> class_included;  // absent from labels and predictions -> excluded
    std::vector<std::uint64_t> seeds;
};

/// Confusion matrix and macro metrics from parallel label/prediction lists.
MetricsReport evaluate_predictions(const std::vector<int>& labels, const std::vector<int>& preds,
                                   int n_classes = kNumGestures);

/// Argmax of the lambda-mixed class probabilities per segment, then the
/// metrics above. Throws on an empty segment list.
MetricsReport evaluate(const Model& model, const std::vector<Segment>& segments);

/// Elementwise mean and population std across per-seed reports.
MetricsReport aggregate(const std::vector<MetricsReport>& reports);

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);
void write_report(const MetricsReport& report, const std::string& path);
MetricsReport read_report(const std::string& path);
void write_confusion_csv(const MetricsReport& report, const std::string& path);

/// Human-readable summary, rates in percent.
std::string format_report_table(const MetricsReport& report);

}  // namespace kvda
