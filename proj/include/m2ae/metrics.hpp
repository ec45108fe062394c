#pragma once

#include <string>
#include <vector>

#include "m2ae/array.hpp"

namespace m2ae {

enum class ProbeTask { Binary, Multiclass, Regression };

const char* probe_task_name(ProbeTask task);
ProbeTask parse_probe_task(const std::string& name);

// Flat ordered list of named scalar results. Which names appear depends on
// the task that produced the report.
struct MetricReport {
    std::vector<std::pair<std::string, double>> entries;

    bool has(const std::string& name) const;
    double get(const std::string& name) const;  // ConfigError if absent
    void set(const std::string& name, double value);

    // One "name: value" line per entry, in insertion order.
    std::string to_text() const;
};

// Probability that a random positive outranks a random negative, with ties
// counted 1/2. Computed from average ranks, which matches exhaustive
// pairwise concordance. Labels must contain both classes.
double binary_auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Area under the precision-recall curve by step integration: thresholds
// sweep the distinct scores in descending order and each recall increment
// is weighted by the precision at that threshold.
double binary_auprc(const std::vector<double>& scores, const std::vector<int>& labels);

// accuracy, precision, recall, f1 (thresholding scores at 0.5), auroc,
// auprc. Labels are 0/1 and both classes must be present.
MetricReport binary_metrics(const std::vector<double>& scores, const std::vector<int>& labels);

// scores is n x C (one row of class scores per sample), labels in [0, C).
// Predictions take the argmax (first maximum on ties). accuracy plus
// macro-averaged precision/recall/f1 over the classes present in labels;
// a class with no predicted positives contributes 0 precision. auroc and
// auprc are one-vs-rest macro averages over classes that have both
// positives and negatives.
MetricReport multiclass_metrics(const Array& scores, const std::vector<int>& labels);

// mae, rmse, r2, pearson. Constant targets or constant predictions are
// rejected as DataError since r2 and the correlation degenerate there.
MetricReport regression_metrics(const std::vector<double>& predictions,
                                const std::vector<double>& targets);

}  // namespace m2ae
