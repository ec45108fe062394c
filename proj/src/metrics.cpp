#include "m2ae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "m2ae/errors.hpp"

namespace m2ae {

const char* probe_task_name(ProbeTask task) {
    switch (task) {
        case ProbeTask::Binary: return "binary";
        case ProbeTask::Multiclass: return "multiclass";
        case ProbeTask::Regression: return "regression";
    }
    throw ConfigError("unknown probe task");
}

ProbeTask parse_probe_task(const std::string& name) {
    if (name == "binary") return ProbeTask::Binary;
    if (name == "multiclass") return ProbeTask::Multiclass;
    if (name == "regression") return ProbeTask::Regression;
    throw ConfigError("unknown probe task: " + name);
}

bool MetricReport::has(const std::string& name) const {
    for (const auto& e : entries)
        if (e.first == name) return true;
    return false;
}

double MetricReport::get(const std::string& name) const {
    for (const auto& e : entries)
        if (e.first == name) return e.second;
    throw ConfigError("metric report has no entry named " + name);
}

void MetricReport::set(const std::string& name, double value) {
    for (auto& e : entries) {
        if (e.first == name) {
            e.second = value;
            return;
        }
    }
    entries.emplace_back(name, value);
}

std::string MetricReport::to_text() const {
    std::string out;
    char buf[64];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof(buf), "%.10g", e.second);
        out += e.first;
        out += ": ";
        out += buf;
        out += '\n';
    }
    return out;
}

namespace {

void check_binary_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ShapeError("scores and labels differ in length");
    if (scores.empty()) throw DataError("empty score list");
    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("binary labels must be 0 or 1");
        pos += static_cast<std::size_t>(y);
    }
    if (pos == 0 || pos == labels.size())
        throw DataError("labels contain a single class");
}

// Average 1-based ranks; ties within a group all receive the group mean.
std::vector<double> average_ranks(const std::vector<double>& scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double binary_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_binary_inputs(scores, labels);
    const std::vector<double> ranks = average_ranks(scores);
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            pos_rank_sum += ranks[i];
            ++n_pos;
        }
    }
    const std::size_t n_neg = labels.size() - n_pos;
    const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double binary_auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_binary_inputs(scores, labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t total_pos = 0;
    for (int y : labels) total_pos += static_cast<std::size_t>(y);

    double area = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t i = 0;
    // Equal scores share one threshold, so the curve does not depend on the
    // input order and survives monotone rescaling of the scores.
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[order[t]] == 1)
                ++tp;
            else
                ++fp;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    return area;
}

MetricReport binary_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_binary_inputs(scores, labels);
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= 0.5;
        if (pred && labels[i] == 1) ++tp;
        if (pred && labels[i] == 0) ++fp;
        if (!pred && labels[i] == 0) ++tn;
        if (!pred && labels[i] == 1) ++fn;
    }
    const double precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double f1 = (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);

    MetricReport report;
    report.set("accuracy", static_cast<double>(tp + tn) / static_cast<double>(scores.size()));
    report.set("precision", precision);
    report.set("recall", recall);
    report.set("f1", f1);
    report.set("auroc", binary_auroc(scores, labels));
    report.set("auprc", binary_auprc(scores, labels));
    return report;
}

MetricReport multiclass_metrics(const Array& scores, const std::vector<int>& labels) {
    if (scores.rank() != 2) throw ShapeError("multiclass scores must be rank 2");
    const std::size_t n = scores.rows();
    const std::size_t n_classes = scores.cols();
    if (n != labels.size()) throw ShapeError("scores and labels differ in length");
    if (n == 0) throw DataError("empty score list");
    if (n_classes < 2) throw ShapeError("multiclass scores need at least 2 columns");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw DataError("label outside class range");
    }

    std::vector<std::size_t> predicted(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < n_classes; ++c) {
            if (scores.at(i, c) > scores.at(i, best)) best = c;
        }
        predicted[i] = best;
    }

    std::vector<std::size_t> class_true(n_classes, 0), class_tp(n_classes, 0), class_pred(n_classes, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        ++class_true[y];
        ++class_pred[predicted[i]];
        if (predicted[i] == y) {
            ++class_tp[y];
            ++correct;
        }
    }

    double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (class_true[c] == 0) continue;
        ++present;
        const double p = class_pred[c] == 0
                             ? 0.0
                             : static_cast<double>(class_tp[c]) / static_cast<double>(class_pred[c]);
        const double r = static_cast<double>(class_tp[c]) / static_cast<double>(class_true[c]);
        macro_p += p;
        macro_r += r;
        macro_f1 += (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
    if (present < 2) throw DataError("labels contain a single class");
    macro_p /= static_cast<double>(present);
    macro_r /= static_cast<double>(present);
    macro_f1 /= static_cast<double>(present);

    // One-vs-rest ranking metrics over the same present classes; each has
    // both positives and negatives because at least two classes appear.
    double macro_auroc = 0.0, macro_auprc = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (class_true[c] == 0) continue;
        std::vector<double> col(n);
        std::vector<int> rest(n);
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = scores.at(i, c);
            rest[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
        }
        macro_auroc += binary_auroc(col, rest);
        macro_auprc += binary_auprc(col, rest);
    }
    macro_auroc /= static_cast<double>(present);
    macro_auprc /= static_cast<double>(present);

    MetricReport report;
    report.set("accuracy", static_cast<double>(correct) / static_cast<double>(n));
    report.set("precision", macro_p);
    report.set("recall", macro_r);
    report.set("f1", macro_f1);
    report.set("auroc", macro_auroc);
    report.set("auprc", macro_auprc);
    return report;
}

MetricReport regression_metrics(const std::vector<double>& predictions,
                                const std::vector<double>& targets) {
    if (predictions.size() != targets.size())
        throw ShapeError("predictions and targets differ in length");
    const std::size_t n = predictions.size();
    if (n < 2) throw DataError("regression metrics need at least 2 samples");

    double abs_sum = 0.0, sq_sum = 0.0;
    double pred_mean = 0.0, target_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = predictions[i] - targets[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
        pred_mean += predictions[i];
        target_mean += targets[i];
    }
    pred_mean /= static_cast<double>(n);
    target_mean /= static_cast<double>(n);

    double ss_tot = 0.0, pred_var = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = targets[i] - target_mean;
        const double dp = predictions[i] - pred_mean;
        ss_tot += dt * dt;
        pred_var += dp * dp;
        cov += dp * dt;
    }

    if (ss_tot == 0.0) throw DataError("targets have zero variance");
    if (pred_var == 0.0) throw DataError("correlation undefined for constant predictions");
    const double r2 = 1.0 - sq_sum / ss_tot;
    const double pearson = cov / std::sqrt(pred_var * ss_tot);

    MetricReport report;
    report.set("mae", abs_sum / static_cast<double>(n));
    report.set("rmse", std::sqrt(sq_sum / static_cast<double>(n)));
    report.set("r2", r2);
    report.set("pearson", pearson);
    return report;
}

}  // namespace m2ae
