#include "m2ae/losses.hpp"

#include <algorithm>
#include <cmath>

#include "m2ae/errors.hpp"

namespace m2ae {

namespace {

constexpr double kSelfMask = -1e30;

void check_patch_pair(const Array& target, const Array& recon, const MaskPlan& plan,
                      const char* what) {
    if (target.rank() != 2 || !target.same_shape(recon)) {
        throw ShapeError(std::string(what) + ": target and reconstruction shapes differ");
    }
    if (target.rows() != plan.k) {
        throw ShapeError(std::string(what) + ": patch count does not match the plan");
    }
}

double masked_row_mse(const Array& target, const Array& recon,
                      const std::vector<std::size_t>& rows) {
    double total = 0.0;
    for (std::size_t r : rows) {
        for (std::size_t c = 0; c < target.cols(); ++c) {
            double d = target.at(r, c) - recon.at(r, c);
            total += d * d;
        }
    }
    return total / static_cast<double>(rows.size());
}

}  // namespace

const Array& ViewEmbeddings::view(std::size_t v) const {
    switch (v) {
        case 0: return ecg;
        case 1: return ppg;
        case 2: return ecg_aug;
        case 3: return ppg_aug;
        default: throw ConfigError("view index must lie in [0, 3]");
    }
}

void ViewEmbeddings::validate() const {
    if (ecg.rank() != 2) throw ShapeError("view embeddings must be rank-2");
    if (!ecg.same_shape(ppg) || !ecg.same_shape(ecg_aug) || !ecg.same_shape(ppg_aug)) {
        throw ShapeError("all four views must share one B x D shape");
    }
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
}

double recon_loss_cross(const Array& target_ecg, const Array& recon_ecg,
                        const Array& target_ppg, const Array& recon_ppg, const MaskPlan& plan) {
    plan.validate();
    check_patch_pair(target_ecg, recon_ecg, plan, "recon_loss_cross ecg");
    check_patch_pair(target_ppg, recon_ppg, plan, "recon_loss_cross ppg");
    if (plan.masked.empty() || plan.visible.empty()) {
        throw ConfigError("cross-modal reconstruction needs both mask sets non-empty");
    }
    return masked_row_mse(target_ecg, recon_ecg, plan.masked) +
           masked_row_mse(target_ppg, recon_ppg, plan.visible);
}

double recon_loss_single(const Array& target, const Array& recon, const MaskPlan& plan) {
    plan.validate();
    check_patch_pair(target, recon, plan, "recon_loss_single");
    if (plan.masked.empty()) throw ConfigError("single-modal reconstruction needs masked rows");
    return masked_row_mse(target, recon, plan.masked);
}

double similarity(const std::vector<double>& a, const std::vector<double>& b, double tau) {
    if (a.size() != b.size()) throw ShapeError("similarity inputs must have equal length");
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot / tau;
}

double infonce_anchor(const ViewEmbeddings& views, std::size_t sample, std::size_t view) {
    views.validate();
    const std::size_t b = views.batch();
    if (b < 2) throw ConfigError("contrastive loss needs a batch of at least two samples");
    if (sample >= b) throw ConfigError("anchor sample out of range");
    const Array& anchor_view = views.view(view);

    auto dot_row = [&](const Array& m, std::size_t row) {
        double acc = 0.0;
        for (std::size_t c = 0; c < views.dim(); ++c) acc += anchor_view.at(sample, c) * m.at(row, c);
        return acc / views.tau;
    };

    std::vector<double> denom_logits;
    denom_logits.reserve(4 * b - 1);
    double positive_sum = 0.0;
    for (std::size_t u = 0; u < 4; ++u) {
        const Array& other = views.view(u);
        for (std::size_t j = 0; j < b; ++j) {
            if (u == view && j == sample) continue;
            denom_logits.push_back(dot_row(other, j));
        }
        if (u != view) positive_sum += dot_row(other, sample);
    }

    double peak = *std::max_element(denom_logits.begin(), denom_logits.end());
    double lse = 0.0;
    for (double s : denom_logits) lse += std::exp(s - peak);
    lse = peak + std::log(lse);
    return lse - positive_sum / 3.0;
}

double contrastive_loss(const ViewEmbeddings& views) {
    views.validate();
    const std::size_t b = views.batch();
    double total = 0.0;
    for (std::size_t v = 0; v < 4; ++v) {
        for (std::size_t i = 0; i < b; ++i) total += infonce_anchor(views, i, v);
    }
    return total / static_cast<double>(4 * b);
}

double total_loss(double contrast, double recon, double lambda) {
    if (lambda < 0.0) throw ConfigError("reconstruction weight must be non-negative");
    return contrast + lambda * recon;
}

NodeId recon_loss_cross_graph(Graph& g, NodeId target_ecg, NodeId recon_ecg, NodeId target_ppg,
                              NodeId recon_ppg, const MaskPlan& plan) {
    plan.validate();
    if (plan.masked.empty() || plan.visible.empty()) {
        throw ConfigError("cross-modal reconstruction needs both mask sets non-empty");
    }
    NodeId ecg_rows = g.gather_rows(g.subtract(target_ecg, recon_ecg), plan.masked);
    NodeId ecg_term = g.scalar_mul(g.sum_squares(ecg_rows),
                                   1.0 / static_cast<double>(plan.masked.size()));
    NodeId ppg_rows = g.gather_rows(g.subtract(target_ppg, recon_ppg), plan.visible);
    NodeId ppg_term = g.scalar_mul(g.sum_squares(ppg_rows),
                                   1.0 / static_cast<double>(plan.visible.size()));
    return g.add(ecg_term, ppg_term);
}

NodeId recon_loss_single_graph(Graph& g, NodeId target, NodeId recon, const MaskPlan& plan) {
    plan.validate();
    if (plan.masked.empty()) throw ConfigError("single-modal reconstruction needs masked rows");
    NodeId rows = g.gather_rows(g.subtract(target, recon), plan.masked);
    return g.scalar_mul(g.sum_squares(rows), 1.0 / static_cast<double>(plan.masked.size()));
}

NodeId contrastive_loss_graph(Graph& g, NodeId ecg, NodeId ppg, NodeId ecg_aug, NodeId ppg_aug,
                              double tau) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    const Shape& s = g.shape_of(ecg);
    if (s.size() != 2 || g.shape_of(ppg) != s || g.shape_of(ecg_aug) != s ||
        g.shape_of(ppg_aug) != s) {
        throw ShapeError("all four views must share one B x D shape");
    }
    const std::size_t b = s[0];
    if (b < 2) throw ConfigError("contrastive loss needs a batch of at least two samples");
    const std::size_t n = 4 * b;

    NodeId stacked = g.concat_rows({ecg, ppg, ecg_aug, ppg_aug});
    NodeId sim = g.scalar_mul(g.matmul(stacked, g.transpose(stacked)), 1.0 / tau);

    Array self_mask = Array::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) self_mask.at(i, i) = kSelfMask;
    NodeId denom = g.sum_all(g.row_lse(g.add(sim, g.constant(std::move(self_mask)))));

    Array positive_mask = Array::zeros({n, n});
    for (std::size_t v = 0; v < 4; ++v) {
        for (std::size_t u = 0; u < 4; ++u) {
            if (u == v) continue;
            for (std::size_t i = 0; i < b; ++i) positive_mask.at(v * b + i, u * b + i) = 1.0;
        }
    }
    NodeId positives = g.sum_all(g.multiply(sim, g.constant(std::move(positive_mask))));

    NodeId gap = g.subtract(denom, g.scalar_mul(positives, 1.0 / 3.0));
    return g.scalar_mul(gap, 1.0 / static_cast<double>(n));
}

NodeId total_loss_graph(Graph& g, NodeId contrast, NodeId recon, double lambda) {
    if (lambda < 0.0) throw ConfigError("reconstruction weight must be non-negative");
    return g.add(contrast, g.scalar_mul(recon, lambda));
}

}  // namespace m2ae
