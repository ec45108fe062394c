#pragma once

#include <cstddef>
#include <vector>

#include "m2ae/array.hpp"
#include "m2ae/graph.hpp"
#include "m2ae/model.hpp"

namespace m2ae {

// Four pooled embedding sets, one row per batch sample. View order
// throughout this module: 0 = ecg, 1 = ppg, 2 = ecg_aug, 3 = ppg_aug.
struct ViewEmbeddings {
    Array ecg;
    Array ppg;
    Array ecg_aug;
    Array ppg_aug;
    double tau = 0.1;

    std::size_t batch() const { return ecg.rows(); }
    std::size_t dim() const { return ecg.cols(); }
    const Array& view(std::size_t v) const;
    void validate() const;
};

// Masked-patch reconstruction: the ECG decoder is scored on rows the ECG
// stream did not contribute (plan.masked), the PPG decoder on the
// complementary rows (plan.visible). Each term is normalized by its own
// row count.
double recon_loss_cross(const Array& target_ecg, const Array& recon_ecg,
                        const Array& target_ppg, const Array& recon_ppg, const MaskPlan& plan);

// Single-modality masked loss over plan.masked rows only.
double recon_loss_single(const Array& target, const Array& recon, const MaskPlan& plan);

// Temperature-scaled raw dot product.
double similarity(const std::vector<double>& a, const std::vector<double>& b, double tau);

// InfoNCE for anchor (sample, view): the three positives are the same
// sample in the other views; the denominator spans all 4B embeddings
// except the anchor itself.
double infonce_anchor(const ViewEmbeddings& views, std::size_t sample, std::size_t view);

// Mean of infonce_anchor over all 4B anchors.
double contrastive_loss(const ViewEmbeddings& views);

double total_loss(double contrast, double recon, double lambda);

// Graph-route equivalents used by training. Values agree with the scalar
// functions above to floating-point accuracy.
NodeId recon_loss_cross_graph(Graph& g, NodeId target_ecg, NodeId recon_ecg, NodeId target_ppg,
                              NodeId recon_ppg, const MaskPlan& plan);
NodeId recon_loss_single_graph(Graph& g, NodeId target, NodeId recon, const MaskPlan& plan);
NodeId contrastive_loss_graph(Graph& g, NodeId ecg, NodeId ppg, NodeId ecg_aug, NodeId ppg_aug,
                              double tau);
NodeId total_loss_graph(Graph& g, NodeId contrast, NodeId recon, double lambda);

}  // namespace m2ae
