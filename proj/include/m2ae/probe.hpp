#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "m2ae/array.hpp"
#include "m2ae/metrics.hpp"
#include "m2ae/model.hpp"
#include "m2ae/signals.hpp"

namespace m2ae {

// Which stream produced a fingerprint: one encoder alone, or the merged
// bottleneck fed by both (fixed half/half plan, seed 0).
enum class FingerprintSource { Ecg, Ppg, Paired };

const char* fingerprint_source_name(FingerprintSource source);
FingerprintSource parse_fingerprint_source(const std::string& name);

struct FingerprintRow {
    std::uint32_t subject_id = 0;
    std::uint32_t segment_index = 0;
    FingerprintSource source = FingerprintSource::Ecg;
    std::vector<double> values;
};

struct FingerprintSet {
    std::size_t dim = 0;
    std::vector<FingerprintRow> rows;

    // Uniform row length == dim >= 1, finite values, and no duplicate
    // (subject_id, segment_index, source) keys.
    void validate() const;
};

std::vector<const PairedSegment*> all_pairs(const Dataset& dataset);

// Frozen, dropout-free pass over every segment: encode the full patch
// sequence (both sequences and a half/half merge for Paired) and pool the
// bottleneck rows into one enc_width vector per segment.
FingerprintSet extract_fingerprints(const ModelParams& params,
                                    const std::vector<const PairedSegment*>& segments,
                                    FingerprintSource source);

// CSV with header subject_id,segment_index,source,f0,...,f{D-1}. Values
// round-trip exactly.
void save_fingerprints_csv(const std::string& path, const FingerprintSet& set);
FingerprintSet load_fingerprints_csv(const std::string& path);

// Subject-level split of fingerprint rows: returns (train, heldout) row
// indices; every subject lands entirely on one side. Both sides non-empty.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_fingerprint_rows(
    const FingerprintSet& set, double train_frac, std::uint64_t seed);

FingerprintSet subset(const FingerprintSet& set, const std::vector<std::size_t>& indices);

// Scalar label per (subject_id, segment_index) key, stored separately from
// the dataset so pretraining data stays label-free.
struct LabelTable {
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> values;
};

// CSV with header subject_id,segment_index,label.
void save_labels_csv(const std::string& path, const LabelTable& table);
LabelTable load_labels_csv(const std::string& path);

// One label per fingerprint row, in row order; missing keys are DataError.
std::vector<double> align_labels(const FingerprintSet& set, const LabelTable& table);

constexpr double kProbeGradTol = 1e-6;
constexpr std::size_t kProbeMaxIters = 10000;

struct ProbeModel {
    ProbeTask task = ProbeTask::Binary;
    std::size_t n_classes = 0;  // 2 for binary, C for multiclass, 0 for regression
    Array weights;              // multiclass C x D, otherwise 1 x D
    Array bias;                 // 1 x C or 1 x 1
    std::size_t iterations = 0;
    double final_grad_norm = 0.0;
    bool converged = false;
};

// Full-batch gradient descent on the graph engine: logistic regression for
// binary (sigmoid) and multiclass (softmax), ridge for regression, with an
// L2 penalty on the weights (not the bias). The step size comes from a
// power-iteration curvature bound, so descent is monotone; iteration stops
// when the gradient inf-norm falls below kProbeGradTol or at
// kProbeMaxIters. Classification labels must be integers in class range.
ProbeModel fit_linear_probe(const FingerprintSet& fingerprints, const std::vector<double>& labels,
                            ProbeTask task, double l2, std::uint64_t seed);

// Scores per row: binary n x 1 positive-class probabilities, multiclass
// n x C softmax rows, regression n x 1 predictions.
Array probe_predict(const ProbeModel& model, const FingerprintSet& fingerprints);

// probe_predict piped into the task's metric set.
MetricReport evaluate_probe(const ProbeModel& model, const FingerprintSet& fingerprints,
                            const std::vector<double>& labels);

enum class ReconSetting { Frozen, DecoderFinetune };

const char* recon_setting_name(ReconSetting setting);
ReconSetting parse_recon_setting(const std::string& name);

struct ReconstructOptions {
    double learning_rate = 1e-3;
    std::size_t batch_size = 8;
    std::size_t max_epochs = 50;
    std::size_t patience = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ReconstructionResult {
    Modality source = Modality::Ecg;
    Modality target = Modality::Ppg;
    std::vector<std::vector<double>> reconstructions;  // one waveform per eval segment
    std::vector<double> per_sample_mae;
    double mean_mae = 0.0;
    std::size_t finetune_epochs = 0;   // epochs actually run (0 when frozen)
    double finetune_loss = 0.0;        // best finetune-split objective
};

struct FinetuneInfo {
    std::size_t epochs = 0;
    double best_objective = 0.0;
};

// Adam on the cross-reconstruction objective (mean per-segment patch MSE),
// updating only the target-side decoder: <target>.dec.* and
// <target>.pos_dec. Keeps the snapshot with the best full-split objective;
// the untouched decoder counts as epoch zero, so the stored parameters are
// never worse than the starting ones on `segments`.
FinetuneInfo finetune_cross_decoder(ModelParams& params,
                                    const std::vector<const PairedSegment*>& segments,
                                    Modality source_modality,
                                    const ReconstructOptions& options = {});

// Cross-modal reconstruction: encode the source signal fully, run the
// bottleneck through the other modality's decoder, unpatchify, and report
// per-sample mean absolute error against the true target waveform.
// Frozen never writes a parameter. DecoderFinetune first trains only the
// target decoder (dec.* and pos_dec) on `finetune_segments` with Adam,
// keeping the snapshot with the best finetune objective (the untouched
// decoder counts as epoch zero), then evaluates like Frozen.
ReconstructionResult reconstruct_cross(const ModelParams& params,
                                       const std::vector<const PairedSegment*>& eval_segments,
                                       Modality source_modality, ReconSetting setting,
                                       const std::vector<const PairedSegment*>& finetune_segments = {},
                                       const ReconstructOptions& options = {});

}  // namespace m2ae
