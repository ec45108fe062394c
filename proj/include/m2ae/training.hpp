#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "m2ae/array.hpp"
#include "m2ae/augment.hpp"
#include "m2ae/model.hpp"
#include "m2ae/signals.hpp"

namespace m2ae {

enum class TrainMode { CrossModal, SingleModalEcg, SingleModalPpg };

const char* train_mode_name(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
    std::size_t batch_size = 16;
    double learning_rate = 1e-4;
    double scheduler_factor = 0.5;
    std::size_t scheduler_patience = 2;
    std::size_t early_stop_patience = 5;
    std::size_t max_epochs = 30;
    double mask_ratio_lo = 0.1;
    double mask_ratio_hi = 0.9;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::CrossModal;

    void validate() const;
};

struct LossWeights {
    double lambda = 0.1;  // weight of the reconstruction term in the total
    double tau = 0.1;     // contrastive temperature

    void validate() const;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct OptimizerState {
    std::map<std::string, Array> first_moment;
    std::map<std::string, Array> second_moment;
    std::uint64_t step = 0;
};

// One bias-corrected adaptive update, in place. Moments are created lazily;
// parameters without a gradient entry are left untouched.
void adam_step(ModelParams& params, const std::map<std::string, Array>& grads,
               OptimizerState& state, double learning_rate);

struct SchedulerState {
    double best_validation_loss = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_improvement = 0;
    double current_lr = 0.0;
};

// Reduce-on-plateau: a strictly lower validation loss resets the counter and
// the best; otherwise the counter increments and, on reaching `patience`,
// the lr is multiplied by `factor` and the counter resets.
void scheduler_step(SchedulerState& state, double validation_loss, double factor,
                    std::size_t patience);

// True iff the last `patience` entries contain no strict improvement over
// the best loss seen before them (boundary inclusive).
bool early_stop_check(const std::vector<double>& history, std::size_t patience);

// Uniform in [lo, hi]; deterministic in (seed, batch_index).
double draw_mask_ratio(double lo, double hi, std::uint64_t seed, std::uint64_t batch_index);

struct LossBreakdown {
    double total = 0.0;
    double contrast = 0.0;
    double recon_ecg = 0.0;
    double recon_ppg = 0.0;
};

// One batch, already patchified: per-sample patch matrices. Cross-modal
// batches fill all four vectors; single-modal batches fill only the vector
// matching their modality.
struct TrainBatch {
    std::vector<Array> ecg;
    std::vector<Array> ppg;
    std::vector<Array> ecg_aug;
    std::vector<Array> ppg_aug;

    std::size_t size(TrainMode mode) const;
    void validate(TrainMode mode) const;
};

// Patchifies the selected pairs and, in cross-modal mode, builds their
// augmented views with `augment` (whose seed the caller varies per step).
TrainBatch assemble_batch(const Dataset& dataset, const std::vector<std::size_t>& pair_indices,
                          TrainMode mode, const AugmentConfig& augment, std::size_t patch_size);

// Deterministic epoch batching: pairs in the chosen split are grouped by
// subject, subjects and per-subject pair lists are shuffled under
// (seed, epoch), and pairs are dealt one per subject per round. Every batch
// holds pairs from distinct subjects; chunks with fewer than two pairs are
// dropped. Returned indices point into dataset.pairs.
std::vector<std::vector<std::size_t>> plan_epoch_batches(const Dataset& dataset,
                                                         const SplitAssignment& split, Split which,
                                                         std::size_t batch_size, std::uint64_t seed,
                                                         std::uint64_t epoch);

struct TrainState {
    ModelParams params;
    OptimizerState opt;
    SchedulerState sched;
    std::vector<double> val_history;
    std::uint64_t global_step = 0;
    std::uint64_t epochs_done = 0;
};

// Fresh state: initialized parameters, empty moments, lr from the config.
TrainState init_train_state(const ModelConfig& model_config, const TrainConfig& train_config);

// Forward, backward, and one optimizer update at state.sched.current_lr.
// Cross-modal: four encoded views per sample feed the contrastive term and
// the merged bottleneck feeds both decoders; single-modal: masked
// reconstruction only. A non-finite loss aborts with the step index.
LossBreakdown train_step(TrainState& state, const TrainBatch& batch, const MaskPlan& plan,
                         const LossWeights& weights, const TrainConfig& config);

// Same losses with dropout disabled and no update.
LossBreakdown eval_batch(const ModelParams& params, const TrainBatch& batch, const MaskPlan& plan,
                         const LossWeights& weights, TrainMode mode);

// The graph assembly train_step differentiates, exposed for external audits:
// builds the full objective over `batch` in `g` and returns the scalar
// total-loss node.
NodeId build_training_loss(Graph& g, const TrainBatch& batch, const MaskPlan& plan,
                           const LossWeights& weights, TrainMode mode, const ModelConfig& config);

// Parameter bindings plus the batch's input leaves, named as
// build_training_loss expects them.
Bindings training_bindings(const ModelParams& params, const TrainBatch& batch, TrainMode mode);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_total = 0.0;
    double train_contrast = 0.0;
    double train_recon_ecg = 0.0;
    double train_recon_ppg = 0.0;
    double val_total = 0.0;
};

std::string epoch_csv_header();
std::string epoch_csv_row(const EpochLog& row);

struct PretrainOptions {
    std::string best_checkpoint_path;  // written whenever validation improves ("" disables)
    std::string log_csv_path;          // per-epoch CSV ("" disables)
    std::string state_path;            // rolling resume state ("" disables)
    bool resume = false;               // continue from state_path instead of fresh init
    const ModelParams* initial_params = nullptr;  // fresh-run override (warm start)
};

struct PretrainResult {
    std::vector<EpochLog> log;  // epochs run by this call
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t epochs_done = 0;
    bool stopped_early = false;
};

PretrainResult pretrain(const Dataset& dataset, const SplitAssignment& split,
                        const ModelConfig& model_config, const TrainConfig& train_config,
                        const LossWeights& weights, const AugmentConfig& augment,
                        const PretrainOptions& options);

// Copies every ecg.* block from `ecg_single` and every ppg.* block from
// `ppg_single` over `cross_init`. A shape mismatch is a hard error naming
// the offending block.
ModelParams warm_start_init(const ModelParams& cross_init, const ModelParams& ecg_single,
                            const ModelParams& ppg_single);

void save_train_state(const std::string& path, const TrainState& state);
TrainState load_train_state(const std::string& path);

}  // namespace m2ae
