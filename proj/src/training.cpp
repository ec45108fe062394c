#include "m2ae/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <utility>

#include "m2ae/errors.hpp"
#include "m2ae/io_util.hpp"
#include "m2ae/losses.hpp"
#include "m2ae/rng.hpp"

namespace m2ae {

namespace {

constexpr NodeId kNoNode = static_cast<NodeId>(-1);

// Stream tags keeping the per-purpose seed streams disjoint.
constexpr std::uint64_t kMaskTag = 0x6d61736b;
constexpr std::uint64_t kPlanTag = 0x706c616e;
constexpr std::uint64_t kViewTag = 0x76696577;
constexpr std::uint64_t kDropoutTag = 0x64726f70;
constexpr std::uint64_t kValTag = 0x76616c69;
constexpr std::uint64_t kOrderTag = 0x6f726465;

}  // namespace

const char* train_mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::CrossModal: return "cross_modal";
        case TrainMode::SingleModalEcg: return "single_modal_ecg";
        case TrainMode::SingleModalPpg: return "single_modal_ppg";
    }
    throw ConfigError("unknown training mode");
}

TrainMode parse_train_mode(const std::string& name) {
    if (name == "cross_modal") return TrainMode::CrossModal;
    if (name == "single_modal_ecg") return TrainMode::SingleModalEcg;
    if (name == "single_modal_ppg") return TrainMode::SingleModalPpg;
    throw ConfigError("unknown training mode: " + name);
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
        throw ConfigError("learning_rate must be finite and non-negative");
    }
    if (!(scheduler_factor > 0.0) || !(scheduler_factor < 1.0)) {
        throw ConfigError("scheduler_factor must lie in (0, 1)");
    }
    if (scheduler_patience == 0) throw ConfigError("scheduler_patience must be positive");
    if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be positive");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (!(mask_ratio_lo > 0.0) || !(mask_ratio_hi < 1.0) || mask_ratio_lo > mask_ratio_hi) {
        throw ConfigError("mask ratio range must lie inside (0, 1)");
    }
}

void LossWeights::validate() const {
    if (!std::isfinite(lambda) || lambda < 0.0) {
        throw ConfigError("reconstruction weight must be finite and non-negative");
    }
    if (!std::isfinite(tau) || tau <= 0.0) throw ConfigError("temperature must be positive");
}

void adam_step(ModelParams& params, const std::map<std::string, Array>& grads,
               OptimizerState& state, double learning_rate) {
    if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
        throw ConfigError("learning_rate must be finite and non-negative");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
    const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
    for (const auto& [name, grad] : grads) {
        auto it = params.values.find(name);
        if (it == params.values.end()) throw ConfigError("gradient for unknown parameter " + name);
        Array& value = it->second;
        if (!value.same_shape(grad)) throw ShapeError("gradient shape mismatch for " + name);
        auto m_it = state.first_moment.find(name);
        if (m_it == state.first_moment.end()) {
            m_it = state.first_moment.emplace(name, Array::zeros(value.shape())).first;
            state.second_moment.emplace(name, Array::zeros(value.shape()));
        }
        double* m = m_it->second.data();
        double* v = state.second_moment.at(name).data();
        double* p = value.data();
        const double* g = grad.data();
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEps);
        }
        if (!all_finite(p, value.size())) {
            throw NumericError("non-finite parameter after update: " + name);
        }
    }
}

void scheduler_step(SchedulerState& state, double validation_loss, double factor,
                    std::size_t patience) {
    if (!(factor > 0.0) || !(factor < 1.0)) throw ConfigError("scheduler factor must lie in (0, 1)");
    if (patience == 0) throw ConfigError("scheduler patience must be positive");
    if (validation_loss < state.best_validation_loss) {
        state.best_validation_loss = validation_loss;
        state.epochs_since_improvement = 0;
        return;
    }
    ++state.epochs_since_improvement;
    if (state.epochs_since_improvement >= patience) {
        state.current_lr *= factor;
        state.epochs_since_improvement = 0;
    }
}

bool early_stop_check(const std::vector<double>& history, std::size_t patience) {
    if (patience == 0) throw ConfigError("early-stop patience must be positive");
    if (history.size() <= patience) return false;
    double best = history[0];
    std::size_t last_improvement = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i] < best) {
            best = history[i];
            last_improvement = i;
        }
    }
    return last_improvement + patience < history.size();
}

double draw_mask_ratio(double lo, double hi, std::uint64_t seed, std::uint64_t batch_index) {
    if (!(lo > 0.0) || !(hi < 1.0) || lo > hi) {
        throw ConfigError("mask ratio range must lie inside (0, 1)");
    }
    Rng rng(mix_seed(seed, batch_index));
    return rng.uniform(lo, hi);
}

std::size_t TrainBatch::size(TrainMode mode) const {
    return mode == TrainMode::SingleModalPpg ? ppg.size() : ecg.size();
}

void TrainBatch::validate(TrainMode mode) const {
    auto check_block = [](const std::vector<Array>& arrays, const char* what) {
        if (arrays.empty()) throw ConfigError(std::string("batch has no ") + what + " samples");
        for (const Array& a : arrays) {
            if (!a.same_shape(arrays.front())) {
                throw ShapeError(std::string("inconsistent patch shapes in batch ") + what);
            }
        }
    };
    switch (mode) {
        case TrainMode::CrossModal:
            check_block(ecg, "ecg");
            check_block(ppg, "ppg");
            check_block(ecg_aug, "ecg_aug");
            check_block(ppg_aug, "ppg_aug");
            if (ppg.size() != ecg.size() || ecg_aug.size() != ecg.size() ||
                ppg_aug.size() != ecg.size()) {
                throw ShapeError("batch view counts disagree");
            }
            break;
        case TrainMode::SingleModalEcg:
            check_block(ecg, "ecg");
            if (!ppg.empty() || !ecg_aug.empty() || !ppg_aug.empty()) {
                throw ConfigError("single-modality batch carries unused views");
            }
            break;
        case TrainMode::SingleModalPpg:
            check_block(ppg, "ppg");
            if (!ecg.empty() || !ecg_aug.empty() || !ppg_aug.empty()) {
                throw ConfigError("single-modality batch carries unused views");
            }
            break;
    }
}

TrainBatch assemble_batch(const Dataset& dataset, const std::vector<std::size_t>& pair_indices,
                          TrainMode mode, const AugmentConfig& augment, std::size_t patch_size) {
    TrainBatch batch;
    for (std::size_t idx : pair_indices) {
        if (idx >= dataset.pairs.size()) throw ConfigError("pair index out of range");
        const PairedSegment& pair = dataset.pairs[idx];
        switch (mode) {
            case TrainMode::CrossModal: {
                batch.ecg.push_back(patchify(pair.ecg, patch_size));
                batch.ppg.push_back(patchify(pair.ppg, patch_size));
                auto views = make_views(pair, dataset, augment);
                batch.ecg_aug.push_back(patchify(views.first, patch_size));
                batch.ppg_aug.push_back(patchify(views.second, patch_size));
                break;
            }
            case TrainMode::SingleModalEcg:
                batch.ecg.push_back(patchify(pair.ecg, patch_size));
                break;
            case TrainMode::SingleModalPpg:
                batch.ppg.push_back(patchify(pair.ppg, patch_size));
                break;
        }
    }
    return batch;
}

std::vector<std::vector<std::size_t>> plan_epoch_batches(const Dataset& dataset,
                                                         const SplitAssignment& split, Split which,
                                                         std::size_t batch_size, std::uint64_t seed,
                                                         std::uint64_t epoch) {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    std::map<std::uint32_t, std::vector<std::size_t>> by_subject;
    for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
        auto it = split.find(dataset.pairs[i].subject_id);
        if (it != split.end() && it->second == which) {
            by_subject[dataset.pairs[i].subject_id].push_back(i);
        }
    }
    std::vector<std::uint32_t> subjects;
    subjects.reserve(by_subject.size());
    for (const auto& [sid, indices] : by_subject) subjects.push_back(sid);
    Rng order_rng(mix_seed(seed, kOrderTag, epoch));
    order_rng.shuffle(subjects);
    std::size_t max_rounds = 0;
    for (auto& [sid, indices] : by_subject) {
        Rng pair_rng(mix_seed(mix_seed(seed, epoch), sid));
        pair_rng.shuffle(indices);
        max_rounds = std::max(max_rounds, indices.size());
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t round = 0; round < max_rounds; ++round) {
        std::vector<std::size_t> current;
        for (std::uint32_t sid : subjects) {
            const std::vector<std::size_t>& indices = by_subject[sid];
            if (round >= indices.size()) continue;
            current.push_back(indices[round]);
            if (current.size() == batch_size) {
                batches.push_back(std::move(current));
                current.clear();
            }
        }
        if (current.size() >= 2) batches.push_back(std::move(current));
    }
    return batches;
}

TrainState init_train_state(const ModelConfig& model_config, const TrainConfig& train_config) {
    model_config.validate();
    train_config.validate();
    TrainState state;
    state.params = init_params(model_config, train_config.seed);
    state.sched.current_lr = train_config.learning_rate;
    return state;
}

namespace {

struct BatchNodes {
    NodeId total = kNoNode;
    NodeId contrast = kNoNode;
    NodeId recon_ecg = kNoNode;
    NodeId recon_ppg = kNoNode;
};

std::string input_name(const char* view, std::size_t index) {
    return std::string("in.") + view + "." + std::to_string(index);
}

NodeId mean_of(Graph& g, const std::vector<NodeId>& terms) {
    NodeId acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = g.add(acc, terms[i]);
    return g.scalar_mul(acc, 1.0 / static_cast<double>(terms.size()));
}

BatchNodes build_batch_losses(Graph& g, const TrainBatch& batch, const MaskPlan& plan,
                              const LossWeights& weights, TrainMode mode,
                              const ModelConfig& config) {
    const std::size_t k = config.patches();
    const std::size_t s = config.patch_size;
    BatchNodes nodes;
    if (mode == TrainMode::CrossModal) {
        const std::size_t n = batch.ecg.size();
        if (n < 2) throw ConfigError("cross-modal batches need at least two samples");
        // The PPG decoder is scored on the rows it had to infer, i.e. the
        // complement of the ECG-masked set.
        MaskPlan flipped{plan.k, plan.masked, plan.visible};
        std::vector<NodeId> f_ecg, f_ppg, f_ecg_aug, f_ppg_aug, rec_ecg, rec_ppg;
        for (std::size_t b = 0; b < n; ++b) {
            NodeId e = g.leaf(input_name("ecg", b), {k, s});
            NodeId p = g.leaf(input_name("ppg", b), {k, s});
            NodeId ea = g.leaf(input_name("ecg_aug", b), {k, s});
            NodeId pa = g.leaf(input_name("ppg_aug", b), {k, s});
            NodeId z_ecg = encode_from_patches(g, e, Modality::Ecg, config);
            NodeId z_ppg = encode_from_patches(g, p, Modality::Ppg, config);
            NodeId z_ecg_aug = encode_from_patches(g, ea, Modality::Ecg, config);
            NodeId z_ppg_aug = encode_from_patches(g, pa, Modality::Ppg, config);
            f_ecg.push_back(fingerprint(g, z_ecg));
            f_ppg.push_back(fingerprint(g, z_ppg));
            f_ecg_aug.push_back(fingerprint(g, z_ecg_aug));
            f_ppg_aug.push_back(fingerprint(g, z_ppg_aug));
            NodeId merged = merge_bottleneck(g, z_ecg, z_ppg, plan);
            NodeId recon_e = decode_modality(g, merged, Modality::Ecg, config);
            NodeId recon_p = decode_modality(g, merged, Modality::Ppg, config);
            rec_ecg.push_back(recon_loss_single_graph(g, e, recon_e, plan));
            rec_ppg.push_back(recon_loss_single_graph(g, p, recon_p, flipped));
        }
        nodes.contrast = contrastive_loss_graph(g, g.concat_rows(f_ecg), g.concat_rows(f_ppg),
                                                g.concat_rows(f_ecg_aug), g.concat_rows(f_ppg_aug),
                                                weights.tau);
        nodes.recon_ecg = mean_of(g, rec_ecg);
        nodes.recon_ppg = mean_of(g, rec_ppg);
        nodes.total = total_loss_graph(g, nodes.contrast,
                                       g.add(nodes.recon_ecg, nodes.recon_ppg), weights.lambda);
    } else {
        const Modality modality =
            mode == TrainMode::SingleModalEcg ? Modality::Ecg : Modality::Ppg;
        const std::vector<Array>& inputs = modality == Modality::Ecg ? batch.ecg : batch.ppg;
        const char* view = modality == Modality::Ecg ? "ecg" : "ppg";
        std::vector<NodeId> rec;
        for (std::size_t b = 0; b < inputs.size(); ++b) {
            NodeId x = g.leaf(input_name(view, b), {k, s});
            SingleModalNodes forward = single_modal_forward(g, x, modality, config, plan);
            rec.push_back(recon_loss_single_graph(g, x, forward.reconstruction, plan));
        }
        NodeId recon = mean_of(g, rec);
        if (modality == Modality::Ecg) {
            nodes.recon_ecg = recon;
        } else {
            nodes.recon_ppg = recon;
        }
        nodes.total = recon;
    }
    return nodes;
}

Bindings batch_bindings(const ModelParams& params, const TrainBatch& batch, TrainMode mode) {
    Bindings bindings = params_bindings(params);
    auto put = [&](const char* view, const std::vector<Array>& arrays) {
        for (std::size_t i = 0; i < arrays.size(); ++i) {
            bindings.emplace(input_name(view, i), arrays[i]);
        }
    };
    if (mode == TrainMode::CrossModal) {
        put("ecg", batch.ecg);
        put("ppg", batch.ppg);
        put("ecg_aug", batch.ecg_aug);
        put("ppg_aug", batch.ppg_aug);
    } else if (mode == TrainMode::SingleModalEcg) {
        put("ecg", batch.ecg);
    } else {
        put("ppg", batch.ppg);
    }
    return bindings;
}

LossBreakdown read_breakdown(const Graph& g, const BatchNodes& nodes) {
    LossBreakdown out;
    out.total = g.value_of(nodes.total).item();
    if (nodes.contrast != kNoNode) out.contrast = g.value_of(nodes.contrast).item();
    if (nodes.recon_ecg != kNoNode) out.recon_ecg = g.value_of(nodes.recon_ecg).item();
    if (nodes.recon_ppg != kNoNode) out.recon_ppg = g.value_of(nodes.recon_ppg).item();
    return out;
}

}  // namespace

LossBreakdown train_step(TrainState& state, const TrainBatch& batch, const MaskPlan& plan,
                         const LossWeights& weights, const TrainConfig& config) {
    config.validate();
    weights.validate();
    batch.validate(config.mode);
    plan.validate();
    try {
        Graph g(GraphOptions{true, mix_seed(config.seed, kDropoutTag, state.global_step)});
        BatchNodes nodes =
            build_batch_losses(g, batch, plan, weights, config.mode, state.params.config);
        Bindings bindings = batch_bindings(state.params, batch, config.mode);
        g.evaluate(nodes.total, bindings);
        LossBreakdown out = read_breakdown(g, nodes);
        std::set<std::string> wrt;
        for (const auto& [name, value] : state.params.values) {
            if (g.has_leaf(name)) wrt.insert(name);
        }
        std::map<std::string, Array> grads = g.gradients(nodes.total, bindings, wrt);
        adam_step(state.params, grads, state.opt, state.sched.current_lr);
        ++state.global_step;
        return out;
    } catch (const NumericError& err) {
        throw NumericError("training aborted at step " + std::to_string(state.global_step) +
                           ": " + err.what());
    }
}

LossBreakdown eval_batch(const ModelParams& params, const TrainBatch& batch, const MaskPlan& plan,
                         const LossWeights& weights, TrainMode mode) {
    weights.validate();
    batch.validate(mode);
    plan.validate();
    Graph g;
    BatchNodes nodes = build_batch_losses(g, batch, plan, weights, mode, params.config);
    g.evaluate(nodes.total, batch_bindings(params, batch, mode));
    return read_breakdown(g, nodes);
}

NodeId build_training_loss(Graph& g, const TrainBatch& batch, const MaskPlan& plan,
                           const LossWeights& weights, TrainMode mode, const ModelConfig& config) {
    weights.validate();
    batch.validate(mode);
    plan.validate();
    return build_batch_losses(g, batch, plan, weights, mode, config).total;
}

Bindings training_bindings(const ModelParams& params, const TrainBatch& batch, TrainMode mode) {
    batch.validate(mode);
    return batch_bindings(params, batch, mode);
}

std::string epoch_csv_header() {
    return "epoch,lr,train_total,train_contrast,train_recon_ecg,train_recon_ppg,val_total";
}

std::string epoch_csv_row(const EpochLog& row) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g", row.epoch, row.lr,
                  row.train_total, row.train_contrast, row.train_recon_ecg, row.train_recon_ppg,
                  row.val_total);
    return buf;
}

PretrainResult pretrain(const Dataset& dataset, const SplitAssignment& split,
                        const ModelConfig& model_config, const TrainConfig& train_config,
                        const LossWeights& weights, const AugmentConfig& augment,
                        const PretrainOptions& options) {
    model_config.validate();
    train_config.validate();
    weights.validate();
    if (dataset.segment_len != model_config.segment_len) {
        throw ConfigError("dataset segment length does not match the model config");
    }

    TrainState state;
    bool appending = false;
    if (options.resume) {
        if (options.state_path.empty()) throw ConfigError("resume requested without a state path");
        state = load_train_state(options.state_path);
        ModelConfig stored = state.params.config;
        if (stored.segment_len != model_config.segment_len ||
            stored.patch_size != model_config.patch_size ||
            stored.enc_width != model_config.enc_width ||
            stored.enc_depth != model_config.enc_depth ||
            stored.dec_width != model_config.dec_width ||
            stored.dec_depth != model_config.dec_depth || stored.heads != model_config.heads ||
            stored.dropout != model_config.dropout) {
            throw ConfigError("training state was saved under a different model config");
        }
        appending = true;
    } else {
        state = init_train_state(model_config, train_config);
        if (options.initial_params != nullptr) {
            for (const ParamSpec& spec : param_layout(model_config)) {
                auto it = options.initial_params->values.find(spec.name);
                if (it == options.initial_params->values.end()) {
                    throw ConfigError("initial parameters missing block " + spec.name);
                }
                if (it->second.shape() != spec.shape) {
                    throw ShapeError("initial parameter shape mismatch at " + spec.name);
                }
            }
            state.params = *options.initial_params;
        }
    }

    const std::uint64_t val_seed = mix_seed(train_config.seed, kValTag);
    std::vector<std::vector<std::size_t>> val_batches =
        plan_epoch_batches(dataset, split, Split::Valid, train_config.batch_size, val_seed, 0);
    if (val_batches.empty()) throw DataError("validation split yields no usable batches");

    std::ofstream csv;
    if (!options.log_csv_path.empty()) {
        csv.open(options.log_csv_path, appending ? std::ios::app : std::ios::trunc);
        if (!csv) throw IoError("cannot open metrics log: " + options.log_csv_path);
        if (!appending) csv << epoch_csv_header() << "\n";
    }

    const std::size_t k = model_config.patches();
    auto run_validation = [&]() {
        double weighted = 0.0;
        double count = 0.0;
        for (std::size_t vi = 0; vi < val_batches.size(); ++vi) {
            const double ratio = train_config.mode == TrainMode::CrossModal
                                     ? draw_mask_ratio(train_config.mask_ratio_lo,
                                                       train_config.mask_ratio_hi,
                                                       mix_seed(val_seed, kMaskTag), vi)
                                     : 0.5;
            MaskPlan plan = sample_mask_plan(k, ratio, mix_seed(val_seed, kPlanTag, vi));
            AugmentConfig view_config = augment;
            view_config.seed = mix_seed(augment.seed, kValTag, vi);
            TrainBatch batch = assemble_batch(dataset, val_batches[vi], train_config.mode,
                                              view_config, model_config.patch_size);
            LossBreakdown stats = eval_batch(state.params, batch, plan, weights, train_config.mode);
            const double n = static_cast<double>(batch.size(train_config.mode));
            weighted += stats.total * n;
            count += n;
        }
        return weighted / count;
    };

    PretrainResult result;
    for (std::size_t epoch = state.epochs_done + 1; epoch <= train_config.max_epochs; ++epoch) {
        std::vector<std::vector<std::size_t>> batches = plan_epoch_batches(
            dataset, split, Split::Train, train_config.batch_size, train_config.seed, epoch);
        if (batches.empty()) throw DataError("training split yields no usable batches");
        const double lr_used = state.sched.current_lr;
        double sum_total = 0.0, sum_contrast = 0.0, sum_recon_ecg = 0.0, sum_recon_ppg = 0.0;
        double seen = 0.0;
        for (const std::vector<std::size_t>& indices : batches) {
            const std::uint64_t step = state.global_step;
            const double ratio = train_config.mode == TrainMode::CrossModal
                                     ? draw_mask_ratio(train_config.mask_ratio_lo,
                                                       train_config.mask_ratio_hi,
                                                       mix_seed(train_config.seed, kMaskTag), step)
                                     : 0.5;
            MaskPlan plan = sample_mask_plan(k, ratio, mix_seed(train_config.seed, kPlanTag, step));
            AugmentConfig view_config = augment;
            view_config.seed = mix_seed(augment.seed, kViewTag, step);
            TrainBatch batch = assemble_batch(dataset, indices, train_config.mode, view_config,
                                              model_config.patch_size);
            LossBreakdown stats = train_step(state, batch, plan, weights, train_config);
            const double n = static_cast<double>(batch.size(train_config.mode));
            sum_total += stats.total * n;
            sum_contrast += stats.contrast * n;
            sum_recon_ecg += stats.recon_ecg * n;
            sum_recon_ppg += stats.recon_ppg * n;
            seen += n;
        }
        const double val_total = run_validation();

        EpochLog row;
        row.epoch = epoch;
        row.lr = lr_used;
        row.train_total = sum_total / seen;
        row.train_contrast = sum_contrast / seen;
        row.train_recon_ecg = sum_recon_ecg / seen;
        row.train_recon_ppg = sum_recon_ppg / seen;
        row.val_total = val_total;
        result.log.push_back(row);
        if (csv.is_open()) {
            csv << epoch_csv_row(row) << "\n";
            csv.flush();
        }

        if (val_total < state.sched.best_validation_loss &&
            !options.best_checkpoint_path.empty()) {
            save_checkpoint(options.best_checkpoint_path, state.params);
        }
        scheduler_step(state.sched, val_total, train_config.scheduler_factor,
                       train_config.scheduler_patience);
        state.val_history.push_back(val_total);
        state.epochs_done = epoch;
        if (!options.state_path.empty()) save_train_state(options.state_path, state);
        if (early_stop_check(state.val_history, train_config.early_stop_patience)) {
            result.stopped_early = true;
            break;
        }
    }
    result.epochs_done = state.epochs_done;
    result.best_val = state.sched.best_validation_loss;
    return result;
}

ModelParams warm_start_init(const ModelParams& cross_init, const ModelParams& ecg_single,
                            const ModelParams& ppg_single) {
    ModelParams out = cross_init;
    auto copy_prefixed = [&out](const ModelParams& source, const char* prefix) {
        for (auto& [name, value] : out.values) {
            if (name.rfind(prefix, 0) != 0) continue;
            auto it = source.values.find(name);
            if (it == source.values.end()) {
                throw ConfigError("warm-start source missing block " + name);
            }
            if (!it->second.same_shape(value)) {
                throw ShapeError("warm-start shape mismatch at " + name);
            }
            value = it->second;
        }
    };
    copy_prefixed(ecg_single, "ecg.");
    copy_prefixed(ppg_single, "ppg.");
    return out;
}

namespace {

constexpr char kStateMagic[4] = {'M', '2', 'S', 'T'};
constexpr std::uint16_t kStateVersion = 1;

}  // namespace

void save_train_state(const std::string& path, const TrainState& state) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open training state for writing: " + path);
    os.write(kStateMagic, 4);
    write_u16(os, kStateVersion);
    write_model_config(os, state.params.config);
    write_array_map(os, state.params.values);
    write_array_map(os, state.opt.first_moment);
    write_array_map(os, state.opt.second_moment);
    write_u64(os, state.opt.step);
    write_f64(os, state.sched.best_validation_loss);
    write_u64(os, state.sched.epochs_since_improvement);
    write_f64(os, state.sched.current_lr);
    write_u64(os, state.val_history.size());
    for (double v : state.val_history) write_f64(os, v);
    write_u64(os, state.global_step);
    write_u64(os, state.epochs_done);
    if (!os) throw IoError("failed while writing training state: " + path);
}

TrainState load_train_state(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open training state: " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::string(magic, 4) != std::string(kStateMagic, 4)) {
        throw IoError("not a training state file: " + path);
    }
    if (read_u16(is, "state version") != kStateVersion) {
        throw IoError("unsupported training state version");
    }
    TrainState state;
    state.params.config = read_model_config(is);
    state.params.config.validate();
    state.params.values = read_array_map(is);
    for (const ParamSpec& spec : param_layout(state.params.config)) {
        auto it = state.params.values.find(spec.name);
        if (it == state.params.values.end()) {
            throw IoError("training state missing parameter " + spec.name);
        }
        if (it->second.shape() != spec.shape) {
            throw IoError("training state parameter has wrong shape: " + spec.name);
        }
    }
    state.opt.first_moment = read_array_map(is);
    state.opt.second_moment = read_array_map(is);
    state.opt.step = read_u64(is, "optimizer step");
    state.sched.best_validation_loss = read_f64(is, "best validation loss");
    state.sched.epochs_since_improvement =
        static_cast<std::size_t>(read_u64(is, "epochs since improvement"));
    state.sched.current_lr = read_f64(is, "current lr");
    const std::uint64_t history_len = read_u64(is, "history length");
    state.val_history.resize(history_len);
    for (double& v : state.val_history) v = read_f64(is, "history entry");
    state.global_step = read_u64(is, "global step");
    state.epochs_done = read_u64(is, "epochs done");
    return state;
}

}  // namespace m2ae
