// Acceptance harness: ten pass/fail checks covering the gradient audit, the
// loss-definition oracles, the overfit smoke run and its downstream uses,
// the schedule contracts, the metric oracle, and determinism round trips.
// Prints one line per criterion; the exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "m2ae/config.hpp"
#include "m2ae/gradcheck.hpp"
#include "m2ae/losses.hpp"
#include "m2ae/metrics.hpp"
#include "m2ae/model.hpp"
#include "m2ae/probe.hpp"
#include "m2ae/rng.hpp"
#include "m2ae/signals.hpp"
#include "m2ae/training.hpp"

using namespace m2ae;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

double elapsed_s(std::chrono::steady_clock::time_point start) {
    const auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(now - start).count();
}

std::string fmt(const char* format, ...) {
    char buffer[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buffer, sizeof(buffer), format, args);
    va_end(args);
    return std::string(buffer);
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Array random_array(Shape shape, Rng& rng) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return Array(std::move(shape), std::move(v));
}

MaskPlan plan_from_bits(std::size_t k, std::uint32_t bits) {
    MaskPlan plan;
    plan.k = k;
    for (std::size_t i = 0; i < k; ++i) {
        if (bits & (1u << i)) {
            plan.masked.push_back(i);
        } else {
            plan.visible.push_back(i);
        }
    }
    return plan;
}

// ---- 1: gradient audit at desk dims ----------------------------------------

Outcome check_gradient_audit() {
    GradCheckConfig config = default_gradcheck_config();
    const auto start = std::chrono::steady_clock::now();
    const GradCheckReport report = run_gradcheck(config);
    const double seconds = elapsed_s(start);

    const std::vector<ParamSpec> layout = param_layout(config.model);
    if (report.blocks.size() != layout.size())
        return {false, fmt("%zu blocks audited, %zu in the layout", report.blocks.size(),
                           layout.size())};
    std::set<std::string> seen;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const BlockCheck& block = report.blocks[i];
        if (block.name != layout[i].name)
            return {false, "audit order diverges from the parameter layout at " + block.name};
        if (!seen.insert(block.name).second)
            return {false, "block audited twice: " + block.name};
        std::size_t size = 1;
        for (std::size_t d : layout[i].shape) size *= d;
        const std::size_t want = std::min<std::size_t>(config.coords_per_block, size);
        if (block.coords != want)
            return {false, fmt("%s sampled %zu coords, wanted %zu", block.name.c_str(),
                               block.coords, want)};
    }
    if (!report.passed)
        return {false, fmt("worst rel %.3e in %s", report.worst_rel_error,
                           report.worst_block.c_str())};
    if (seconds >= 120.0) return {false, fmt("took %.1f s, limit 120", seconds)};
    return {true, fmt("%zu blocks, worst rel %.3e, %.1f s", report.blocks.size(),
                      report.worst_rel_error, seconds)};
}

// ---- 2: merge equals the case-split definition, exhaustive k <= 8 -----------

Outcome check_merge_oracle() {
    std::size_t plans = 0;
    for (std::size_t k = 1; k <= 8; ++k) {
        const std::size_t d = 3;
        std::vector<double> ve, vp;
        for (std::size_t i = 0; i < k * d; ++i) {
            ve.push_back(1.0 + 0.5 * static_cast<double>(i));
            vp.push_back(-200.0 - static_cast<double>(i));
        }
        const Array ze({k, d}, ve);
        const Array zp({k, d}, vp);
        for (std::uint32_t bits = 0; bits < (1u << k); ++bits) {
            const MaskPlan plan = plan_from_bits(k, bits);
            Graph g;
            const Array merged =
                g.evaluate(merge_bottleneck(g, g.constant(ze), g.constant(zp), plan), {});
            for (std::size_t i = 0; i < k; ++i) {
                const bool is_masked = (bits & (1u << i)) != 0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double want = is_masked ? zp.at(i, j) : ze.at(i, j);
                    if (merged.at(i, j) != want)
                        return {false, fmt("k=%zu bits=%u row %zu col %zu: %g != %g", k, bits, i,
                                           j, merged.at(i, j), want)};
                }
            }
            ++plans;
        }
    }
    return {true, fmt("%zu plans, exact equality", plans)};
}

// ---- 3: four-view contrastive loss vs a direct double loop ------------------

double row_dot(const Array& a, std::size_t i, const Array& b, std::size_t j) {
    double dot = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) dot += a.at(i, c) * b.at(j, c);
    return dot;
}

// Unstabilized transliteration: mean over all 4B anchors of the mean over
// the 3 positive views of -log(exp(s_pos) / sum of exp over non-anchors).
double double_loop_contrastive(const ViewEmbeddings& views) {
    const std::size_t b = views.batch();
    double total = 0.0;
    for (std::size_t v = 0; v < 4; ++v) {
        for (std::size_t i = 0; i < b; ++i) {
            double anchor = 0.0;
            for (std::size_t u = 0; u < 4; ++u) {
                if (u == v) continue;
                const double s_pos =
                    row_dot(views.view(v), i, views.view(u), i) / views.tau;
                double denom = 0.0;
                for (std::size_t w = 0; w < 4; ++w) {
                    for (std::size_t j = 0; j < b; ++j) {
                        if (w == v && j == i) continue;
                        denom += std::exp(row_dot(views.view(v), i, views.view(w), j) / views.tau);
                    }
                }
                anchor += std::log(std::exp(s_pos) / denom);
            }
            total += -anchor / 3.0;
        }
    }
    return total / static_cast<double>(4 * b);
}

double graph_contrastive(const ViewEmbeddings& views) {
    Graph g;
    const NodeId root =
        contrastive_loss_graph(g, g.constant(views.ecg), g.constant(views.ppg),
                               g.constant(views.ecg_aug), g.constant(views.ppg_aug), views.tau);
    return g.evaluate(root, {}).at(0, 0);
}

Outcome check_contrastive_oracle() {
    Rng rng(20260819);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t b = 2 + rng.uniform_index(3);  // the loss needs negatives
        const std::size_t d = 1 + rng.uniform_index(6);
        ViewEmbeddings views;
        views.ecg = random_array({b, d}, rng);
        views.ppg = random_array({b, d}, rng);
        views.ecg_aug = random_array({b, d}, rng);
        views.ppg_aug = random_array({b, d}, rng);
        views.tau = rng.uniform(0.05, 0.5);
        const double want = double_loop_contrastive(views);
        worst = std::max(worst, std::abs(contrastive_loss(views) - want));
        worst = std::max(worst, std::abs(graph_contrastive(views) - want));
        if (worst > 1e-10)
            return {false, fmt("trial %d (B=%zu D=%zu): deviation %.3e", trial, b, d, worst)};
    }
    for (std::size_t b = 2; b <= 4; ++b) {
        ViewEmbeddings views;
        const Array same = Array::full({b, 3}, 0.7);
        views.ecg = same;
        views.ppg = same;
        views.ecg_aug = same;
        views.ppg_aug = same;
        views.tau = 0.1;
        const double want = std::log(static_cast<double>(4 * b - 1));
        const double got = contrastive_loss(views);
        if (std::abs(got - want) > 1e-9)
            return {false, fmt("uniform B=%zu: %0.12f vs log(4B-1)=%0.12f", b, got, want)};
    }
    return {true, fmt("200 random trials within %.1e, uniform rows give log(4B-1)", worst)};
}

// ---- 4: reconstruction loss ignores rows outside its scoring sets -----------

Outcome check_recon_locality() {
    const std::size_t k = 8, s = 5;
    Rng rng(41);
    const Array te = random_array({k, s}, rng);
    const Array tp = random_array({k, s}, rng);
    const Array re = random_array({k, s}, rng);
    const Array rp = random_array({k, s}, rng);
    const double deltas[] = {1.0, -3.5, 1e6};

    std::size_t checks = 0;
    for (std::uint32_t bits = 1; bits + 1 < (1u << k); ++bits) {
        const MaskPlan plan = plan_from_bits(k, bits);
        const double base = recon_loss_cross(te, re, tp, rp, plan);
        for (double delta : deltas) {
            // ECG is scored on plan.masked, so visible rows must be inert.
            for (std::size_t row : plan.visible) {
                Array bumped = re;
                for (std::size_t c = 0; c < s; ++c) bumped.at(row, c) += delta;
                if (recon_loss_cross(te, bumped, tp, rp, plan) != base)
                    return {false, fmt("ecg row %zu (bits=%u, delta=%g) moved the loss", row,
                                       bits, delta)};
                ++checks;
            }
            // PPG is scored on plan.visible.
            for (std::size_t row : plan.masked) {
                Array bumped = rp;
                for (std::size_t c = 0; c < s; ++c) bumped.at(row, c) += delta;
                if (recon_loss_cross(te, re, tp, bumped, plan) != base)
                    return {false, fmt("ppg row %zu (bits=%u, delta=%g) moved the loss", row,
                                       bits, delta)};
                ++checks;
            }
        }
    }

    // Same statement along the differentiable route.
    const MaskPlan plan = plan_from_bits(k, 0x2d);
    Graph g;
    const NodeId root = recon_loss_cross_graph(g, g.constant(te), g.constant(re), g.constant(tp),
                                               g.constant(rp), plan);
    const double graph_base = g.evaluate(root, {}).at(0, 0);
    Array bumped = re;
    for (std::size_t c = 0; c < s; ++c) bumped.at(plan.visible[0], c) += 7.25;
    Graph g2;
    const NodeId root2 = recon_loss_cross_graph(g2, g2.constant(te), g2.constant(bumped),
                                                g2.constant(tp), g2.constant(rp), plan);
    if (g2.evaluate(root2, {}).at(0, 0) != graph_base)
        return {false, "graph route saw an out-of-set perturbation"};
    return {true, fmt("%zu perturbations, loss change exactly 0", checks)};
}

// ---- 5: overfit smoke run ----------------------------------------------------

struct SmokeContext {
    Dataset dataset;
    SplitAssignment split;
    ModelParams params;  // best-validation checkpoint
    bool trained = false;
};

// Eval-mode cross-modal pass per pair; squared error per element over the
// scored rows (masked for ECG, visible for PPG) under a fresh 0.5 plan.
double masked_recon_mse(const ModelParams& params, const Dataset& dataset,
                        const SplitAssignment& split) {
    const ModelConfig& mc = params.config;
    const std::size_t k = mc.patches();
    const Bindings bindings = params_bindings(params);
    double total = 0.0;
    std::size_t elements = 0;
    for (std::size_t p = 0; p < dataset.pairs.size(); ++p) {
        const PairedSegment& pair = dataset.pairs[p];
        if (split.at(pair.subject_id) != Split::Train) continue;
        const MaskPlan plan = sample_mask_plan(k, 0.5, mix_seed(0x5e5e, p));
        const Array target_ecg = patchify(pair.ecg, mc.patch_size);
        const Array target_ppg = patchify(pair.ppg, mc.patch_size);

        Graph g;
        const NodeId z_ecg =
            encode_from_patches(g, g.constant(target_ecg), Modality::Ecg, mc);
        const NodeId z_ppg =
            encode_from_patches(g, g.constant(target_ppg), Modality::Ppg, mc);
        const NodeId merged = merge_bottleneck(g, z_ecg, z_ppg, plan);
        const NodeId recon_ecg = decode_modality(g, merged, Modality::Ecg, mc);
        const NodeId recon_ppg = decode_modality(g, merged, Modality::Ppg, mc);
        const Array re = g.evaluate(recon_ecg, bindings);
        const Array rp = g.evaluate(recon_ppg, bindings);

        for (std::size_t row : plan.masked) {
            for (std::size_t c = 0; c < mc.patch_size; ++c) {
                const double d = re.at(row, c) - target_ecg.at(row, c);
                total += d * d;
                ++elements;
            }
        }
        for (std::size_t row : plan.visible) {
            for (std::size_t c = 0; c < mc.patch_size; ++c) {
                const double d = rp.at(row, c) - target_ppg.at(row, c);
                total += d * d;
                ++elements;
            }
        }
    }
    return total / static_cast<double>(elements);
}

Outcome check_overfit_smoke(SmokeContext& ctx, const std::filesystem::path& work) {
    const auto start = std::chrono::steady_clock::now();
    ctx.dataset = generate_dataset(64, 4, 0);
    ctx.split = split_by_subject(ctx.dataset, 0.8, 0.1, 0.1, 0);

    ModelConfig model;  // desk widths and depths
    model.dropout = 0.0;
    TrainConfig train;
    train.batch_size = 4;
    train.learning_rate = 1e-3;
    train.scheduler_patience = 5;
    train.early_stop_patience = 60;
    train.max_epochs = 60;
    train.seed = 0;
    LossWeights weights;
    weights.lambda = 1.0;
    const AugmentConfig augment;

    PretrainOptions options;
    options.best_checkpoint_path = (work / "smoke_checkpoint.bin").string();
    options.state_path = (work / "smoke_state.bin").string();
    const PretrainResult result =
        pretrain(ctx.dataset, ctx.split, model, train, weights, augment, options);
    // Downstream criteria use the best-validation checkpoint; the overfit bound
    // below is about raw capacity, so it reads the final-epoch parameters.
    ctx.params = load_checkpoint(options.best_checkpoint_path);
    ctx.trained = true;
    const ModelParams final_params = load_train_state(options.state_path).params;

    const double val1 = result.log.at(0).val_total;
    double best30 = val1;
    std::size_t best_epoch = 1;
    for (std::size_t i = 0; i < result.log.size() && i < 30; ++i) {
        if (result.log[i].val_total < best30) {
            best30 = result.log[i].val_total;
            best_epoch = result.log[i].epoch;
        }
    }
    const double mse = masked_recon_mse(final_params, ctx.dataset, ctx.split);
    const double seconds = elapsed_s(start);

    if (!(best30 <= 0.6 * val1))
        return {false, fmt("val %.4f at epoch %zu never reached 60%% of %.4f", best30,
                           best_epoch, val1)};
    if (!(mse < 0.1)) return {false, fmt("masked train MSE %.4f, needs < 0.1", mse)};
    if (seconds >= 600.0) return {false, fmt("took %.0f s, limit 600", seconds)};
    return {true, fmt("val %.3f -> %.3f (%.0f%% by epoch %zu), masked MSE %.4f, %.0f s", val1,
                      best30, 100.0 * best30 / val1, best_epoch, mse, seconds)};
}

// ---- 6: decoder finetuning never loses to frozen on held-out data -----------

Outcome check_finetune_direction(const SmokeContext& ctx) {
    if (!ctx.trained) return {false, "no smoke checkpoint (criterion 5 crashed)"};
    std::vector<const PairedSegment*> eval_segs, tune_segs;
    for (const PairedSegment& pair : ctx.dataset.pairs) {
        switch (ctx.split.at(pair.subject_id)) {
            case Split::Test: eval_segs.push_back(&pair); break;
            case Split::Train: tune_segs.push_back(&pair); break;
            default: break;
        }
    }

    std::string report;
    for (Modality source : {Modality::Ecg, Modality::Ppg}) {
        const ReconstructionResult frozen =
            reconstruct_cross(ctx.params, eval_segs, source, ReconSetting::Frozen);
        const ReconstructionResult tuned = reconstruct_cross(
            ctx.params, eval_segs, source, ReconSetting::DecoderFinetune, tune_segs);
        const char* name = source == Modality::Ecg ? "ecg2ppg" : "ppg2ecg";
        report += fmt("%s%s frozen %.4f tuned %.4f", report.empty() ? "" : ", ", name,
                      frozen.mean_mae, tuned.mean_mae);
        if (!(tuned.mean_mae <= frozen.mean_mae)) return {false, report};
    }
    return {true, report};
}

// ---- 7: linear probe separates synthetic heart-rate classes ------------------

Outcome check_hr_probe(const SmokeContext& ctx) {
    if (!ctx.trained) return {false, "no smoke checkpoint (criterion 5 crashed)"};
    const std::size_t per_class = 30, segments_each = 2;
    std::vector<PairedSegment> segments;
    std::vector<double> labels;
    Rng rng(511);
    for (std::size_t cls = 0; cls < 2; ++cls) {
        for (std::size_t s = 0; s < per_class; ++s) {
            ProfileOverrides overrides;
            overrides.heart_rate_bpm =
                cls == 0 ? rng.uniform(55.0, 65.0) : rng.uniform(95.0, 105.0);
            const std::uint32_t sid = static_cast<std::uint32_t>(cls * per_class + s);
            const SubjectProfile profile = generate_subject(mix_seed(88, sid), overrides);
            for (std::size_t i = 0; i < segments_each; ++i) {
                segments.push_back(
                    synthesize_pair(profile, sid, static_cast<std::uint32_t>(i)));
                labels.push_back(static_cast<double>(cls));
            }
        }
    }
    std::vector<const PairedSegment*> ptrs;
    for (const PairedSegment& seg : segments) ptrs.push_back(&seg);

    std::string report;
    for (FingerprintSource source :
         {FingerprintSource::Ecg, FingerprintSource::Ppg, FingerprintSource::Paired}) {
        const FingerprintSet set = extract_fingerprints(ctx.params, ptrs, source);
        const auto [train_idx, held_idx] = split_fingerprint_rows(set, 0.7, 0);
        std::vector<double> train_labels, held_labels;
        for (std::size_t i : train_idx) train_labels.push_back(labels[i]);
        for (std::size_t i : held_idx) held_labels.push_back(labels[i]);
        const ProbeModel probe = fit_linear_probe(subset(set, train_idx), train_labels,
                                                  ProbeTask::Binary, 1e-3, 0);
        const MetricReport metrics =
            evaluate_probe(probe, subset(set, held_idx), held_labels);
        const double accuracy = metrics.get("accuracy");
        report += fmt("%s%s %.3f", report.empty() ? "" : ", ",
                      fingerprint_source_name(source), accuracy);
        if (!(accuracy >= 0.8)) return {false, report + " (needs >= 0.8)"};
    }
    return {true, report};
}

// ---- 8: plateau scheduler and early stop, exact sequences --------------------

Outcome check_schedule_contract() {
    // Factor 0.5, patience 2: two non-improvements halve, improvement resets.
    {
        SchedulerState state;
        state.current_lr = 1e-4;
        const double losses[] = {1.0, 1.1, 1.2};
        const double want_lr[] = {1e-4, 1e-4, 5e-5};
        for (int i = 0; i < 3; ++i) {
            scheduler_step(state, losses[i], 0.5, 2);
            if (state.current_lr != want_lr[i])
                return {false, fmt("halving case step %d: lr %g, wanted %g", i,
                                   state.current_lr, want_lr[i])};
        }
    }
    {
        SchedulerState state;
        state.current_lr = 1e-3;
        for (int i = 0; i < 12; ++i) {
            scheduler_step(state, 5.0 - 0.25 * i, 0.5, 2);
            if (state.current_lr != 1e-3)
                return {false, "lr moved under monotone improvement"};
        }
    }
    {
        SchedulerState state;
        state.current_lr = 1e-3;
        scheduler_step(state, 1.0, 0.5, 2);   // best
        scheduler_step(state, 1.4, 0.5, 2);   // counter 1
        scheduler_step(state, 0.9, 0.5, 2);   // improvement resets
        scheduler_step(state, 1.2, 0.5, 2);   // counter 1 again
        if (state.current_lr != 1e-3)
            return {false, "counter survived an improvement"};
        scheduler_step(state, 1.2, 0.5, 2);   // counter 2, halve
        if (state.current_lr != 5e-4)
            return {false, "reset counter failed to reach patience"};
    }
    {
        SchedulerState state;
        state.current_lr = 8e-4;
        scheduler_step(state, 2.0, 0.5, 1);  // first call only sets the best
        for (int round = 0; round < 3; ++round) {
            scheduler_step(state, 2.0, 0.5, 1);  // then 8 -> 4 -> 2 -> 1
        }
        if (state.current_lr != 1e-4) return {false, fmt("chained halvings gave %g",
                                                         state.current_lr)};
    }

    if (!early_stop_check({1.0, 1.1, 1.1, 1.1}, 3)) return {false, "patience-3 plateau missed"};
    if (early_stop_check({1.0, 1.1, 1.1}, 3)) return {false, "stopped before patience filled"};
    if (!early_stop_check({1.0, 1.1, 1.1}, 2)) return {false, "boundary plateau missed"};
    if (early_stop_check({1.0, 1.1}, 2)) return {false, "stopped with history < patience + 1"};
    if (early_stop_check({}, 3)) return {false, "stopped on empty history"};
    if (!early_stop_check({2.0, 2.0}, 1)) return {false, "exact tie should count as no gain"};
    if (!early_stop_check({1.0, 1.1, 0.9, 1.0, 1.0}, 2)) return {false, "trailing plateau missed"};
    if (early_stop_check({1.0, 1.1, 0.9, 1.0, 1.0}, 3)) return {false, "window-3 gain ignored"};
    std::vector<double> decreasing;
    for (int i = 0; i < 20; ++i) {
        decreasing.push_back(5.0 - 0.1 * i);
        if (early_stop_check(decreasing, 3)) return {false, "stopped a decreasing history"};
    }
    return {true, "halving, reset, chained, and boundary-inclusive cases all exact"};
}

// ---- 9: AUROC equals exhaustive pairwise concordance -------------------------

double pairwise_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double concordant = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                concordant += 1.0;
            } else if (scores[i] == scores[j]) {
                concordant += 0.5;
            }
        }
    }
    return concordant / static_cast<double>(pairs);
}

Outcome check_auroc_oracle() {
    const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> labels{0, 0, 1, 1};
    if (binary_auroc(scores, labels) != 0.75)
        return {false, fmt("worked example gave %.10f, not 0.75", binary_auroc(scores, labels))};

    Rng rng(90210);
    double worst = 0.0;
    std::size_t trials = 0;
    for (std::size_t n = 2; n <= 12; ++n) {
        for (int t = 0; t < 60; ++t) {
            std::vector<double> s(n);
            std::vector<int> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = 0.25 * static_cast<double>(rng.uniform_index(5));  // ties likely
                y[i] = rng.uniform01() < 0.5 ? 0 : 1;
            }
            y[0] = 0;
            y[1] = 1;  // both classes present
            const double diff = std::abs(binary_auroc(s, y) - pairwise_auroc(s, y));
            worst = std::max(worst, diff);
            if (diff > 1e-12)
                return {false, fmt("n=%zu trial %d: rank %.12f vs pairwise %.12f", n, t,
                                   binary_auroc(s, y), pairwise_auroc(s, y))};
            ++trials;
        }
    }
    return {true, fmt("worked example 0.75 exact, %zu tied trials within %.1e", trials, worst)};
}

// ---- 10: determinism and byte round trips ------------------------------------

Dataset short_dataset(std::uint32_t subjects, std::uint32_t pairs_each, std::size_t length,
                      std::uint64_t seed) {
    Dataset dataset;
    dataset.segment_len = length;
    for (std::uint32_t s = 0; s < subjects; ++s) {
        const SubjectProfile profile = generate_subject(mix_seed(seed, s));
        for (std::uint32_t i = 0; i < pairs_each; ++i) {
            dataset.pairs.push_back(synthesize_pair(profile, s, i, length));
        }
    }
    return dataset;
}

Outcome check_determinism(const std::filesystem::path& work) {
    const Dataset dataset = short_dataset(24, 2, 256, 77);
    const SplitAssignment split = split_by_subject(dataset, 0.8, 0.1, 0.1, 0);

    ModelConfig model;
    model.segment_len = 256;
    model.patch_size = 32;
    model.enc_width = 16;
    model.heads = 2;
    model.enc_depth = 1;
    model.dec_width = 8;
    model.dec_depth = 1;
    TrainConfig train;
    train.batch_size = 2;
    train.max_epochs = 3;
    train.early_stop_patience = 10;
    const LossWeights weights;
    const AugmentConfig augment;

    std::string logs[2];
    std::string checkpoints[2];
    for (int run = 0; run < 2; ++run) {
        PretrainOptions options;
        options.log_csv_path = (work / fmt("det_log_%d.csv", run)).string();
        options.best_checkpoint_path = (work / fmt("det_ckpt_%d.bin", run)).string();
        pretrain(dataset, split, model, train, weights, augment, options);
        logs[run] = read_bytes(options.log_csv_path);
        checkpoints[run] = read_bytes(options.best_checkpoint_path);
    }
    if (logs[0].empty() || logs[0] != logs[1])
        return {false, "same-seed training logs differ"};
    if (checkpoints[0].empty() || checkpoints[0] != checkpoints[1])
        return {false, "same-seed checkpoints differ"};

    const std::string data_a = (work / "roundtrip_a.bin").string();
    const std::string data_b = (work / "roundtrip_b.bin").string();
    save_dataset(data_a, dataset);
    save_dataset(data_b, load_dataset(data_a));
    if (read_bytes(data_a) != read_bytes(data_b))
        return {false, "dataset save/load/save is not byte-stable"};

    const std::string ckpt_a = (work / "roundtrip_ckpt_a.bin").string();
    const std::string ckpt_b = (work / "roundtrip_ckpt_b.bin").string();
    save_checkpoint(ckpt_a, init_params(model, 5));
    save_checkpoint(ckpt_b, load_checkpoint(ckpt_a));
    if (read_bytes(ckpt_a) != read_bytes(ckpt_b))
        return {false, "checkpoint save/load/save is not byte-stable"};
    return {true, "logs and checkpoints bit-identical, both formats round-trip bitwise"};
}

}  // namespace

int main() {
    const std::filesystem::path work =
        std::filesystem::temp_directory_path() / "m2ae_acceptance";
    std::filesystem::create_directories(work);

    struct Criterion {
        int id;
        const char* name;
        Outcome outcome;
    };
    std::vector<Criterion> results;
    SmokeContext smoke;

    const auto run = [&](int id, const char* name, auto&& fn) {
        Outcome outcome;
        try {
            outcome = fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("ACCEPTANCE %d %s: %s (%s)\n", id, name, outcome.passed ? "PASS" : "FAIL",
                    outcome.detail.c_str());
        std::fflush(stdout);
        results.push_back({id, name, outcome});
    };

    run(1, "gradient_audit", check_gradient_audit);
    run(2, "complementary_merge_oracle", check_merge_oracle);
    run(3, "four_view_infonce_oracle", check_contrastive_oracle);
    run(4, "masked_loss_locality", check_recon_locality);
    run(5, "overfit_smoke", [&] { return check_overfit_smoke(smoke, work); });
    run(6, "finetune_not_worse_than_frozen", [&] { return check_finetune_direction(smoke); });
    run(7, "heart_rate_probe", [&] { return check_hr_probe(smoke); });
    run(8, "plateau_and_early_stop", check_schedule_contract);
    run(9, "auroc_pairwise_oracle", check_auroc_oracle);
    run(10, "determinism_round_trips", [&] { return check_determinism(work); });

    int failures = 0;
    for (const Criterion& c : results) {
        if (!c.outcome.passed) ++failures;
    }
    std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    std::error_code ec;
    std::filesystem::remove_all(work, ec);
    return failures;
}
