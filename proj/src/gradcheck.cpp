#include "m2ae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "m2ae/augment.hpp"
#include "m2ae/errors.hpp"
#include "m2ae/rng.hpp"
#include "m2ae/signals.hpp"

namespace m2ae {

namespace {

constexpr std::uint64_t kSubjectTag = 0x677375626a;
constexpr std::uint64_t kAugmentTag = 0x67617567;
constexpr std::uint64_t kPlanTag = 0x67706c6e;
constexpr std::uint64_t kDropTag = 0x6764726f;
constexpr std::uint64_t kCoordTag = 0x67636f72;

std::vector<std::size_t> sample_coords(std::size_t block_size, std::size_t wanted,
                                       std::uint64_t seed) {
    std::vector<std::size_t> all(block_size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (wanted >= block_size) return all;
    Rng rng(seed);
    rng.shuffle(all);
    all.resize(wanted);
    std::sort(all.begin(), all.end());
    return all;
}

struct LossGraph {
    Graph graph;
    NodeId root = 0;
    Bindings bindings;
    std::map<std::string, Array> grads;

    LossGraph(GraphOptions options, const TrainBatch& batch, const MaskPlan& plan,
              const LossWeights& weights, TrainMode mode, const ModelParams& params)
        : graph(options) {
        root = build_training_loss(graph, batch, plan, weights, mode, params.config);
        bindings = training_bindings(params, batch, mode);
        std::set<std::string> wrt;
        for (const auto& [name, value] : params.values) {
            if (graph.has_leaf(name)) wrt.insert(name);
        }
        grads = graph.gradients(root, bindings, wrt);
    }
};

}  // namespace

void GradCheckConfig::validate() const {
    model.validate();
    if (batch < 2) throw ConfigError("gradient audit needs a batch of at least 2");
    if (coords_per_block == 0) throw ConfigError("coords_per_block must be positive");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
    if (!(skip_threshold >= 0.0)) throw ConfigError("skip_threshold must be non-negative");
    if (!(fd_step > 0.0)) throw ConfigError("fd_step must be positive");
    weights.validate();
}

GradCheckConfig default_gradcheck_config() {
    GradCheckConfig config;
    config.model.segment_len = 512;
    config.model.patch_size = 64;
    config.model.enc_width = 64;
    config.model.enc_depth = 2;
    config.model.dec_width = 32;
    config.model.dec_depth = 1;
    config.model.heads = 4;
    config.model.dropout = 0.1;
    return config;
}

std::string GradCheckReport::to_text() const {
    std::ostringstream out;
    char line[256];
    for (const BlockCheck& block : blocks) {
        std::snprintf(line, sizeof(line), "%-4s %-32s coords=%-5zu max_rel=%.3e max_abs=%.3e\n",
                      block.passed ? "ok" : "FAIL", block.name.c_str(), block.coords,
                      block.max_rel_error, block.max_abs_error);
        out << line;
    }
    if (passed) {
        std::snprintf(line, sizeof(line), "gradient audit: PASS (worst %.3e in %s)\n",
                      worst_rel_error, worst_block.c_str());
    } else {
        std::snprintf(line, sizeof(line), "gradient audit: FAIL (worst %.3e in %s)\n",
                      worst_rel_error, worst_block.c_str());
    }
    out << line;
    return out.str();
}

GradCheckReport run_gradcheck(const GradCheckConfig& config) {
    config.validate();
    const ModelConfig& mc = config.model;
    ModelParams params = init_params(mc, config.seed);

    TrainBatch batch;
    for (std::size_t b = 0; b < config.batch; ++b) {
        SubjectProfile profile = generate_subject(mix_seed(config.seed, kSubjectTag, b));
        PairedSegment pair = synthesize_pair(profile, static_cast<std::uint32_t>(b), 0,
                                             mc.segment_len, kSampleRateHz);
        batch.ecg.push_back(patchify(pair.ecg, mc.patch_size));
        batch.ppg.push_back(patchify(pair.ppg, mc.patch_size));
        AugmentConfig ecg_aug;
        ecg_aug.seed = mix_seed(config.seed, kAugmentTag, 2 * b);
        AugmentConfig ppg_aug;
        ppg_aug.seed = mix_seed(config.seed, kAugmentTag, 2 * b + 1);
        batch.ecg_aug.push_back(patchify(augment_signal(pair.ecg, ecg_aug), mc.patch_size));
        batch.ppg_aug.push_back(patchify(augment_signal(pair.ppg, ppg_aug), mc.patch_size));
    }
    MaskPlan plan =
        sample_mask_plan(mc.patches(), config.mask_ratio, mix_seed(config.seed, kPlanTag));

    LossGraph cross(GraphOptions{true, mix_seed(config.seed, kDropTag, 0)}, batch, plan,
                    config.weights, TrainMode::CrossModal, params);

    TrainBatch ecg_only;
    ecg_only.ecg = batch.ecg;
    LossGraph ecg_single(GraphOptions{true, mix_seed(config.seed, kDropTag, 1)}, ecg_only, plan,
                         config.weights, TrainMode::SingleModalEcg, params);

    TrainBatch ppg_only;
    ppg_only.ppg = batch.ppg;
    LossGraph ppg_single(GraphOptions{true, mix_seed(config.seed, kDropTag, 2)}, ppg_only, plan,
                         config.weights, TrainMode::SingleModalPpg, params);

    GradCheckReport report;
    const std::vector<ParamSpec> layout = param_layout(mc);
    if (!config.corrupt_block.empty()) {
        const bool known = std::any_of(layout.begin(), layout.end(), [&](const ParamSpec& s) {
            return s.name == config.corrupt_block;
        });
        if (!known) throw ConfigError("corrupt block is not a parameter block: " +
                                      config.corrupt_block);
    }
    for (std::size_t bi = 0; bi < layout.size(); ++bi) {
        const ParamSpec& spec = layout[bi];
        LossGraph* source = &cross;
        if (!cross.graph.has_leaf(spec.name)) {
            source = spec.name.rfind("ecg.", 0) == 0 ? &ecg_single : &ppg_single;
        }
        if (!source->graph.has_leaf(spec.name)) {
            throw ConfigError("no objective reaches parameter block " + spec.name);
        }

        const Array& analytic = source->grads.at(spec.name);
        std::vector<std::size_t> coords = sample_coords(analytic.size(), config.coords_per_block,
                                                        mix_seed(config.seed, kCoordTag, bi));
        std::vector<double> fd = source->graph.finite_difference_coords(
            source->root, source->bindings, spec.name, coords, config.fd_step);

        BlockCheck check;
        check.name = spec.name;
        check.coords = coords.size();
        for (std::size_t i = 0; i < coords.size(); ++i) {
            double a = analytic.values()[coords[i]];
            if (spec.name == config.corrupt_block) a = a * 1.01 + 1e-3;
            const double f = fd[i];
            const double abs_err = std::abs(a - f);
            check.max_abs_error = std::max(check.max_abs_error, abs_err);
            if (abs_err <= config.noise_floor) {
                continue;
            }
            if (std::abs(a) <= config.skip_threshold && std::abs(f) <= config.skip_threshold) {
                continue;
            }
            const double rel = abs_err / std::max(std::abs(a), std::abs(f));
            check.max_rel_error = std::max(check.max_rel_error, rel);
        }
        check.passed = check.max_rel_error <= config.tolerance;
        if (check.max_rel_error >= report.worst_rel_error) {
            report.worst_rel_error = check.max_rel_error;
            report.worst_block = check.name;
        }
        report.passed = report.passed && check.passed;
        report.blocks.push_back(std::move(check));
    }
    return report;
}

}  // namespace m2ae
