#include "m2ae/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "m2ae/errors.hpp"

namespace m2ae {

namespace {

void check_config(const AugmentConfig& config) {
    if (!(config.warp_step_std > 0.0)) throw ConfigError("warp_step_std must be positive");
    if (!(config.noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
}

const PairedSegment& find_segment(const Dataset& dataset, std::uint32_t subject_id,
                                  std::uint32_t segment_index) {
    for (const PairedSegment& p : dataset.pairs) {
        if (p.subject_id == subject_id && p.segment_index == segment_index) return p;
    }
    throw DataError("segment not found in dataset");
}

}  // namespace

std::vector<double> warp_curve(std::size_t length, double step_std, Rng& rng) {
    std::vector<double> curve(length);
    double acc = 0.0;
    for (std::size_t i = 0; i < length; ++i) {
        acc += rng.normal(0.0, step_std);
        curve[i] = acc;
    }
    if (length == 0) return curve;
    auto [lo_it, hi_it] = std::minmax_element(curve.begin(), curve.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi - lo <= 0.0) {
        std::fill(curve.begin(), curve.end(), 0.0);
        return curve;
    }
    for (double& v : curve) v = (v - lo) / (hi - lo);
    return curve;
}

std::vector<double> augment_signal(const std::vector<double>& samples,
                                   const AugmentConfig& config) {
    check_config(config);
    if (samples.empty()) throw DataError("cannot augment an empty signal");
    const std::size_t n = samples.size();

    Rng rng(config.seed);
    std::vector<double> curve = warp_curve(n, config.warp_step_std, rng);

    std::vector<double> noisy(samples);
    if (config.noise_std > 0.0) {
        for (double& v : noisy) v += rng.normal(0.0, config.noise_std);
    }

    std::vector<double> warped(n);
    const double max_t = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        double t = std::clamp(static_cast<double>(i) + curve[i], 0.0, max_t);
        std::size_t i0 = static_cast<std::size_t>(t);
        std::size_t i1 = std::min(i0 + 1, n - 1);
        double frac = t - static_cast<double>(i0);
        warped[i] = noisy[i0] * (1.0 - frac) + noisy[i1] * frac;
    }
    return zscore(warped);
}

std::pair<std::uint32_t, std::uint32_t> select_view_indices(
    const std::vector<std::uint32_t>& subject_segments, std::uint32_t anchor_id,
    std::uint64_t seed) {
    if (std::find(subject_segments.begin(), subject_segments.end(), anchor_id) ==
        subject_segments.end()) {
        throw DataError("anchor segment not among the subject's segments");
    }
    const std::size_t n = subject_segments.size();
    if (n < 2) return {anchor_id, anchor_id};
    Rng rng(seed);
    std::size_t a = rng.uniform_index(n);
    std::size_t b = rng.uniform_index(n - 1);
    if (b >= a) ++b;
    return {subject_segments[a], subject_segments[b]};
}

std::pair<std::vector<double>, std::vector<double>> make_views_from_indices(
    const PairedSegment& pair, const Dataset& dataset, std::uint32_t ecg_segment,
    std::uint32_t ppg_segment, const AugmentConfig& config) {
    check_config(config);
    std::uint64_t base = mix_seed(config.seed, pair.subject_id, pair.segment_index);

    std::vector<double> ecg_view = find_segment(dataset, pair.subject_id, ecg_segment).ecg;
    std::vector<double> ppg_view = find_segment(dataset, pair.subject_id, ppg_segment).ppg;

    AugmentConfig ecg_cfg = config;
    ecg_cfg.seed = mix_seed(base, 3);
    AugmentConfig ppg_cfg = config;
    ppg_cfg.seed = mix_seed(base, 4);

    if (ecg_segment == pair.segment_index && ppg_segment == pair.segment_index) {
        ecg_view = augment_signal(ecg_view, ecg_cfg);
        ppg_view = augment_signal(ppg_view, ppg_cfg);
    } else if (ecg_segment == ppg_segment) {
        Rng coin(mix_seed(base, 2));
        if (coin.uniform01() < 0.5) {
            ecg_view = augment_signal(ecg_view, ecg_cfg);
        } else {
            ppg_view = augment_signal(ppg_view, ppg_cfg);
        }
    }
    return {std::move(ecg_view), std::move(ppg_view)};
}

std::pair<std::vector<double>, std::vector<double>> make_views(const PairedSegment& pair,
                                                               const Dataset& dataset,
                                                               const AugmentConfig& config) {
    check_config(config);
    std::vector<std::uint32_t> segments;
    for (const PairedSegment& p : dataset.pairs) {
        if (p.subject_id == pair.subject_id) segments.push_back(p.segment_index);
    }
    std::sort(segments.begin(), segments.end());
    std::uint64_t base = mix_seed(config.seed, pair.subject_id, pair.segment_index);
    auto [ecg_segment, ppg_segment] =
        select_view_indices(segments, pair.segment_index, mix_seed(base, 1));
    return make_views_from_indices(pair, dataset, ecg_segment, ppg_segment, config);
}

}  // namespace m2ae
