#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "m2ae/rng.hpp"
#include "m2ae/signals.hpp"

namespace m2ae {

struct AugmentConfig {
    double warp_step_std = 0.2;
    double noise_std = 0.05;
    std::uint64_t seed = 0;
};

// Cumulative sum of N(0, step_std) draws, min-max normalized to [0, 1].
// Consumes exactly `length` normal draws from `rng`.
std::vector<double> warp_curve(std::size_t length, double step_std, Rng& rng);

// White noise, then time warping by linear interpolation at jittered
// timestamps, then z-score. Deterministic in (samples, config).
std::vector<double> augment_signal(const std::vector<double>& samples, const AugmentConfig& config);

// Picks the segments serving as augmented views for one anchor.
// Subjects with at least two segments yield two distinct uniform picks
// (either may be the anchor); single-segment subjects yield
// (anchor_id, anchor_id), signalling that synthesis is required.
std::pair<std::uint32_t, std::uint32_t> select_view_indices(
    const std::vector<std::uint32_t>& subject_segments, std::uint32_t anchor_id,
    std::uint64_t seed);

// Core view-building rules given already-selected segment ids:
// both ids equal to the anchor means both modalities are synthesized from
// the anchor; ids equal to each other but not the anchor means exactly one
// modality (fair coin) is synthesized from that segment; otherwise both
// views are plain copies of the selected segments.
std::pair<std::vector<double>, std::vector<double>> make_views_from_indices(
    const PairedSegment& pair, const Dataset& dataset, std::uint32_t ecg_segment,
    std::uint32_t ppg_segment, const AugmentConfig& config);

// Augmented (ecg, ppg) views for one anchor pair: same-subject alternates
// when available, synthesized fallbacks otherwise.
std::pair<std::vector<double>, std::vector<double>> make_views(
    const PairedSegment& pair, const Dataset& dataset, const AugmentConfig& config);

}  // namespace m2ae
