#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include <doctest.h>
#include "m2ae/augment.hpp"
#include "m2ae/errors.hpp"
#include "m2ae/rng.hpp"
#include "m2ae/signals.hpp"

using namespace m2ae;

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

Dataset tiny_dataset(std::uint32_t n_subjects, std::uint32_t pairs_per_subject) {
    return generate_dataset(n_subjects, pairs_per_subject, 77);
}

}  // namespace

TEST_CASE("augmented signal keeps length and is z-scored") {
    SubjectProfile prof = generate_subject(11);
    PairedSegment pair = synthesize_pair(prof, 0, 0, 512);
    AugmentConfig cfg;
    cfg.seed = 42;
    std::vector<double> out = augment_signal(pair.ecg, cfg);
    REQUIRE(out.size() == pair.ecg.size());
    CHECK(std::abs(mean_of(out)) <= 1e-6);
    CHECK(std::abs(std_of(out) - 1.0) <= 1e-6);
}

TEST_CASE("warp curve is normalized to [0,1] and bounds displacement") {
    Rng rng(5);
    std::vector<double> curve = warp_curve(257, 0.2, rng);
    REQUIRE(curve.size() == 257);
    double lo = *std::min_element(curve.begin(), curve.end());
    double hi = *std::max_element(curve.begin(), curve.end());
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
    for (double v : curve) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("augmentation is deterministic in signal and config") {
    SubjectProfile prof = generate_subject(3);
    PairedSegment pair = synthesize_pair(prof, 0, 1, 256);
    AugmentConfig cfg;
    cfg.seed = 9001;
    std::vector<double> a = augment_signal(pair.ppg, cfg);
    std::vector<double> b = augment_signal(pair.ppg, cfg);
    CHECK(a == b);
    cfg.seed = 9002;
    std::vector<double> c = augment_signal(pair.ppg, cfg);
    CHECK(a != c);
}

TEST_CASE("invalid augment configs are rejected") {
    std::vector<double> sig(64, 0.0);
    for (std::size_t i = 0; i < sig.size(); ++i) sig[i] = std::sin(0.3 * static_cast<double>(i));
    AugmentConfig bad_warp;
    bad_warp.warp_step_std = 0.0;
    CHECK_THROWS_AS(augment_signal(sig, bad_warp), ConfigError);
    AugmentConfig bad_noise;
    bad_noise.noise_std = -0.01;
    CHECK_THROWS_AS(augment_signal(sig, bad_noise), ConfigError);
    AugmentConfig ok;
    CHECK_THROWS_AS(augment_signal(std::vector<double>{}, ok), DataError);
}

TEST_CASE("constant signal with zero noise fails the z-score step") {
    std::vector<double> flat(128, 2.5);
    AugmentConfig cfg;
    cfg.noise_std = 0.0;
    CHECK_THROWS_AS(augment_signal(flat, cfg), DataError);
    cfg.noise_std = 0.05;
    CHECK_NOTHROW(augment_signal(flat, cfg));
}

TEST_CASE("view selection covers single, double, and many-segment subjects") {
    CHECK(select_view_indices({7}, 7, 1) == std::pair<std::uint32_t, std::uint32_t>(7, 7));

    auto two = select_view_indices({5, 9}, 5, 123);
    std::set<std::uint32_t> two_set{two.first, two.second};
    CHECK(two_set == std::set<std::uint32_t>{5, 9});

    std::vector<std::uint32_t> many;
    for (std::uint32_t i = 0; i < 10; ++i) many.push_back(i * 2);
    auto p1 = select_view_indices(many, 6, 55);
    auto p2 = select_view_indices(many, 6, 55);
    CHECK(p1 == p2);
    CHECK(p1.first != p1.second);
    CHECK(std::count(many.begin(), many.end(), p1.first) == 1);
    CHECK(std::count(many.begin(), many.end(), p1.second) == 1);

    CHECK_THROWS_AS(select_view_indices({1, 2, 3}, 4, 0), DataError);
}

TEST_CASE("single-segment subjects get two synthesized views") {
    Dataset ds = tiny_dataset(3, 1);
    const PairedSegment& anchor = ds.pairs[1];
    AugmentConfig cfg;
    cfg.seed = 17;
    auto [ecg_view, ppg_view] = make_views(anchor, ds, cfg);
    REQUIRE(ecg_view.size() == anchor.ecg.size());
    REQUIRE(ppg_view.size() == anchor.ppg.size());
    CHECK(ecg_view != anchor.ecg);
    CHECK(ppg_view != anchor.ppg);
    CHECK(std::abs(mean_of(ecg_view)) <= 1e-6);
    CHECK(std::abs(std_of(ppg_view) - 1.0) <= 1e-6);
}

TEST_CASE("multi-segment subjects get raw same-subject segments as views") {
    Dataset ds = tiny_dataset(4, 5);
    AugmentConfig cfg;
    cfg.seed = 23;
    for (std::uint32_t a = 0; a < 8; ++a) {
        const PairedSegment& anchor = ds.pairs[a];
        auto [ecg_view, ppg_view] = make_views(anchor, ds, cfg);
        bool ecg_found = false, ppg_found = false;
        for (const PairedSegment& p : ds.pairs) {
            if (p.ecg == ecg_view) {
                CHECK(p.subject_id == anchor.subject_id);
                ecg_found = true;
            }
            if (p.ppg == ppg_view) {
                CHECK(p.subject_id == anchor.subject_id);
                ppg_found = true;
            }
        }
        CHECK(ecg_found);
        CHECK(ppg_found);
    }
}

TEST_CASE("coinciding non-anchor picks synthesize exactly one modality") {
    Dataset ds = tiny_dataset(2, 3);
    const PairedSegment& anchor = ds.pairs[0];
    std::uint32_t other = ds.pairs[1].segment_index;
    REQUIRE(other != anchor.segment_index);
    const PairedSegment& alt = ds.pairs[1];

    int ecg_synth_count = 0, ppg_synth_count = 0;
    for (std::uint64_t seed = 0; seed < 32; ++seed) {
        AugmentConfig cfg;
        cfg.seed = seed;
        auto [ecg_view, ppg_view] = make_views_from_indices(anchor, ds, other, other, cfg);
        bool ecg_raw = (ecg_view == alt.ecg);
        bool ppg_raw = (ppg_view == alt.ppg);
        CHECK(ecg_raw != ppg_raw);
        if (!ecg_raw) ++ecg_synth_count;
        if (!ppg_raw) ++ppg_synth_count;
    }
    CHECK(ecg_synth_count > 0);
    CHECK(ppg_synth_count > 0);
}

TEST_CASE("both-anchor picks synthesize both modalities from the anchor") {
    Dataset ds = tiny_dataset(2, 2);
    const PairedSegment& anchor = ds.pairs[0];
    AugmentConfig cfg;
    cfg.seed = 3;
    auto [ecg_view, ppg_view] =
        make_views_from_indices(anchor, ds, anchor.segment_index, anchor.segment_index, cfg);
    CHECK(ecg_view != anchor.ecg);
    CHECK(ppg_view != anchor.ppg);
    CHECK(std::abs(std_of(ecg_view) - 1.0) <= 1e-6);
    CHECK(std::abs(std_of(ppg_view) - 1.0) <= 1e-6);
}
