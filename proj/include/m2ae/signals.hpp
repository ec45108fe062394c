#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace m2ae {

// 10 s windows at 204.8 Hz give exactly 2048 samples per segment.
constexpr double kSampleRateHz = 204.8;
constexpr std::size_t kSegmentLen = 2048;

// ECG beat template: three Gaussian bumps at fixed fractions of the beat
// period. PPG pulses are half-sines anchored to the R peak plus the
// subject's pulse delay.
constexpr double kPCenterFrac = 0.15;
constexpr double kQrsCenterFrac = 0.35;
constexpr double kTCenterFrac = 0.60;
constexpr double kPulseWidthFrac = 0.45;  // half-sine width as a fraction of the beat
constexpr std::size_t kPpgSmoothWindow = 5;
// Small beat-locked baseline undulation. Narrow QRS bumps alone leave the
// ECG spectrum almost flat across harmonics; this keeps the fundamental
// dominant so both modalities peak at the heart-rate bin.
constexpr double kEcgBaselineAmp = 0.22;

struct GaussianBump {
    double amplitude = 0.0;
    double width_s = 0.0;  // standard deviation in seconds
};

struct EcgMorphology {
    GaussianBump p;
    GaussianBump qrs;
    GaussianBump t;
};

struct SubjectProfile {
    double heart_rate_bpm = 0.0;  // [50, 110]
    EcgMorphology ecg_morphology;
    double ppg_delay_s = 0.0;     // [0.15, 0.35], R peak to pulse onset
    double noise_std = 0.0;       // additive white noise, pre z-score units
};

// Fields left unset are drawn uniformly from their documented ranges.
struct ProfileOverrides {
    std::optional<double> heart_rate_bpm;
    std::optional<double> ppg_delay_s;
    std::optional<double> noise_std;
    std::optional<EcgMorphology> ecg_morphology;
};

SubjectProfile generate_subject(std::uint64_t seed, const ProfileOverrides& overrides = {});

struct PairedSegment {
    std::uint32_t subject_id = 0;
    std::uint32_t segment_index = 0;
    std::vector<double> ecg;  // z-scored, length L
    std::vector<double> ppg;
};

// Deterministic in (profile, subject_id, segment_index). Consecutive
// segment indices behave like consecutive windows of one recording: the
// beat phase advances across segments.
PairedSegment synthesize_pair(const SubjectProfile& profile, std::uint32_t subject_id,
                              std::uint32_t segment_index, std::size_t length = kSegmentLen,
                              double fs = kSampleRateHz);

// Population statistics; rejects inputs with standard deviation < 1e-12.
std::vector<double> zscore(const std::vector<double>& samples);

// Linear interpolation onto target_len points spanning the input's span.
std::vector<double> resample(const std::vector<double>& samples, std::size_t target_len);

struct Dataset {
    std::size_t segment_len = kSegmentLen;
    std::vector<PairedSegment> pairs;
};

Dataset generate_dataset(std::uint32_t n_subjects, std::uint32_t pairs_per_subject,
                         std::uint64_t seed, const ProfileOverrides& overrides = {},
                         std::uint32_t subject_id_offset = 0);

enum class Split { Train, Valid, Test };

using SplitAssignment = std::map<std::uint32_t, Split>;

// Subject-level split: every pair of one subject lands in the same split.
// Fractions must sum to 1; throws if any split would be empty.
SplitAssignment split_by_subject(const Dataset& dataset, double train_frac, double valid_frac,
                                 double test_frac, std::uint64_t seed);

std::vector<const PairedSegment*> pairs_in_split(const Dataset& dataset,
                                                 const SplitAssignment& assignment, Split split);

void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace m2ae
