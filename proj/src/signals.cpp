#include "m2ae/signals.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>

#include "m2ae/errors.hpp"
#include "m2ae/io_util.hpp"
#include "m2ae/rng.hpp"

namespace m2ae {

namespace {

constexpr char kDatasetMagic[4] = {'M', '2', 'A', 'E'};
constexpr std::uint16_t kDatasetVersion = 1;

std::uint64_t fold_double(std::uint64_t seed, double v) {
    return mix_seed(seed, std::bit_cast<std::uint64_t>(v));
}

std::uint64_t profile_digest(const SubjectProfile& p) {
    std::uint64_t h = 0x6d326165ull;
    h = fold_double(h, p.heart_rate_bpm);
    h = fold_double(h, p.ppg_delay_s);
    h = fold_double(h, p.noise_std);
    for (const GaussianBump* b : {&p.ecg_morphology.p, &p.ecg_morphology.qrs, &p.ecg_morphology.t}) {
        h = fold_double(h, b->amplitude);
        h = fold_double(h, b->width_s);
    }
    return h;
}

void check_profile(const SubjectProfile& p) {
    if (!(p.heart_rate_bpm > 0.0)) throw DataError("degenerate profile: non-positive heart rate");
    if (p.noise_std < 0.0) throw DataError("degenerate profile: negative noise std");
    if (p.ppg_delay_s < 0.0) throw DataError("degenerate profile: negative pulse delay");
    for (const GaussianBump* b : {&p.ecg_morphology.p, &p.ecg_morphology.qrs, &p.ecg_morphology.t}) {
        if (!(b->width_s > 0.0)) throw DataError("degenerate profile: non-positive bump width");
    }
}

}  // namespace

SubjectProfile generate_subject(std::uint64_t seed, const ProfileOverrides& overrides) {
    Rng rng(mix_seed(0x53424a45ull, seed));
    SubjectProfile p;
    // Every field is drawn even when overridden so fixing one field does
    // not shift the stream feeding the others.
    double hr = rng.uniform(50.0, 110.0);
    double delay = rng.uniform(0.15, 0.35);
    double noise = rng.uniform(0.01, 0.05);
    EcgMorphology m;
    m.p = {rng.uniform(0.10, 0.20), rng.uniform(0.030, 0.050)};
    m.qrs = {rng.uniform(0.90, 1.20), rng.uniform(0.015, 0.030)};
    m.t = {rng.uniform(0.25, 0.45), rng.uniform(0.060, 0.090)};

    p.heart_rate_bpm = overrides.heart_rate_bpm.value_or(hr);
    p.ppg_delay_s = overrides.ppg_delay_s.value_or(delay);
    p.noise_std = overrides.noise_std.value_or(noise);
    p.ecg_morphology = overrides.ecg_morphology.value_or(m);
    check_profile(p);
    return p;
}

PairedSegment synthesize_pair(const SubjectProfile& profile, std::uint32_t subject_id,
                              std::uint32_t segment_index, std::size_t length, double fs) {
    check_profile(profile);
    if (length == 0 || fs <= 0.0) throw DataError("degenerate segment request");

    double beat_period = 60.0 / profile.heart_rate_bpm;
    double duration = static_cast<double>(length) / fs;
    // Segments of one subject behave like consecutive windows of a single
    // recording, so the beat phase advances with the segment index.
    double phase0 = std::fmod(static_cast<double>(segment_index) * duration, beat_period);

    const GaussianBump* bumps[3] = {&profile.ecg_morphology.p, &profile.ecg_morphology.qrs,
                                    &profile.ecg_morphology.t};
    const double fracs[3] = {kPCenterFrac, kQrsCenterFrac, kTCenterFrac};

    std::vector<double> ecg(length, 0.0);
    for (std::size_t i = 0; i < length; ++i) {
        double t = static_cast<double>(i) / fs + phase0;
        double k0 = std::floor(t / beat_period);
        double v = 0.0;
        for (int dk = -1; dk <= 1; ++dk) {
            double beat_start = (k0 + dk) * beat_period;
            for (int b = 0; b < 3; ++b) {
                double center = beat_start + fracs[b] * beat_period;
                double d = (t - center) / bumps[b]->width_s;
                v += bumps[b]->amplitude * std::exp(-0.5 * d * d);
            }
        }
        v += kEcgBaselineAmp * std::sin(2.0 * 3.14159265358979323846 * t / beat_period);
        ecg[i] = v;
    }

    double pulse_width = kPulseWidthFrac * beat_period;
    std::vector<double> ppg_raw(length, 0.0);
    for (std::size_t i = 0; i < length; ++i) {
        double t = static_cast<double>(i) / fs + phase0;
        // Pulse k starts at the R peak of beat k plus the subject's delay.
        double k0 = std::floor((t - profile.ppg_delay_s) / beat_period - kQrsCenterFrac);
        double v = 0.0;
        for (int dk = -1; dk <= 1; ++dk) {
            double onset = ((k0 + dk) + kQrsCenterFrac) * beat_period + profile.ppg_delay_s;
            double rel = t - onset;
            if (rel >= 0.0 && rel <= pulse_width) v += std::sin(3.14159265358979323846 * rel / pulse_width);
        }
        ppg_raw[i] = v;
    }

    // Centered moving-average smoothing stands in for a low-pass filter.
    std::vector<double> ppg(length, 0.0);
    int half = static_cast<int>(kPpgSmoothWindow) / 2;
    for (std::size_t i = 0; i < length; ++i) {
        double acc = 0.0;
        int count = 0;
        for (int o = -half; o <= half; ++o) {
            long long j = static_cast<long long>(i) + o;
            if (j < 0 || j >= static_cast<long long>(length)) continue;
            acc += ppg_raw[static_cast<std::size_t>(j)];
            ++count;
        }
        ppg[i] = acc / static_cast<double>(count);
    }

    if (profile.noise_std > 0.0) {
        Rng noise_rng(mix_seed(profile_digest(profile), subject_id, segment_index));
        for (std::size_t i = 0; i < length; ++i) ecg[i] += noise_rng.normal(0.0, profile.noise_std);
        for (std::size_t i = 0; i < length; ++i) ppg[i] += noise_rng.normal(0.0, profile.noise_std);
    }

    PairedSegment pair;
    pair.subject_id = subject_id;
    pair.segment_index = segment_index;
    pair.ecg = zscore(ecg);
    pair.ppg = zscore(ppg);
    return pair;
}

std::vector<double> zscore(const std::vector<double>& samples) {
    if (samples.empty()) throw DataError("zscore: empty input");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double v : samples) {
        double d = v - mean;
        var += d * d;
    }
    var /= static_cast<double>(samples.size());
    double std_dev = std::sqrt(var);
    if (std_dev < 1e-12) throw DataError("zscore: degenerate input with near-zero variance");
    std::vector<double> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = (samples[i] - mean) / std_dev;
    return out;
}

std::vector<double> resample(const std::vector<double>& samples, std::size_t target_len) {
    if (samples.empty() || target_len == 0) throw DataError("resample: empty input or target");
    if (samples.size() == 1) return std::vector<double>(target_len, samples[0]);
    if (target_len == 1) return {samples.front()};
    std::vector<double> out(target_len);
    double scale = static_cast<double>(samples.size() - 1) / static_cast<double>(target_len - 1);
    for (std::size_t i = 0; i < target_len; ++i) {
        double pos = static_cast<double>(i) * scale;
        std::size_t lo = static_cast<std::size_t>(pos);
        if (lo >= samples.size() - 1) {
            out[i] = samples.back();
            continue;
        }
        double frac = pos - static_cast<double>(lo);
        out[i] = samples[lo] * (1.0 - frac) + samples[lo + 1] * frac;
    }
    return out;
}

Dataset generate_dataset(std::uint32_t n_subjects, std::uint32_t pairs_per_subject,
                         std::uint64_t seed, const ProfileOverrides& overrides,
                         std::uint32_t subject_id_offset) {
    if (n_subjects == 0 || pairs_per_subject == 0) {
        throw DataError("generate_dataset: need at least one subject and one pair");
    }
    Dataset ds;
    ds.pairs.reserve(static_cast<std::size_t>(n_subjects) * pairs_per_subject);
    for (std::uint32_t s = 0; s < n_subjects; ++s) {
        std::uint32_t subject_id = subject_id_offset + s;
        SubjectProfile profile = generate_subject(mix_seed(seed, subject_id), overrides);
        for (std::uint32_t i = 0; i < pairs_per_subject; ++i) {
            ds.pairs.push_back(synthesize_pair(profile, subject_id, i));
        }
    }
    return ds;
}

SplitAssignment split_by_subject(const Dataset& dataset, double train_frac, double valid_frac,
                                 double test_frac, std::uint64_t seed) {
    if (std::fabs(train_frac + valid_frac + test_frac - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
    if (train_frac <= 0.0 || valid_frac <= 0.0 || test_frac <= 0.0) {
        throw ConfigError("split fractions must be positive");
    }
    std::set<std::uint32_t> distinct;
    for (const PairedSegment& p : dataset.pairs) distinct.insert(p.subject_id);
    std::vector<std::uint32_t> order(distinct.begin(), distinct.end());
    Rng rng(mix_seed(0x5b17ull, seed));
    rng.shuffle(order);

    std::size_t n = order.size();
    std::size_t c1 = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    std::size_t c2 = static_cast<std::size_t>(std::llround((train_frac + valid_frac) * static_cast<double>(n)));
    c1 = std::min(c1, n);
    c2 = std::min(std::max(c2, c1), n);
    if (c1 == 0 || c2 == c1 || c2 == n) {
        throw DataError("too few subjects for a " + std::to_string(train_frac) + "/" +
                        std::to_string(valid_frac) + "/" + std::to_string(test_frac) + " split");
    }
    SplitAssignment out;
    for (std::size_t i = 0; i < n; ++i) {
        out[order[i]] = i < c1 ? Split::Train : (i < c2 ? Split::Valid : Split::Test);
    }
    return out;
}

std::vector<const PairedSegment*> pairs_in_split(const Dataset& dataset,
                                                 const SplitAssignment& assignment, Split split) {
    std::vector<const PairedSegment*> out;
    for (const PairedSegment& p : dataset.pairs) {
        auto it = assignment.find(p.subject_id);
        if (it != assignment.end() && it->second == split) out.push_back(&p);
    }
    return out;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    for (const PairedSegment& p : dataset.pairs) {
        if (p.ecg.size() != dataset.segment_len || p.ppg.size() != dataset.segment_len) {
            throw DataError("save_dataset: segment length mismatch for subject " +
                            std::to_string(p.subject_id));
        }
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_dataset: cannot open '" + path + "' for writing");
    os.write(kDatasetMagic, 4);
    write_u16(os, kDatasetVersion);
    write_u32(os, static_cast<std::uint32_t>(dataset.segment_len));
    write_u32(os, static_cast<std::uint32_t>(dataset.pairs.size()));
    for (const PairedSegment& p : dataset.pairs) {
        write_u32(os, p.subject_id);
        write_u32(os, p.segment_index);
        for (double v : p.ecg) write_f32(os, static_cast<float>(v));
        for (double v : p.ppg) write_f32(os, static_cast<float>(v));
    }
    if (!os) throw IoError("save_dataset: write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_dataset: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || !std::equal(magic, magic + 4, kDatasetMagic)) {
        throw IoError("load_dataset: bad magic in '" + path + "'");
    }
    std::uint16_t version = read_u16(is, "version");
    if (version != kDatasetVersion) {
        throw IoError("load_dataset: unsupported version " + std::to_string(version));
    }
    Dataset ds;
    ds.segment_len = read_u32(is, "segment length");
    std::uint32_t count = read_u32(is, "pair count");
    ds.pairs.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        PairedSegment& p = ds.pairs[i];
        p.subject_id = read_u32(is, "subject id");
        p.segment_index = read_u32(is, "segment index");
        p.ecg.resize(ds.segment_len);
        p.ppg.resize(ds.segment_len);
        for (double& v : p.ecg) v = static_cast<double>(read_f32(is, "ecg sample"));
        for (double& v : p.ppg) v = static_cast<double>(read_f32(is, "ppg sample"));
    }
    return ds;
}

}  // namespace m2ae
