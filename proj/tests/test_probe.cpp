#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <vector>

#include "m2ae/errors.hpp"
#include "m2ae/graph.hpp"
#include "m2ae/probe.hpp"
#include "m2ae/rng.hpp"
#include "m2ae/signals.hpp"

using namespace m2ae;

namespace {

ModelConfig tiny_model() {
    ModelConfig mc;
    mc.segment_len = 128;
    mc.patch_size = 8;
    mc.enc_width = 16;
    mc.enc_depth = 1;
    mc.dec_width = 8;
    mc.dec_depth = 1;
    mc.heads = 2;
    mc.dropout = 0.1;
    return mc;
}

Dataset tiny_dataset(std::uint32_t n_subjects, std::uint32_t pairs_each, std::size_t len) {
    Dataset d;
    d.segment_len = len;
    for (std::uint32_t s = 0; s < n_subjects; ++s) {
        const SubjectProfile profile = generate_subject(mix_seed(7, s));
        for (std::uint32_t i = 0; i < pairs_each; ++i)
            d.pairs.push_back(synthesize_pair(profile, s, i, len, kSampleRateHz));
    }
    return d;
}

FingerprintSet gaussian_fingerprints(std::size_t n_subjects, std::size_t per_subject,
                                     std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    FingerprintSet set;
    set.dim = dim;
    for (std::size_t s = 0; s < n_subjects; ++s) {
        for (std::size_t i = 0; i < per_subject; ++i) {
            FingerprintRow row;
            row.subject_id = static_cast<std::uint32_t>(s);
            row.segment_index = static_cast<std::uint32_t>(i);
            row.source = FingerprintSource::Ecg;
            for (std::size_t j = 0; j < dim; ++j) row.values.push_back(rng.normal());
            set.rows.push_back(std::move(row));
        }
    }
    return set;
}

double max_param_delta(const ModelParams& a, const ModelParams& b, const std::string& name) {
    const Array& x = a.values.at(name);
    const Array& y = b.values.at(name);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        m = std::max(m, std::abs(x.data()[i] - y.data()[i]));
    return m;
}

}  // namespace

TEST_CASE("fingerprint source names round-trip") {
    for (auto s : {FingerprintSource::Ecg, FingerprintSource::Ppg, FingerprintSource::Paired})
        CHECK(parse_fingerprint_source(fingerprint_source_name(s)) == s);
    CHECK_THROWS_AS(parse_fingerprint_source("merged"), ConfigError);
}

TEST_CASE("fingerprint set validation catches structural problems") {
    FingerprintSet set;
    set.dim = 2;
    set.rows.push_back({1, 0, FingerprintSource::Ecg, {0.5, 1.0}});
    set.rows.push_back({1, 0, FingerprintSource::Ppg, {0.5, 1.0}});
    CHECK_NOTHROW(set.validate());

    FingerprintSet ragged = set;
    ragged.rows[0].values.pop_back();
    CHECK_THROWS_AS(ragged.validate(), ShapeError);

    FingerprintSet dup = set;
    dup.rows[1].source = FingerprintSource::Ecg;
    CHECK_THROWS_AS(dup.validate(), DataError);

    FingerprintSet zero;
    zero.dim = 0;
    CHECK_THROWS_AS(zero.validate(), ShapeError);
}

TEST_CASE("extracted fingerprints are deterministic with one row per segment") {
    const ModelConfig mc = tiny_model();
    const ModelParams params = init_params(mc, 11);
    const Dataset data = tiny_dataset(3, 2, mc.segment_len);
    const auto segs = all_pairs(data);

    const FingerprintSet ecg = extract_fingerprints(params, segs, FingerprintSource::Ecg);
    CHECK(ecg.rows.size() == 6);
    CHECK(ecg.dim == mc.enc_width);
    CHECK(ecg.rows[0].subject_id == 0);
    CHECK(ecg.rows[1].segment_index == 1);

    const FingerprintSet again = extract_fingerprints(params, segs, FingerprintSource::Ecg);
    for (std::size_t i = 0; i < ecg.rows.size(); ++i)
        CHECK(ecg.rows[i].values == again.rows[i].values);

    const FingerprintSet ppg = extract_fingerprints(params, segs, FingerprintSource::Ppg);
    double delta = 0.0;
    for (std::size_t j = 0; j < ecg.dim; ++j)
        delta = std::max(delta, std::abs(ecg.rows[0].values[j] - ppg.rows[0].values[j]));
    CHECK(delta > 1e-6);

    CHECK_THROWS_AS(extract_fingerprints(params, {}, FingerprintSource::Ecg), DataError);
    const Dataset wrong = tiny_dataset(1, 1, 64);
    CHECK_THROWS_AS(extract_fingerprints(params, all_pairs(wrong), FingerprintSource::Ecg),
                    ShapeError);
}

TEST_CASE("paired fingerprints equal the row-weighted mix of both encoders") {
    const ModelConfig mc = tiny_model();
    const ModelParams params = init_params(mc, 3);
    const Dataset data = tiny_dataset(2, 1, mc.segment_len);
    const auto segs = all_pairs(data);
    const std::size_t k = mc.patches();

    const FingerprintSet paired = extract_fingerprints(params, segs, FingerprintSource::Paired);

    Graph g;
    const NodeId in_e = g.leaf("in.ecg", {k, mc.patch_size});
    const NodeId in_p = g.leaf("in.ppg", {k, mc.patch_size});
    const NodeId z_e = encode_from_patches(g, in_e, Modality::Ecg, mc);
    const NodeId z_p = encode_from_patches(g, in_p, Modality::Ppg, mc);
    const MaskPlan plan = sample_mask_plan(k, 0.5, 0);

    Bindings bind = params_bindings(params);
    bind["in.ecg"] = patchify(segs[0]->ecg, mc.patch_size);
    bind["in.ppg"] = patchify(segs[0]->ppg, mc.patch_size);
    const Array ze = g.evaluate(z_e, bind);
    const Array zp = g.evaluate(z_p, bind);

    for (std::size_t j = 0; j < mc.enc_width; ++j) {
        double sum = 0.0;
        for (std::size_t r : plan.visible) sum += ze.at(r, j);
        for (std::size_t r : plan.masked) sum += zp.at(r, j);
        CHECK(paired.rows[0].values[j] ==
              doctest::Approx(sum / static_cast<double>(k)).epsilon(1e-10));
    }
}

TEST_CASE("fingerprint csv round-trips exactly") {
    const ModelConfig mc = tiny_model();
    const ModelParams params = init_params(mc, 5);
    const Dataset data = tiny_dataset(2, 2, mc.segment_len);
    const FingerprintSet set = extract_fingerprints(params, all_pairs(data),
                                                    FingerprintSource::Paired);

    const std::string path = "probe_fps_roundtrip.csv";
    save_fingerprints_csv(path, set);
    const FingerprintSet back = load_fingerprints_csv(path);
    REQUIRE(back.rows.size() == set.rows.size());
    CHECK(back.dim == set.dim);
    for (std::size_t i = 0; i < set.rows.size(); ++i) {
        CHECK(back.rows[i].subject_id == set.rows[i].subject_id);
        CHECK(back.rows[i].segment_index == set.rows[i].segment_index);
        CHECK(back.rows[i].source == set.rows[i].source);
        CHECK(back.rows[i].values == set.rows[i].values);
    }

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("subject_id,segment_index,source,f0,f1,", 0) == 0);

    std::ofstream bad("probe_fps_bad.csv");
    bad << "subject,segment,source,f0\n1,0,ecg,0.5\n";
    bad.close();
    CHECK_THROWS_AS(load_fingerprints_csv("probe_fps_bad.csv"), IoError);
    std::ofstream ragged("probe_fps_ragged.csv");
    ragged << "subject_id,segment_index,source,f0,f1\n1,0,ecg,0.5\n";
    ragged.close();
    CHECK_THROWS_AS(load_fingerprints_csv("probe_fps_ragged.csv"), IoError);
    CHECK_THROWS_AS(load_fingerprints_csv("probe_fps_missing.csv"), IoError);
    std::remove(path.c_str());
    std::remove("probe_fps_bad.csv");
    std::remove("probe_fps_ragged.csv");
}

TEST_CASE("label csv round-trips and aligns to fingerprint rows") {
    LabelTable table;
    table.values[{0, 0}] = 1.0;
    table.values[{0, 1}] = 0.0;
    table.values[{3, 0}] = 0.25;

    const std::string path = "probe_labels_roundtrip.csv";
    save_labels_csv(path, table);
    const LabelTable back = load_labels_csv(path);
    CHECK(back.values == table.values);

    FingerprintSet set;
    set.dim = 1;
    set.rows.push_back({3, 0, FingerprintSource::Ecg, {0.1}});
    set.rows.push_back({0, 1, FingerprintSource::Ecg, {0.2}});
    const std::vector<double> aligned = align_labels(set, back);
    CHECK(aligned == std::vector<double>{0.25, 0.0});

    set.rows.push_back({9, 9, FingerprintSource::Ecg, {0.3}});
    CHECK_THROWS_AS(align_labels(set, back), DataError);

    std::ofstream dup(path);
    dup << "subject_id,segment_index,label\n1,0,0.5\n1,0,0.75\n";
    dup.close();
    CHECK_THROWS_AS(load_labels_csv(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("fingerprint splits are subject-disjoint and deterministic") {
    const FingerprintSet set = gaussian_fingerprints(10, 3, 4, 21);
    const auto [train, heldout] = split_fingerprint_rows(set, 0.7, 5);
    CHECK(!train.empty());
    CHECK(!heldout.empty());
    CHECK(train.size() + heldout.size() == set.rows.size());

    std::set<std::uint32_t> train_subjects, held_subjects;
    for (std::size_t i : train) train_subjects.insert(set.rows[i].subject_id);
    for (std::size_t i : heldout) held_subjects.insert(set.rows[i].subject_id);
    for (std::uint32_t s : held_subjects) CHECK(train_subjects.count(s) == 0);
    CHECK(train_subjects.size() == 7);

    const auto repeat = split_fingerprint_rows(set, 0.7, 5);
    CHECK(repeat.first == train);
    const auto other = split_fingerprint_rows(set, 0.7, 6);
    CHECK(other.first != train);

    CHECK_THROWS_AS(split_fingerprint_rows(set, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split_fingerprint_rows(set, 1.0, 1), ConfigError);
    const FingerprintSet lone = gaussian_fingerprints(1, 4, 2, 3);
    CHECK_THROWS_AS(split_fingerprint_rows(lone, 0.5, 1), DataError);

    const FingerprintSet sub = subset(set, {0, 5, 7});
    CHECK(sub.rows.size() == 3);
    CHECK(sub.rows[1].values == set.rows[5].values);
    CHECK_THROWS_AS(subset(set, {set.rows.size()}), ShapeError);
}

TEST_CASE("linear probe separates linearly separable binary classes") {
    Rng rng(17);
    FingerprintSet set;
    set.dim = 3;
    std::vector<double> labels;
    const std::vector<double> w_true{1.0, -1.0, 0.5};
    std::uint32_t sid = 0;
    while (set.rows.size() < 40) {
        FingerprintRow row;
        row.subject_id = sid;
        row.segment_index = 0;
        double t = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            row.values.push_back(rng.normal());
            t += w_true[j] * row.values[j];
        }
        if (std::abs(t) < 0.3) continue;  // enforce a margin
        labels.push_back(t > 0.0 ? 1.0 : 0.0);
        set.rows.push_back(std::move(row));
        ++sid;
    }

    const ProbeModel model = fit_linear_probe(set, labels, ProbeTask::Binary, 1e-6, 0);
    CHECK(model.n_classes == 2);
    CHECK(model.weights.shape() == Shape{1, 3});
    const MetricReport train = evaluate_probe(model, set, labels);
    CHECK(train.get("accuracy") == doctest::Approx(1.0));
    CHECK(train.get("auroc") == doctest::Approx(1.0));
}

TEST_CASE("probe fitting is deterministic") {
    const FingerprintSet set = gaussian_fingerprints(12, 2, 4, 33);
    std::vector<double> labels;
    for (const auto& row : set.rows) labels.push_back(row.values[0] > 0.0 ? 1.0 : 0.0);
    const ProbeModel a = fit_linear_probe(set, labels, ProbeTask::Binary, 1e-3, 9);
    const ProbeModel b = fit_linear_probe(set, labels, ProbeTask::Binary, 1e-3, 9);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("shuffled labels leave held-out auroc near chance") {
    const FingerprintSet set = gaussian_fingerprints(250, 2, 6, 101);
    Rng rng(55);
    std::vector<double> labels(set.rows.size());
    for (auto& v : labels) v = static_cast<double>(rng.uniform_index(2));

    const auto [train_idx, held_idx] = split_fingerprint_rows(set, 0.6, 2);
    const FingerprintSet train = subset(set, train_idx);
    const FingerprintSet held = subset(set, held_idx);
    std::vector<double> train_labels, held_labels;
    for (std::size_t i : train_idx) train_labels.push_back(labels[i]);
    for (std::size_t i : held_idx) held_labels.push_back(labels[i]);

    const ProbeModel model = fit_linear_probe(train, train_labels, ProbeTask::Binary, 1e-3, 0);
    const double auroc = evaluate_probe(model, held, held_labels).get("auroc");
    CHECK(std::abs(auroc - 0.5) <= 0.05);
}

TEST_CASE("strong regularization drives probe weights toward zero") {
    const FingerprintSet set = gaussian_fingerprints(15, 2, 3, 77);
    std::vector<double> labels;
    for (const auto& row : set.rows) labels.push_back(row.values[1] < 0.0 ? 0.0 : 1.0);

    const ProbeModel loose = fit_linear_probe(set, labels, ProbeTask::Binary, 1e-3, 0);
    const ProbeModel mid = fit_linear_probe(set, labels, ProbeTask::Binary, 10.0, 0);
    const ProbeModel tight = fit_linear_probe(set, labels, ProbeTask::Binary, 1e6, 0);
    const auto norm = [](const Array& a) {
        double m = 0.0;
        for (double v : a.values()) m = std::max(m, std::abs(v));
        return m;
    };
    CHECK(norm(tight.weights) < norm(mid.weights));
    CHECK(norm(mid.weights) < norm(loose.weights));
    CHECK(norm(tight.weights) < 1e-5);
    CHECK(tight.converged);
}

TEST_CASE("multiclass probe separates three clusters") {
    Rng rng(13);
    FingerprintSet set;
    set.dim = 2;
    std::vector<double> labels;
    const double cx[3] = {4.0, 0.0, -4.0};
    const double cy[3] = {0.0, 4.0, -4.0};
    for (std::uint32_t i = 0; i < 45; ++i) {
        const std::size_t c = i % 3;
        FingerprintRow row;
        row.subject_id = i;
        row.segment_index = 0;
        row.values = {cx[c] + 0.4 * rng.normal(), cy[c] + 0.4 * rng.normal()};
        set.rows.push_back(std::move(row));
        labels.push_back(static_cast<double>(c));
    }

    const ProbeModel model = fit_linear_probe(set, labels, ProbeTask::Multiclass, 1e-6, 0);
    CHECK(model.n_classes == 3);
    CHECK(model.weights.shape() == Shape{3, 2});
    const Array scores = probe_predict(model, set);
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        double total = 0.0;
        for (std::size_t c = 0; c < 3; ++c) total += scores.at(i, c);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
    const MetricReport train = evaluate_probe(model, set, labels);
    CHECK(train.get("accuracy") == doctest::Approx(1.0));
    CHECK(train.get("f1") == doctest::Approx(1.0));
}

TEST_CASE("regression probe recovers an exact linear map") {
    const FingerprintSet set = gaussian_fingerprints(20, 1, 2, 41);
    std::vector<double> labels;
    for (const auto& row : set.rows)
        labels.push_back(2.0 * row.values[0] - row.values[1] + 0.5);

    const ProbeModel model = fit_linear_probe(set, labels, ProbeTask::Regression, 0.0, 0);
    CHECK(model.converged);
    CHECK(model.weights.at(0, 0) == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(model.weights.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(model.bias.at(0, 0) == doctest::Approx(0.5).epsilon(1e-4));

    const MetricReport train = evaluate_probe(model, set, labels);
    CHECK(train.get("r2") == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(train.get("mae") < 1e-4);
    REQUIRE(train.entries.size() == 4);
    CHECK(train.entries[0].first == "mae");
    CHECK(train.entries[3].first == "pearson");
}

TEST_CASE("probe fitting rejects bad inputs") {
    const FingerprintSet set = gaussian_fingerprints(6, 1, 2, 1);
    std::vector<double> labels{0, 1, 0, 1, 0, 1};
    CHECK_THROWS_AS(fit_linear_probe(set, {0, 1}, ProbeTask::Binary, 0.1, 0), ShapeError);
    CHECK_THROWS_AS(fit_linear_probe(set, labels, ProbeTask::Binary, -1.0, 0), ConfigError);
    CHECK_THROWS_AS(fit_linear_probe(set, {0, 0, 0, 0, 0, 0}, ProbeTask::Binary, 0.1, 0),
                    DataError);
    CHECK_THROWS_AS(fit_linear_probe(set, {0, 1, 2, 0, 1, 2}, ProbeTask::Binary, 0.1, 0),
                    DataError);
    CHECK_THROWS_AS(fit_linear_probe(set, {0, 0.5, 1, 0, 1, 0}, ProbeTask::Multiclass, 0.1, 0),
                    DataError);
    CHECK_THROWS_AS(fit_linear_probe(set, {3, 3, 3, 3, 3, 3}, ProbeTask::Multiclass, 0.1, 0),
                    DataError);

    const FingerprintSet two = gaussian_fingerprints(2, 1, 2, 1);
    CHECK_THROWS_AS(fit_linear_probe(two, {0, 1}, ProbeTask::Binary, 0.1, 0), DataError);

    ProbeModel model = fit_linear_probe(set, labels, ProbeTask::Binary, 0.1, 0);
    const FingerprintSet wide = gaussian_fingerprints(4, 1, 5, 2);
    CHECK_THROWS_AS(probe_predict(model, wide), ShapeError);
}

TEST_CASE("frozen cross reconstruction reports per-sample error") {
    const ModelConfig mc = tiny_model();
    const ModelParams params = init_params(mc, 19);
    const Dataset data = tiny_dataset(3, 2, mc.segment_len);
    const auto segs = all_pairs(data);

    const ReconstructionResult r =
        reconstruct_cross(params, segs, Modality::Ecg, ReconSetting::Frozen);
    CHECK(r.source == Modality::Ecg);
    CHECK(r.target == Modality::Ppg);
    CHECK(r.finetune_epochs == 0);
    REQUIRE(r.reconstructions.size() == segs.size());
    REQUIRE(r.per_sample_mae.size() == segs.size());
    CHECK(r.reconstructions[0].size() == mc.segment_len);

    double mean = 0.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        double abs_sum = 0.0;
        for (std::size_t t = 0; t < mc.segment_len; ++t)
            abs_sum += std::abs(r.reconstructions[i][t] - segs[i]->ppg[t]);
        CHECK(r.per_sample_mae[i] ==
              doctest::Approx(abs_sum / static_cast<double>(mc.segment_len)).epsilon(1e-12));
        mean += r.per_sample_mae[i];
    }
    CHECK(r.mean_mae == doctest::Approx(mean / static_cast<double>(segs.size())).epsilon(1e-12));

    const ReconstructionResult again =
        reconstruct_cross(params, segs, Modality::Ecg, ReconSetting::Frozen);
    CHECK(again.reconstructions[0] == r.reconstructions[0]);

    const ReconstructionResult flipped =
        reconstruct_cross(params, segs, Modality::Ppg, ReconSetting::Frozen);
    CHECK(flipped.target == Modality::Ecg);
    CHECK(flipped.reconstructions[0] != r.reconstructions[0]);

    CHECK_THROWS_AS(reconstruct_cross(params, {}, Modality::Ecg, ReconSetting::Frozen), DataError);
    CHECK_THROWS_AS(reconstruct_cross(params, segs, Modality::Ecg, ReconSetting::Frozen, segs),
                    ConfigError);
    CHECK_THROWS_AS(
        reconstruct_cross(params, segs, Modality::Ecg, ReconSetting::DecoderFinetune),
        ConfigError);
}

TEST_CASE("cross reconstruction depends only on the target decoder side") {
    const ModelConfig mc = tiny_model();
    const ModelParams params = init_params(mc, 23);
    const Dataset data = tiny_dataset(1, 1, mc.segment_len);
    const auto segs = all_pairs(data);

    const ReconstructionResult base =
        reconstruct_cross(params, segs, Modality::Ecg, ReconSetting::Frozen);

    ModelParams off_path = params;
    off_path.values.at("ecg.dec.head.w").data()[0] += 0.5;
    off_path.values.at("ecg.mask_token").data()[0] += 0.5;
    off_path.values.at("ppg.mask_token").data()[0] += 0.5;
    off_path.values.at("ppg.enc.block0.attn.q.w").data()[0] += 0.5;
    const ReconstructionResult same =
        reconstruct_cross(off_path, segs, Modality::Ecg, ReconSetting::Frozen);
    CHECK(same.reconstructions[0] == base.reconstructions[0]);

    ModelParams on_path = params;
    on_path.values.at("ppg.dec.head.b").data()[0] += 0.5;
    const ReconstructionResult changed =
        reconstruct_cross(on_path, segs, Modality::Ecg, ReconSetting::Frozen);
    CHECK(changed.reconstructions[0] != base.reconstructions[0]);
}

TEST_CASE("decoder finetuning trains only the target decoder and helps") {
    const ModelConfig mc = tiny_model();
    ModelParams params = init_params(mc, 29);
    const Dataset data = tiny_dataset(4, 2, mc.segment_len);
    const auto segs = all_pairs(data);

    ReconstructOptions opts;
    opts.learning_rate = 1e-2;
    opts.max_epochs = 6;
    opts.batch_size = 4;

    ModelParams tuned = params;
    const FinetuneInfo info = finetune_cross_decoder(tuned, segs, Modality::Ecg, opts);
    CHECK(info.epochs >= 1);
    CHECK(info.best_objective > 0.0);

    bool decoder_moved = false;
    for (const auto& spec : param_layout(mc)) {
        const double delta = max_param_delta(params, tuned, spec.name);
        const bool target_decoder =
            spec.name.rfind("ppg.dec.", 0) == 0 || spec.name == "ppg.pos_dec";
        if (target_decoder) {
            decoder_moved = decoder_moved || delta > 0.0;
        } else {
            CHECK(delta == 0.0);
        }
    }
    CHECK(decoder_moved);

    const ReconstructionResult frozen =
        reconstruct_cross(params, segs, Modality::Ecg, ReconSetting::Frozen);
    const ReconstructionResult tuned_run =
        reconstruct_cross(params, segs, Modality::Ecg, ReconSetting::DecoderFinetune, segs, opts);
    CHECK(tuned_run.finetune_epochs >= 1);
    CHECK(tuned_run.mean_mae <= frozen.mean_mae);

    const ReconstructionResult repeat =
        reconstruct_cross(params, segs, Modality::Ecg, ReconSetting::DecoderFinetune, segs, opts);
    CHECK(repeat.reconstructions[0] == tuned_run.reconstructions[0]);
}

TEST_CASE("reconstruction options are validated") {
    ReconstructOptions bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ReconstructOptions{};
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ReconstructOptions{};
    bad.max_epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(parse_recon_setting("frozen") == ReconSetting::Frozen);
    CHECK(parse_recon_setting("finetune") == ReconSetting::DecoderFinetune);
    CHECK_THROWS_AS(parse_recon_setting("thawed"), ConfigError);
}
