#include "m2ae/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <tuple>

#include "m2ae/errors.hpp"
#include "m2ae/graph.hpp"
#include "m2ae/rng.hpp"
#include "m2ae/training.hpp"

namespace m2ae {

const char* fingerprint_source_name(FingerprintSource source) {
    switch (source) {
        case FingerprintSource::Ecg: return "ecg";
        case FingerprintSource::Ppg: return "ppg";
        case FingerprintSource::Paired: return "paired";
    }
    throw ConfigError("unknown fingerprint source");
}

FingerprintSource parse_fingerprint_source(const std::string& name) {
    if (name == "ecg") return FingerprintSource::Ecg;
    if (name == "ppg") return FingerprintSource::Ppg;
    if (name == "paired") return FingerprintSource::Paired;
    throw ConfigError("unknown fingerprint source: " + name);
}

void FingerprintSet::validate() const {
    if (dim == 0) throw ShapeError("fingerprint dim must be positive");
    std::set<std::tuple<std::uint32_t, std::uint32_t, FingerprintSource>> seen;
    for (const auto& row : rows) {
        if (row.values.size() != dim)
            throw ShapeError("fingerprint row length disagrees with dim");
        if (!all_finite(row.values.data(), row.values.size()))
            throw NumericError("non-finite fingerprint value");
        if (!seen.insert({row.subject_id, row.segment_index, row.source}).second)
            throw DataError("duplicate fingerprint key");
    }
}

std::vector<const PairedSegment*> all_pairs(const Dataset& dataset) {
    std::vector<const PairedSegment*> out;
    out.reserve(dataset.pairs.size());
    for (const auto& p : dataset.pairs) out.push_back(&p);
    return out;
}

namespace {

void check_segment_lengths(const std::vector<const PairedSegment*>& segments,
                           const ModelConfig& config) {
    for (const auto* seg : segments) {
        if (seg->ecg.size() != config.segment_len || seg->ppg.size() != config.segment_len)
            throw ShapeError("segment length disagrees with the model config");
    }
}

}  // namespace

FingerprintSet extract_fingerprints(const ModelParams& params,
                                    const std::vector<const PairedSegment*>& segments,
                                    FingerprintSource source) {
    if (segments.empty()) throw DataError("no segments to extract from");
    const ModelConfig& mc = params.config;
    check_segment_lengths(segments, mc);
    const std::size_t k = mc.patches();

    Graph g;
    NodeId in_ecg = 0, in_ppg = 0, root = 0;
    switch (source) {
        case FingerprintSource::Ecg:
            in_ecg = g.leaf("in.ecg", {k, mc.patch_size});
            root = fingerprint(g, encode_from_patches(g, in_ecg, Modality::Ecg, mc));
            break;
        case FingerprintSource::Ppg:
            in_ppg = g.leaf("in.ppg", {k, mc.patch_size});
            root = fingerprint(g, encode_from_patches(g, in_ppg, Modality::Ppg, mc));
            break;
        case FingerprintSource::Paired: {
            in_ecg = g.leaf("in.ecg", {k, mc.patch_size});
            in_ppg = g.leaf("in.ppg", {k, mc.patch_size});
            NodeId z_ecg = encode_from_patches(g, in_ecg, Modality::Ecg, mc);
            NodeId z_ppg = encode_from_patches(g, in_ppg, Modality::Ppg, mc);
            const MaskPlan plan = sample_mask_plan(k, 0.5, 0);
            root = fingerprint(g, merge_bottleneck(g, z_ecg, z_ppg, plan));
            break;
        }
    }

    Bindings bindings = params_bindings(params);
    FingerprintSet out;
    out.dim = mc.enc_width;
    out.rows.reserve(segments.size());
    for (const auto* seg : segments) {
        if (source != FingerprintSource::Ppg)
            bindings["in.ecg"] = patchify(seg->ecg, mc.patch_size);
        if (source != FingerprintSource::Ecg)
            bindings["in.ppg"] = patchify(seg->ppg, mc.patch_size);
        const Array pooled = g.evaluate(root, bindings);
        out.rows.push_back({seg->subject_id, seg->segment_index, source, pooled.values()});
    }
    out.validate();
    return out;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double_field(const std::string& field, const char* what) {
    if (field.empty()) throw IoError(std::string("empty ") + what + " field");
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size())
        throw IoError(std::string("malformed ") + what + " field: " + field);
    return v;
}

std::uint32_t parse_u32_field(const std::string& field, const char* what) {
    if (field.empty() || field.find_first_not_of("0123456789") != std::string::npos)
        throw IoError(std::string("malformed ") + what + " field: " + field);
    return static_cast<std::uint32_t>(std::strtoul(field.c_str(), nullptr, 10));
}

std::ifstream open_for_read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

}  // namespace

void save_fingerprints_csv(const std::string& path, const FingerprintSet& set) {
    set.validate();
    std::ofstream out = open_for_write(path);
    out << "subject_id,segment_index,source";
    for (std::size_t i = 0; i < set.dim; ++i) out << ",f" << i;
    out << '\n';
    for (const auto& row : set.rows) {
        out << row.subject_id << ',' << row.segment_index << ','
            << fingerprint_source_name(row.source);
        for (double v : row.values) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw IoError("write failed on " + path);
}

FingerprintSet load_fingerprints_csv(const std::string& path) {
    std::ifstream in = open_for_read(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty fingerprint file " + path);
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 4 || header[0] != "subject_id" || header[1] != "segment_index" ||
        header[2] != "source")
        throw IoError("unexpected fingerprint header in " + path);
    const std::size_t dim = header.size() - 3;
    for (std::size_t i = 0; i < dim; ++i) {
        if (header[3 + i] != "f" + std::to_string(i))
            throw IoError("unexpected fingerprint header in " + path);
    }

    FingerprintSet set;
    set.dim = dim;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != dim + 3)
            throw IoError("fingerprint row has wrong field count in " + path);
        FingerprintRow row;
        row.subject_id = parse_u32_field(fields[0], "subject_id");
        row.segment_index = parse_u32_field(fields[1], "segment_index");
        row.source = parse_fingerprint_source(fields[2]);
        row.values.reserve(dim);
        for (std::size_t i = 0; i < dim; ++i)
            row.values.push_back(parse_double_field(fields[3 + i], "fingerprint"));
        set.rows.push_back(std::move(row));
    }
    set.validate();
    return set;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_fingerprint_rows(
    const FingerprintSet& set, double train_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw ConfigError("train fraction must lie strictly between 0 and 1");
    std::set<std::uint32_t> subject_set;
    for (const auto& row : set.rows) subject_set.insert(row.subject_id);
    if (subject_set.size() < 2)
        throw DataError("subject-level split needs at least 2 subjects");

    std::vector<std::uint32_t> subjects(subject_set.begin(), subject_set.end());
    Rng rng(mix_seed(seed, 0x73706c69));
    rng.shuffle(subjects);
    std::size_t n_train = static_cast<std::size_t>(
        std::floor(train_frac * static_cast<double>(subjects.size()) + 0.5));
    n_train = std::min(std::max<std::size_t>(n_train, 1), subjects.size() - 1);
    const std::set<std::uint32_t> train_subjects(subjects.begin(),
                                                 subjects.begin() + static_cast<long>(n_train));

    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < set.rows.size(); ++i) {
        if (train_subjects.count(set.rows[i].subject_id))
            out.first.push_back(i);
        else
            out.second.push_back(i);
    }
    return out;
}

FingerprintSet subset(const FingerprintSet& set, const std::vector<std::size_t>& indices) {
    FingerprintSet out;
    out.dim = set.dim;
    out.rows.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= set.rows.size()) throw ShapeError("fingerprint subset index out of range");
        out.rows.push_back(set.rows[i]);
    }
    return out;
}

void save_labels_csv(const std::string& path, const LabelTable& table) {
    std::ofstream out = open_for_write(path);
    out << "subject_id,segment_index,label\n";
    for (const auto& [key, value] : table.values)
        out << key.first << ',' << key.second << ',' << format_double(value) << '\n';
    if (!out) throw IoError("write failed on " + path);
}

LabelTable load_labels_csv(const std::string& path) {
    std::ifstream in = open_for_read(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty label file " + path);
    if (line != "subject_id,segment_index,label")
        throw IoError("unexpected label header in " + path);
    LabelTable table;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 3) throw IoError("label row has wrong field count in " + path);
        const std::uint32_t subject = parse_u32_field(fields[0], "subject_id");
        const std::uint32_t segment = parse_u32_field(fields[1], "segment_index");
        const double value = parse_double_field(fields[2], "label");
        if (!table.values.emplace(std::make_pair(subject, segment), value).second)
            throw DataError("duplicate label key in " + path);
    }
    return table;
}

std::vector<double> align_labels(const FingerprintSet& set, const LabelTable& table) {
    std::vector<double> out;
    out.reserve(set.rows.size());
    for (const auto& row : set.rows) {
        const auto it = table.values.find({row.subject_id, row.segment_index});
        if (it == table.values.end())
            throw DataError("no label for subject " + std::to_string(row.subject_id) +
                            " segment " + std::to_string(row.segment_index));
        out.push_back(it->second);
    }
    return out;
}

namespace {

Array feature_matrix(const FingerprintSet& set) {
    set.validate();
    std::vector<double> flat;
    flat.reserve(set.rows.size() * set.dim);
    for (const auto& row : set.rows)
        flat.insert(flat.end(), row.values.begin(), row.values.end());
    return Array({set.rows.size(), set.dim}, std::move(flat));
}

std::vector<int> to_class_labels(const std::vector<double>& labels, std::size_t n_classes,
                                 const char* what) {
    std::vector<int> out;
    out.reserve(labels.size());
    for (double v : labels) {
        if (!(v >= 0.0) || std::floor(v) != v || v >= static_cast<double>(n_classes))
            throw DataError(std::string(what) + " labels must be integers in class range");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::size_t infer_class_count(const std::vector<double>& labels) {
    double top = 0.0;
    for (double v : labels) {
        if (!(v >= 0.0) || std::floor(v) != v || v > 1e6)
            throw DataError("classification labels must be small non-negative integers");
        top = std::max(top, v);
    }
    return static_cast<std::size_t>(top) + 1;
}

// Largest squared singular value of [X | 1] by power iteration; this bounds
// the data term's curvature for every task.
double augmented_sigma_sq(const Array& x, std::uint64_t seed) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols() + 1;
    Rng rng(mix_seed(seed, 0x7369676d));
    std::vector<double> v(d);
    for (auto& e : v) e = rng.normal();

    std::vector<double> u(n);
    const auto apply = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            double s = v[d - 1];
            for (std::size_t j = 0; j + 1 < d; ++j) s += x.at(i, j) * v[j];
            u[i] = s;
        }
    };
    for (int iter = 0; iter < 100; ++iter) {
        apply();
        std::vector<double> w(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j + 1 < d; ++j) w[j] += x.at(i, j) * u[i];
            w[d - 1] += u[i];
        }
        double norm = 0.0;
        for (double e : w) norm += e * e;
        norm = std::sqrt(norm);
        if (norm < 1e-30) return 1e-12;
        for (std::size_t j = 0; j < d; ++j) v[j] = w[j] / norm;
    }
    apply();
    double sigma_sq = 0.0;
    for (double e : u) sigma_sq += e * e;
    return std::max(sigma_sq, 1e-12);
}

double inf_norm(const Array& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

void gd_update(Array& param, const Array& grad, double lr) {
    for (std::size_t i = 0; i < param.size(); ++i)
        param.data()[i] -= lr * grad.data()[i];
}

}  // namespace

ProbeModel fit_linear_probe(const FingerprintSet& fingerprints, const std::vector<double>& labels,
                            ProbeTask task, double l2, std::uint64_t seed) {
    if (fingerprints.rows.size() != labels.size())
        throw ShapeError("fingerprints and labels differ in length");
    if (fingerprints.rows.size() < 3) throw DataError("probe fitting needs at least 3 samples");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("l2 must be finite and non-negative");

    const Array x = feature_matrix(fingerprints);
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();

    std::size_t n_out = 1;
    std::vector<int> cls;
    if (task == ProbeTask::Binary) {
        cls = to_class_labels(labels, 2, "binary");
        const long pos = std::count(cls.begin(), cls.end(), 1);
        if (pos == 0 || static_cast<std::size_t>(pos) == cls.size())
            throw DataError("labels contain a single class");
    } else if (task == ProbeTask::Multiclass) {
        const std::size_t n_classes = infer_class_count(labels);
        if (n_classes < 2) throw DataError("labels contain a single class");
        cls = to_class_labels(labels, n_classes, "multiclass");
        if (std::set<int>(cls.begin(), cls.end()).size() < 2)
            throw DataError("labels contain a single class");
        n_out = n_classes;
    } else {
        for (double v : labels)
            if (!std::isfinite(v)) throw DataError("regression labels must be finite");
    }

    // Step size from the curvature bound of each objective; descent with
    // lr = 1/L is monotone on these convex losses.
    const double sigma_sq = augmented_sigma_sq(x, seed);
    const double n_d = static_cast<double>(n);
    double lipschitz;
    switch (task) {
        case ProbeTask::Binary: lipschitz = 0.25 * sigma_sq / n_d + 2.0 * l2; break;
        case ProbeTask::Multiclass: lipschitz = 0.5 * sigma_sq / n_d + 2.0 * l2; break;
        default: lipschitz = 2.0 * sigma_sq / n_d + 2.0 * l2; break;
    }
    const double lr = 1.0 / lipschitz;

    Graph g;
    const NodeId xn = g.constant(x);
    const NodeId w = g.leaf("probe.w", {n_out, d});
    const NodeId b = g.leaf("probe.b", {1, n_out});
    const NodeId raw = g.add(g.matmul(xn, g.transpose(w)), b);

    NodeId data_term;
    if (task == ProbeTask::Binary) {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = cls[i];
        const NodeId yc = g.constant(Array({n, 1}, std::move(y)));
        // softplus(z) = logsumexp([0, z]) row-wise
        const NodeId stacked = g.concat_rows({g.constant(Array::zeros({1, n})), g.transpose(raw)});
        const NodeId softplus = g.row_lse(g.transpose(stacked));
        data_term = g.scalar_mul(g.sum_all(g.subtract(softplus, g.multiply(raw, yc))), 1.0 / n_d);
    } else if (task == ProbeTask::Multiclass) {
        std::vector<double> onehot(n * n_out, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            onehot[i * n_out + static_cast<std::size_t>(cls[i])] = 1.0;
        const NodeId yc = g.constant(Array({n, n_out}, std::move(onehot)));
        const NodeId picked = g.reduce_sum(g.multiply(raw, yc), 1);
        data_term = g.scalar_mul(g.sum_all(g.subtract(g.row_lse(raw), picked)), 1.0 / n_d);
    } else {
        const NodeId yc = g.constant(Array({n, 1}, labels));
        data_term = g.scalar_mul(g.sum_squares(g.subtract(raw, yc)), 1.0 / n_d);
    }
    const NodeId loss = g.add(data_term, g.scalar_mul(g.sum_squares(w), l2));

    // Zero start: the objective is convex, so only the curvature probe
    // above consumes the seed.
    ProbeModel model;
    model.task = task;
    model.n_classes = task == ProbeTask::Regression ? 0 : (task == ProbeTask::Binary ? 2 : n_out);
    model.weights = Array::zeros({n_out, d});
    model.bias = Array::zeros({1, n_out});

    Bindings bindings;
    const std::set<std::string> wrt{"probe.w", "probe.b"};
    for (std::size_t iter = 0; iter < kProbeMaxIters; ++iter) {
        bindings["probe.w"] = model.weights;
        bindings["probe.b"] = model.bias;
        const auto grads = g.gradients(loss, bindings, wrt);
        const double gn = std::max(inf_norm(grads.at("probe.w")), inf_norm(grads.at("probe.b")));
        model.final_grad_norm = gn;
        if (gn < kProbeGradTol) {
            model.converged = true;
            break;
        }
        gd_update(model.weights, grads.at("probe.w"), lr);
        gd_update(model.bias, grads.at("probe.b"), lr);
        model.iterations = iter + 1;
    }
    return model;
}

Array probe_predict(const ProbeModel& model, const FingerprintSet& fingerprints) {
    const Array x = feature_matrix(fingerprints);
    if (x.cols() != model.weights.cols())
        throw ShapeError("fingerprint dim disagrees with the probe model");
    const std::size_t n = x.rows();
    const std::size_t n_out = model.weights.rows();

    Array logits = Array::zeros({n, n_out});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < n_out; ++c) {
            double s = model.bias.at(0, c);
            for (std::size_t j = 0; j < x.cols(); ++j) s += x.at(i, j) * model.weights.at(c, j);
            logits.at(i, c) = s;
        }
    }

    if (model.task == ProbeTask::Regression) return logits;
    if (model.task == ProbeTask::Binary) {
        for (std::size_t i = 0; i < n; ++i) {
            const double z = logits.at(i, 0);
            logits.at(i, 0) = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                       : std::exp(z) / (1.0 + std::exp(z));
        }
        return logits;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double top = logits.at(i, 0);
        for (std::size_t c = 1; c < n_out; ++c) top = std::max(top, logits.at(i, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < n_out; ++c) {
            logits.at(i, c) = std::exp(logits.at(i, c) - top);
            denom += logits.at(i, c);
        }
        for (std::size_t c = 0; c < n_out; ++c) logits.at(i, c) /= denom;
    }
    return logits;
}

MetricReport evaluate_probe(const ProbeModel& model, const FingerprintSet& fingerprints,
                            const std::vector<double>& labels) {
    if (fingerprints.rows.size() != labels.size())
        throw ShapeError("fingerprints and labels differ in length");
    const Array scores = probe_predict(model, fingerprints);
    if (model.task == ProbeTask::Regression) {
        std::vector<double> preds(scores.rows());
        for (std::size_t i = 0; i < preds.size(); ++i) preds[i] = scores.at(i, 0);
        return regression_metrics(preds, labels);
    }
    if (model.task == ProbeTask::Binary) {
        std::vector<double> col(scores.rows());
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = scores.at(i, 0);
        return binary_metrics(col, to_class_labels(labels, 2, "binary"));
    }
    return multiclass_metrics(scores, to_class_labels(labels, model.n_classes, "multiclass"));
}

const char* recon_setting_name(ReconSetting setting) {
    switch (setting) {
        case ReconSetting::Frozen: return "frozen";
        case ReconSetting::DecoderFinetune: return "finetune";
    }
    throw ConfigError("unknown reconstruction setting");
}

ReconSetting parse_recon_setting(const std::string& name) {
    if (name == "frozen") return ReconSetting::Frozen;
    if (name == "finetune") return ReconSetting::DecoderFinetune;
    throw ConfigError("unknown reconstruction setting: " + name);
}

void ReconstructOptions::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("finetune learning rate must be positive");
    if (batch_size == 0) throw ConfigError("finetune batch size must be positive");
    if (max_epochs == 0) throw ConfigError("finetune epoch count must be positive");
    if (patience == 0) throw ConfigError("finetune patience must be positive");
}

namespace {

const std::vector<double>& signal_of(const PairedSegment& seg, Modality m) {
    return m == Modality::Ecg ? seg.ecg : seg.ppg;
}

// Mean over segments of (1/k) * ||target - reconstruction||_F^2, the
// objective decoder finetuning minimizes.
double cross_objective(const ModelParams& params, const std::vector<const PairedSegment*>& segments,
                       Modality source, Modality target) {
    const ModelConfig& mc = params.config;
    const std::size_t k = mc.patches();
    Graph g;
    const NodeId in = g.leaf("in.src", {k, mc.patch_size});
    const NodeId rec = decode_modality(g, encode_from_patches(g, in, source, mc), target, mc);
    Bindings bindings = params_bindings(params);
    double total = 0.0;
    for (const auto* seg : segments) {
        bindings["in.src"] = patchify(signal_of(*seg, source), mc.patch_size);
        const Array out = g.evaluate(rec, bindings);
        const Array tgt = patchify(signal_of(*seg, target), mc.patch_size);
        double ss = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double diff = out.data()[i] - tgt.data()[i];
            ss += diff * diff;
        }
        total += ss / static_cast<double>(k);
    }
    return total / static_cast<double>(segments.size());
}

}  // namespace

FinetuneInfo finetune_cross_decoder(ModelParams& params,
                                    const std::vector<const PairedSegment*>& segments,
                                    Modality source_modality, const ReconstructOptions& options) {
    options.validate();
    if (segments.empty()) throw ConfigError("decoder finetuning needs a finetune split");
    const ModelConfig& mc = params.config;
    check_segment_lengths(segments, mc);
    const Modality source = source_modality;
    const Modality target = source == Modality::Ecg ? Modality::Ppg : Modality::Ecg;
    const std::size_t k = mc.patches();
    const std::string dec_prefix = std::string(modality_prefix(target)) + ".dec.";
    const std::string pos_name = std::string(modality_prefix(target)) + ".pos_dec";
    std::set<std::string> trainable;
    for (const auto& spec : param_layout(mc)) {
        if (spec.name.rfind(dec_prefix, 0) == 0 || spec.name == pos_name)
            trainable.insert(spec.name);
    }

    auto snapshot = [&]() {
        std::map<std::string, Array> s;
        for (const auto& name : trainable) s.emplace(name, params.values.at(name));
        return s;
    };

    FinetuneInfo info;
    double best = cross_objective(params, segments, source, target);
    std::map<std::string, Array> best_params = snapshot();
    std::size_t since_best = 0;
    OptimizerState opt;

    std::vector<std::size_t> order(segments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
        Rng rng(mix_seed(options.seed, epoch));
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t stop = std::min(order.size(), start + options.batch_size);
            Graph g;
            NodeId sum = 0;
            bool first = true;
            for (std::size_t t = start; t < stop; ++t) {
                const PairedSegment& seg = *segments[order[t]];
                const NodeId in = g.constant(patchify(signal_of(seg, source), mc.patch_size));
                const NodeId rec = decode_modality(g, encode_from_patches(g, in, source, mc),
                                                   target, mc);
                const NodeId tgt = g.constant(patchify(signal_of(seg, target), mc.patch_size));
                const NodeId term =
                    g.scalar_mul(g.sum_squares(g.subtract(rec, tgt)), 1.0 / static_cast<double>(k));
                sum = first ? term : g.add(sum, term);
                first = false;
            }
            const NodeId loss = g.scalar_mul(sum, 1.0 / static_cast<double>(stop - start));
            const auto grads = g.gradients(loss, params_bindings(params), trainable);
            adam_step(params, grads, opt, options.learning_rate);
        }

        const double epoch_loss = cross_objective(params, segments, source, target);
        info.epochs = epoch;
        if (epoch_loss < best) {
            best = epoch_loss;
            best_params = snapshot();
            since_best = 0;
        } else if (++since_best >= options.patience) {
            break;
        }
    }

    for (auto& [name, value] : best_params) params.values[name] = std::move(value);
    info.best_objective = best;
    return info;
}

ReconstructionResult reconstruct_cross(const ModelParams& params,
                                       const std::vector<const PairedSegment*>& eval_segments,
                                       Modality source_modality, ReconSetting setting,
                                       const std::vector<const PairedSegment*>& finetune_segments,
                                       const ReconstructOptions& options) {
    options.validate();
    if (eval_segments.empty()) throw DataError("no segments to reconstruct");
    const ModelConfig& mc = params.config;
    check_segment_lengths(eval_segments, mc);
    check_segment_lengths(finetune_segments, mc);

    const Modality target = source_modality == Modality::Ecg ? Modality::Ppg : Modality::Ecg;
    ReconstructionResult result;
    result.source = source_modality;
    result.target = target;

    ModelParams work = params;
    if (setting == ReconSetting::DecoderFinetune) {
        const FinetuneInfo info =
            finetune_cross_decoder(work, finetune_segments, source_modality, options);
        result.finetune_epochs = info.epochs;
        result.finetune_loss = info.best_objective;
    } else if (!finetune_segments.empty()) {
        throw ConfigError("frozen reconstruction takes no finetune split");
    }

    const std::size_t k = mc.patches();
    Graph g;
    const NodeId in = g.leaf("in.src", {k, mc.patch_size});
    const NodeId rec = decode_modality(g, encode_from_patches(g, in, source_modality, mc),
                                       target, mc);
    Bindings bindings = params_bindings(work);

    result.reconstructions.reserve(eval_segments.size());
    result.per_sample_mae.reserve(eval_segments.size());
    double total = 0.0;
    for (const auto* seg : eval_segments) {
        bindings["in.src"] = patchify(signal_of(*seg, source_modality), mc.patch_size);
        std::vector<double> wave = unpatchify(g.evaluate(rec, bindings));
        const std::vector<double>& truth = signal_of(*seg, target);
        double abs_sum = 0.0;
        for (std::size_t i = 0; i < wave.size(); ++i) abs_sum += std::abs(wave[i] - truth[i]);
        const double mae = abs_sum / static_cast<double>(wave.size());
        result.per_sample_mae.push_back(mae);
        result.reconstructions.push_back(std::move(wave));
        total += mae;
    }
    result.mean_mae = total / static_cast<double>(eval_segments.size());
    return result;
}

}  // namespace m2ae
