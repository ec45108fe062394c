#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "m2ae/config.hpp"
#include "m2ae/errors.hpp"
#include "m2ae/gradcheck.hpp"
#include "m2ae/metrics.hpp"
#include "m2ae/model.hpp"
#include "m2ae/probe.hpp"
#include "m2ae/rng.hpp"
#include "m2ae/signals.hpp"
#include "m2ae/training.hpp"

namespace {

using namespace m2ae;

std::string real_text(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RunConfig config_from_flags(const std::string& config_path,
                            const std::vector<std::string>& overrides) {
    RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    for (const auto& assignment : overrides) apply_config_override(rc, assignment);
    rc.validate();
    return rc;
}

void check_dataset_matches_model(const Dataset& dataset, const ModelConfig& mc) {
    if (dataset.segment_len != mc.segment_len)
        throw ConfigError("dataset segment length " + std::to_string(dataset.segment_len) +
                          " differs from model.segment_len " + std::to_string(mc.segment_len));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed on " + path);
}

void run_gen_data(std::uint32_t subjects, std::uint32_t pairs_each, std::uint64_t seed,
                  const std::string& out_path) {
    const Dataset dataset = generate_dataset(subjects, pairs_each, seed);
    const DataSplitConfig split_defaults;
    const SplitAssignment split =
        split_by_subject(dataset, split_defaults.train_frac, split_defaults.valid_frac,
                         split_defaults.test_frac, seed);
    save_dataset(out_path, dataset);

    std::printf("subjects: %u\npairs: %zu\nsegment_len: %zu\n", subjects, dataset.pairs.size(),
                dataset.segment_len);
    for (const Split s : {Split::Train, Split::Valid, Split::Test}) {
        std::size_t n_subjects = 0;
        for (const auto& [subject, assigned] : split)
            if (assigned == s) ++n_subjects;
        const char* name = s == Split::Train ? "train" : (s == Split::Valid ? "valid" : "test");
        std::printf("split %s: %zu subjects / %zu pairs\n", name, n_subjects,
                    pairs_in_split(dataset, split, s).size());
    }
    std::printf("wrote: %s\n", out_path.c_str());
}

void run_pretrain(const std::string& config_path, const std::string& data_path,
                  const std::string& out_dir, const std::string& mode,
                  const std::vector<std::string>& overrides, bool resume,
                  const std::string& warm_ecg, const std::string& warm_ppg) {
    RunConfig rc = config_from_flags(config_path, overrides);
    if (!mode.empty()) {
        rc.train.mode = parse_train_mode(mode);
        rc.validate();
    }
    if (warm_ecg.empty() != warm_ppg.empty())
        throw ConfigError("warm start needs both --warm-start-ecg and --warm-start-ppg");
    if (resume && !warm_ecg.empty())
        throw ConfigError("--resume and warm start are mutually exclusive");

    const Dataset dataset = load_dataset(data_path);
    check_dataset_matches_model(dataset, rc.model);
    const SplitAssignment split = split_by_subject(dataset, rc.data.train_frac,
                                                   rc.data.valid_frac, rc.data.test_frac,
                                                   rc.data.split_seed);

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_text_file((dir / "config.txt").string(), run_config_to_text(rc));

    PretrainOptions options;
    options.best_checkpoint_path = (dir / "checkpoint.bin").string();
    options.log_csv_path = (dir / "log.csv").string();
    options.state_path = (dir / "state.bin").string();
    options.resume = resume;

    ModelParams warm_init;
    if (!warm_ecg.empty()) {
        const ModelParams ecg_single = load_checkpoint(warm_ecg);
        const ModelParams ppg_single = load_checkpoint(warm_ppg);
        warm_init = warm_start_init(init_params(rc.model, rc.train.seed), ecg_single, ppg_single);
        options.initial_params = &warm_init;
    }

    const PretrainResult result =
        pretrain(dataset, split, rc.model, rc.train, rc.loss, rc.augment, options);
    std::printf("mode: %s\nepochs: %zu\nstopped_early: %s\nbest_val: %s\n",
                train_mode_name(rc.train.mode), result.epochs_done,
                result.stopped_early ? "yes" : "no", real_text(result.best_val).c_str());
    std::printf("checkpoint: %s\nlog: %s\nstate: %s\n", options.best_checkpoint_path.c_str(),
                options.log_csv_path.c_str(), options.state_path.c_str());
}

void run_extract(const std::string& ckpt_path, const std::string& data_path,
                 const std::string& source_name, const std::string& out_path) {
    const ModelParams params = load_checkpoint(ckpt_path);
    const Dataset dataset = load_dataset(data_path);
    check_dataset_matches_model(dataset, params.config);
    const FingerprintSource source = parse_fingerprint_source(source_name);
    const FingerprintSet set = extract_fingerprints(params, all_pairs(dataset), source);
    save_fingerprints_csv(out_path, set);
    std::printf("fingerprints: %zu rows x %zu dims\nwrote: %s\n", set.rows.size(), set.dim,
                out_path.c_str());
}

// Two-way subject split for reconstruction: the first share of shuffled
// subjects feeds decoder finetuning, the rest are held out for evaluation.
std::pair<std::vector<const PairedSegment*>, std::vector<const PairedSegment*>> split_two_way(
    const Dataset& dataset, double finetune_frac, std::uint64_t seed) {
    std::set<std::uint32_t> subject_set;
    for (const auto& pair : dataset.pairs) subject_set.insert(pair.subject_id);
    if (subject_set.size() < 2)
        throw DataError("reconstruction split needs at least 2 subjects");
    std::vector<std::uint32_t> subjects(subject_set.begin(), subject_set.end());
    Rng rng(mix_seed(seed, 0x72656373));
    rng.shuffle(subjects);
    std::size_t n_tune = static_cast<std::size_t>(
        finetune_frac * static_cast<double>(subjects.size()) + 0.5);
    n_tune = std::min(std::max<std::size_t>(n_tune, 1), subjects.size() - 1);
    const std::set<std::uint32_t> tune_set(subjects.begin(),
                                           subjects.begin() + static_cast<long>(n_tune));
    std::pair<std::vector<const PairedSegment*>, std::vector<const PairedSegment*>> out;
    for (const auto& pair : dataset.pairs) {
        if (tune_set.count(pair.subject_id))
            out.first.push_back(&pair);
        else
            out.second.push_back(&pair);
    }
    return out;
}

void run_reconstruct(const std::string& ckpt_path, const std::string& data_path,
                     const std::string& direction, const std::string& setting_name,
                     const std::string& out_dir, double train_frac, std::uint64_t split_seed,
                     const ReconstructOptions& opts) {
    const ModelParams params = load_checkpoint(ckpt_path);
    const Dataset dataset = load_dataset(data_path);
    check_dataset_matches_model(dataset, params.config);

    const Modality source = direction == "ecg2ppg" ? Modality::Ecg : Modality::Ppg;
    const ReconSetting setting = parse_recon_setting(setting_name);
    const auto [tune_segments, eval_segments] = split_two_way(dataset, train_frac, split_seed);

    const ReconstructionResult result =
        setting == ReconSetting::Frozen
            ? reconstruct_cross(params, eval_segments, source, setting)
            : reconstruct_cross(params, eval_segments, source, setting, tune_segments, opts);

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    for (std::size_t i = 0; i < eval_segments.size(); ++i) {
        const PairedSegment& seg = *eval_segments[i];
        const std::string name = "recon_" + std::to_string(seg.subject_id) + "_" +
                                 std::to_string(seg.segment_index) + ".csv";
        std::ofstream out(dir / name);
        if (!out) throw IoError("cannot open " + (dir / name).string() + " for writing");
        out << "sample,target,reconstruction\n";
        const std::vector<double>& truth =
            result.target == Modality::Ppg ? seg.ppg : seg.ecg;
        for (std::size_t t = 0; t < truth.size(); ++t)
            out << t << ',' << real_text(truth[t]) << ','
                << real_text(result.reconstructions[i][t]) << '\n';
        if (!out) throw IoError("write failed on " + (dir / name).string());
    }

    std::string report;
    report += "direction: " + std::string(direction) + "\n";
    report += "setting: " + std::string(recon_setting_name(setting)) + "\n";
    report += "eval_segments: " + std::to_string(eval_segments.size()) + "\n";
    if (setting == ReconSetting::DecoderFinetune) {
        report += "finetune_segments: " + std::to_string(tune_segments.size()) + "\n";
        report += "finetune_epochs: " + std::to_string(result.finetune_epochs) + "\n";
        report += "finetune_objective: " + real_text(result.finetune_loss) + "\n";
    }
    report += "mean_mae: " + real_text(result.mean_mae) + "\n";
    for (std::size_t i = 0; i < eval_segments.size(); ++i) {
        report += "mae[" + std::to_string(eval_segments[i]->subject_id) + "," +
                  std::to_string(eval_segments[i]->segment_index) +
                  "]: " + real_text(result.per_sample_mae[i]) + "\n";
    }
    write_text_file((dir / "report.txt").string(), report);
    std::printf("%s", report.c_str());
}

void run_probe(const std::string& fps_path, const std::string& labels_path,
               const std::string& task_name, const std::string& out_path, double l2,
               std::uint64_t seed, double train_frac) {
    const FingerprintSet set = load_fingerprints_csv(fps_path);
    const LabelTable table = load_labels_csv(labels_path);
    const std::vector<double> labels = align_labels(set, table);
    const ProbeTask task = parse_probe_task(task_name);

    const auto [train_idx, held_idx] = split_fingerprint_rows(set, train_frac, seed);
    const FingerprintSet train = subset(set, train_idx);
    const FingerprintSet held = subset(set, held_idx);
    std::vector<double> train_labels, held_labels;
    for (std::size_t i : train_idx) train_labels.push_back(labels[i]);
    for (std::size_t i : held_idx) held_labels.push_back(labels[i]);

    const ProbeModel model = fit_linear_probe(train, train_labels, task, l2, seed);
    MetricReport report = evaluate_probe(model, held, held_labels);
    report.set("n_train", static_cast<double>(train.rows.size()));
    report.set("n_heldout", static_cast<double>(held.rows.size()));
    report.set("iterations", static_cast<double>(model.iterations));

    const std::string text = report.to_text();
    write_text_file(out_path, text);
    std::printf("%s", text.c_str());
}

int run_gradcheck(const std::string& config_path, std::uint64_t seed,
                  const std::vector<std::string>& overrides, const std::string& corrupt_block) {
    GradCheckConfig cfg = default_gradcheck_config();
    if (!config_path.empty() || !overrides.empty()) {
        const RunConfig rc = config_from_flags(config_path, overrides);
        cfg.model = rc.model;
        cfg.weights = rc.loss;
    }
    cfg.seed = seed;
    cfg.corrupt_block = corrupt_block;
    const GradCheckReport report = run_gradcheck(cfg);
    std::printf("%s", report.to_text().c_str());
    return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal masked autoencoder for paired ECG/PPG segments"};
    app.require_subcommand(1);
    int exit_code = 0;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic paired dataset");
    std::uint32_t subjects = 0, pairs_each = 0;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--subjects", subjects, "Number of subjects")->required();
    gen->add_option("--pairs-per-subject", pairs_each, "Segments per subject")->required();
    gen->add_option("--seed", gen_seed, "Generation seed");
    gen->add_option("--out", gen_out, "Output dataset path")->required();
    gen->callback([&] { run_gen_data(subjects, pairs_each, gen_seed, gen_out); });

    auto* pre = app.add_subcommand("pretrain", "Pretrain on a paired dataset");
    std::string pre_config, pre_data, pre_out, pre_mode, warm_ecg, warm_ppg;
    std::vector<std::string> pre_sets;
    bool pre_resume = false;
    pre->add_option("--config", pre_config, "Run config file")->required();
    pre->add_option("--data", pre_data, "Dataset path")->required();
    pre->add_option("--out", pre_out, "Output directory")->required();
    pre->add_option("--mode", pre_mode, "Training mode override")
        ->check(CLI::IsMember({"cross_modal", "single_modal_ecg", "single_modal_ppg"}));
    pre->add_option("--set", pre_sets, "key=value config override (repeatable)");
    pre->add_flag("--resume", pre_resume, "Continue from the saved training state");
    pre->add_option("--warm-start-ecg", warm_ecg, "Single-modal ECG checkpoint");
    pre->add_option("--warm-start-ppg", warm_ppg, "Single-modal PPG checkpoint");
    pre->callback([&] {
        run_pretrain(pre_config, pre_data, pre_out, pre_mode, pre_sets, pre_resume, warm_ecg,
                     warm_ppg);
    });

    auto* ext = app.add_subcommand("extract", "Extract frozen fingerprints to CSV");
    std::string ext_ckpt, ext_data, ext_source = "paired", ext_out;
    ext->add_option("--ckpt", ext_ckpt, "Checkpoint path")->required();
    ext->add_option("--data", ext_data, "Dataset path")->required();
    ext->add_option("--source", ext_source, "Fingerprint source")
        ->check(CLI::IsMember({"ecg", "ppg", "paired"}));
    ext->add_option("--out", ext_out, "Output CSV path")->required();
    ext->callback([&] { run_extract(ext_ckpt, ext_data, ext_source, ext_out); });

    auto* rec = app.add_subcommand("reconstruct", "Cross-modal reconstruction evaluation");
    std::string rec_ckpt, rec_data, rec_direction, rec_setting, rec_out;
    double rec_frac = 0.8;
    std::uint64_t rec_split_seed = 0;
    ReconstructOptions rec_opts;
    rec->add_option("--ckpt", rec_ckpt, "Checkpoint path")->required();
    rec->add_option("--data", rec_data, "Dataset path")->required();
    rec->add_option("--direction", rec_direction, "Reconstruction direction")
        ->required()
        ->check(CLI::IsMember({"ecg2ppg", "ppg2ecg"}));
    rec->add_option("--setting", rec_setting, "frozen or finetune")
        ->required()
        ->check(CLI::IsMember({"frozen", "finetune"}));
    rec->add_option("--out", rec_out, "Output directory")->required();
    rec->add_option("--train-frac", rec_frac, "Subject share reserved for finetuning");
    rec->add_option("--split-seed", rec_split_seed, "Subject split seed");
    rec->add_option("--finetune-lr", rec_opts.learning_rate, "Finetune learning rate");
    rec->add_option("--finetune-epochs", rec_opts.max_epochs, "Finetune epoch cap");
    rec->add_option("--finetune-batch", rec_opts.batch_size, "Finetune batch size");
    rec->add_option("--finetune-patience", rec_opts.patience, "Finetune early-stop patience");
    rec->add_option("--finetune-seed", rec_opts.seed, "Finetune shuffle seed");
    rec->callback([&] {
        run_reconstruct(rec_ckpt, rec_data, rec_direction, rec_setting, rec_out, rec_frac,
                        rec_split_seed, rec_opts);
    });

    auto* prb = app.add_subcommand("probe", "Fit and evaluate a linear probe");
    std::string prb_fps, prb_labels, prb_task, prb_out;
    double prb_l2 = 1e-4, prb_frac = 0.7;
    std::uint64_t prb_seed = 0;
    prb->add_option("--fingerprints", prb_fps, "Fingerprint CSV")->required();
    prb->add_option("--labels", prb_labels, "Label CSV")->required();
    prb->add_option("--task", prb_task, "Probe task")
        ->required()
        ->check(CLI::IsMember({"binary", "multiclass", "regression"}));
    prb->add_option("--out", prb_out, "Report output path")->required();
    prb->add_option("--l2", prb_l2, "L2 penalty");
    prb->add_option("--seed", prb_seed, "Split and fit seed");
    prb->add_option("--train-frac", prb_frac, "Subject share used for fitting");
    prb->callback([&] {
        run_probe(prb_fps, prb_labels, prb_task, prb_out, prb_l2, prb_seed, prb_frac);
    });

    auto* grd = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    std::string grd_config, grd_corrupt;
    std::uint64_t grd_seed = 0;
    std::vector<std::string> grd_sets;
    grd->add_option("--config", grd_config, "Run config file (model and loss sections)");
    grd->add_option("--seed", grd_seed, "Audit seed");
    grd->add_option("--set", grd_sets, "key=value config override (repeatable)");
    grd->add_option("--corrupt-block", grd_corrupt,
                    "Negative control: corrupt this block's reported gradients");
    grd->callback([&] { exit_code = run_gradcheck(grd_config, grd_seed, grd_sets, grd_corrupt); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return exit_code;
}
