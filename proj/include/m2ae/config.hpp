#pragma once

#include <string>

#include "m2ae/augment.hpp"
#include "m2ae/model.hpp"
#include "m2ae/training.hpp"

namespace m2ae {

// Subject-level split fractions and seed used when a command needs to carve
// a dataset into train/valid/test.
struct DataSplitConfig {
    double train_frac = 0.8;
    double valid_frac = 0.1;
    double test_frac = 0.1;
    std::uint64_t split_seed = 0;

    void validate() const;
};

// Everything a run file can set, grouped by the owning module. Defaults
// equal each struct's defaults, so an empty file is a valid config.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    LossWeights loss;
    AugmentConfig augment;
    DataSplitConfig data;

    void validate() const;
};

// One key=value per line; blank lines and text after '#' are ignored.
// Keys are dotted (model.*, train.*, loss.*, augment.*, data.*); unknown or
// repeated keys and malformed values are hard errors.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// A single key=value override (the --set flag). Unknown keys are hard
// errors; the result is not re-validated here since overrides may be
// applied in sequence.
void apply_config_override(RunConfig& config, const std::string& assignment);

// key=value rendering of every setting, parseable by parse_run_config.
std::string run_config_to_text(const RunConfig& config);

}  // namespace m2ae
