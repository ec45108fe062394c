#include "m2ae/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "m2ae/errors.hpp"

namespace m2ae {

void DataSplitConfig::validate() const {
    if (!(train_frac > 0.0) || !(valid_frac > 0.0) || !(test_frac > 0.0))
        throw ConfigError("split fractions must be positive");
    if (std::abs(train_frac + valid_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    loss.validate();
    if (!(augment.warp_step_std >= 0.0) || !(augment.noise_std >= 0.0))
        throw ConfigError("augmentation strengths must be non-negative");
    data.validate();
}

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_real(const std::string& value, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v))
        throw ConfigError("malformed value for " + key + ": " + value);
    return v;
}

std::size_t parse_count(const std::string& value, const std::string& key) {
    if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("malformed value for " + key + ": " + value);
    return static_cast<std::size_t>(std::strtoull(value.c_str(), nullptr, 10));
}

std::uint64_t parse_seed(const std::string& value, const std::string& key) {
    if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("malformed value for " + key + ": " + value);
    return std::strtoull(value.c_str(), nullptr, 10);
}

void apply_key(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "model.segment_len") c.model.segment_len = parse_count(value, key);
    else if (key == "model.patch_size") c.model.patch_size = parse_count(value, key);
    else if (key == "model.enc_width") c.model.enc_width = parse_count(value, key);
    else if (key == "model.enc_depth") c.model.enc_depth = parse_count(value, key);
    else if (key == "model.dec_width") c.model.dec_width = parse_count(value, key);
    else if (key == "model.dec_depth") c.model.dec_depth = parse_count(value, key);
    else if (key == "model.heads") c.model.heads = parse_count(value, key);
    else if (key == "model.dropout") c.model.dropout = parse_real(value, key);
    else if (key == "train.batch_size") c.train.batch_size = parse_count(value, key);
    else if (key == "train.learning_rate") c.train.learning_rate = parse_real(value, key);
    else if (key == "train.scheduler_factor") c.train.scheduler_factor = parse_real(value, key);
    else if (key == "train.scheduler_patience") c.train.scheduler_patience = parse_count(value, key);
    else if (key == "train.early_stop_patience") c.train.early_stop_patience = parse_count(value, key);
    else if (key == "train.max_epochs") c.train.max_epochs = parse_count(value, key);
    else if (key == "train.mask_ratio_lo") c.train.mask_ratio_lo = parse_real(value, key);
    else if (key == "train.mask_ratio_hi") c.train.mask_ratio_hi = parse_real(value, key);
    else if (key == "train.seed") c.train.seed = parse_seed(value, key);
    else if (key == "train.mode") c.train.mode = parse_train_mode(value);
    else if (key == "loss.lambda") c.loss.lambda = parse_real(value, key);
    else if (key == "loss.tau") c.loss.tau = parse_real(value, key);
    else if (key == "augment.warp_step_std") c.augment.warp_step_std = parse_real(value, key);
    else if (key == "augment.noise_std") c.augment.noise_std = parse_real(value, key);
    else if (key == "data.train_frac") c.data.train_frac = parse_real(value, key);
    else if (key == "data.valid_frac") c.data.valid_frac = parse_real(value, key);
    else if (key == "data.test_frac") c.data.test_frac = parse_real(value, key);
    else if (key == "data.split_seed") c.data.split_seed = parse_seed(value, key);
    else throw ConfigError("unknown config key: " + key);
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got: " + text);
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key in: " + text);
    return {key, value};
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            const auto [key, value] = split_assignment(line);
            if (!seen.insert(key).second) throw ConfigError("repeated config key: " + key);
            apply_key(config, key, value);
        } catch (const ConfigError& err) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + err.what());
        }
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

void apply_config_override(RunConfig& config, const std::string& assignment) {
    const auto [key, value] = split_assignment(trim(assignment));
    apply_key(config, key, value);
}

namespace {

std::string real_text(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string run_config_to_text(const RunConfig& c) {
    std::ostringstream out;
    out << "model.segment_len=" << c.model.segment_len << '\n'
        << "model.patch_size=" << c.model.patch_size << '\n'
        << "model.enc_width=" << c.model.enc_width << '\n'
        << "model.enc_depth=" << c.model.enc_depth << '\n'
        << "model.dec_width=" << c.model.dec_width << '\n'
        << "model.dec_depth=" << c.model.dec_depth << '\n'
        << "model.heads=" << c.model.heads << '\n'
        << "model.dropout=" << real_text(c.model.dropout) << '\n'
        << "train.batch_size=" << c.train.batch_size << '\n'
        << "train.learning_rate=" << real_text(c.train.learning_rate) << '\n'
        << "train.scheduler_factor=" << real_text(c.train.scheduler_factor) << '\n'
        << "train.scheduler_patience=" << c.train.scheduler_patience << '\n'
        << "train.early_stop_patience=" << c.train.early_stop_patience << '\n'
        << "train.max_epochs=" << c.train.max_epochs << '\n'
        << "train.mask_ratio_lo=" << real_text(c.train.mask_ratio_lo) << '\n'
        << "train.mask_ratio_hi=" << real_text(c.train.mask_ratio_hi) << '\n'
        << "train.seed=" << c.train.seed << '\n'
        << "train.mode=" << train_mode_name(c.train.mode) << '\n'
        << "loss.lambda=" << real_text(c.loss.lambda) << '\n'
        << "loss.tau=" << real_text(c.loss.tau) << '\n'
        << "augment.warp_step_std=" << real_text(c.augment.warp_step_std) << '\n'
        << "augment.noise_std=" << real_text(c.augment.noise_std) << '\n'
        << "data.train_frac=" << real_text(c.data.train_frac) << '\n'
        << "data.valid_frac=" << real_text(c.data.valid_frac) << '\n'
        << "data.test_frac=" << real_text(c.data.test_frac) << '\n'
        << "data.split_seed=" << c.data.split_seed << '\n';
    return out.str();
}

}  // namespace m2ae
