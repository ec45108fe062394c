#include "m2ae/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "m2ae/errors.hpp"
#include "m2ae/io_util.hpp"
#include "m2ae/rng.hpp"

namespace m2ae {

void ModelConfig::validate() const {
    if (segment_len == 0 || patch_size == 0) throw ConfigError("segment_len and patch_size must be positive");
    if (segment_len % patch_size != 0) throw ConfigError("segment_len must be divisible by patch_size");
    if (enc_width == 0 || dec_width == 0 || enc_depth == 0 || dec_depth == 0 || heads == 0) {
        throw ConfigError("model dimensions must be positive");
    }
    if (enc_width % heads != 0) throw ConfigError("enc_width must be divisible by heads");
    if (dec_width % heads != 0) throw ConfigError("dec_width must be divisible by heads");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

void MaskPlan::validate() const {
    std::vector<char> seen(k, 0);
    auto mark = [&](const std::vector<std::size_t>& rows) {
        for (std::size_t r : rows) {
            if (r >= k) throw ConfigError("mask plan row out of range");
            if (seen[r]) throw ConfigError("mask plan rows overlap");
            seen[r] = 1;
        }
    };
    mark(visible);
    mark(masked);
    if (visible.size() + masked.size() != k) throw ConfigError("mask plan does not cover all rows");
}

MaskPlan sample_mask_plan(std::size_t k, double mask_ratio, std::uint64_t seed) {
    if (k == 0) throw ConfigError("mask plan needs at least one row");
    if (!(mask_ratio >= 0.1 && mask_ratio <= 0.9)) {
        throw ConfigError("mask_ratio must lie in [0.1, 0.9]");
    }
    auto n_masked = static_cast<std::size_t>(
        std::llround(mask_ratio * static_cast<double>(k)));
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    MaskPlan plan;
    plan.k = k;
    plan.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_masked));
    plan.visible.assign(order.begin() + static_cast<std::ptrdiff_t>(n_masked), order.end());
    std::sort(plan.masked.begin(), plan.masked.end());
    std::sort(plan.visible.begin(), plan.visible.end());
    return plan;
}

const char* modality_prefix(Modality modality) {
    return modality == Modality::Ecg ? "ecg" : "ppg";
}

namespace {

void push_dense(std::vector<ParamSpec>& out, const std::string& base, std::size_t in,
                std::size_t n) {
    out.push_back({base + ".w", {in, n}, ParamKind::Weight});
    out.push_back({base + ".b", {1, n}, ParamKind::Bias});
}

void push_norm(std::vector<ParamSpec>& out, const std::string& base, std::size_t n) {
    out.push_back({base + ".gamma", {1, n}, ParamKind::Gamma});
    out.push_back({base + ".beta", {1, n}, ParamKind::Beta});
}

void push_block(std::vector<ParamSpec>& out, const std::string& base, std::size_t width) {
    push_norm(out, base + ".ln1", width);
    push_dense(out, base + ".attn.q", width, width);
    push_dense(out, base + ".attn.k", width, width);
    push_dense(out, base + ".attn.v", width, width);
    push_dense(out, base + ".attn.out", width, width);
    push_norm(out, base + ".ln2", width);
    push_dense(out, base + ".ffn.l1", width, 4 * width);
    push_dense(out, base + ".ffn.l2", 4 * width, width);
}

}  // namespace

std::vector<ParamSpec> param_layout(const ModelConfig& config) {
    config.validate();
    const std::size_t k = config.patches();
    std::vector<ParamSpec> out;
    for (Modality m : {Modality::Ecg, Modality::Ppg}) {
        const std::string mod = modality_prefix(m);
        push_norm(out, mod + ".patch_norm", config.patch_size);
        push_dense(out, mod + ".patch_proj", config.patch_size, config.enc_width);
        out.push_back({mod + ".pos_enc", {k, config.enc_width}, ParamKind::Table});
        for (std::size_t i = 0; i < config.enc_depth; ++i) {
            push_block(out, mod + ".enc.block" + std::to_string(i), config.enc_width);
        }
        push_norm(out, mod + ".enc.final_ln", config.enc_width);
        push_dense(out, mod + ".enc.head", config.enc_width, config.enc_width);
        push_dense(out, mod + ".dec.proj", config.enc_width, config.dec_width);
        out.push_back({mod + ".pos_dec", {k, config.dec_width}, ParamKind::Table});
        out.push_back({mod + ".mask_token", {1, config.dec_width}, ParamKind::Table});
        for (std::size_t i = 0; i < config.dec_depth; ++i) {
            push_block(out, mod + ".dec.block" + std::to_string(i), config.dec_width);
        }
        push_norm(out, mod + ".dec.final_ln", config.dec_width);
        push_dense(out, mod + ".dec.head", config.dec_width, config.patch_size);
    }
    return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams params;
    params.config = config;
    Rng rng(mix_seed(0x4d32414bull, seed));
    for (const ParamSpec& spec : param_layout(config)) {
        std::size_t count = 1;
        for (std::size_t e : spec.shape) count *= e;
        std::vector<double> data(count, 0.0);
        switch (spec.kind) {
            case ParamKind::Weight: {
                double fan_in = static_cast<double>(spec.shape[0]);
                double fan_out = static_cast<double>(spec.shape[1]);
                double bound = std::sqrt(6.0 / (fan_in + fan_out));
                for (double& v : data) v = rng.uniform(-bound, bound);
                break;
            }
            case ParamKind::Table:
                for (double& v : data) v = 0.02 * rng.normal(0.0, 1.0);
                break;
            case ParamKind::Gamma:
                std::fill(data.begin(), data.end(), 1.0);
                break;
            case ParamKind::Bias:
            case ParamKind::Beta:
                break;
        }
        params.values.emplace(spec.name, Array(spec.shape, std::move(data)));
    }
    return params;
}

Array patchify(const std::vector<double>& samples, std::size_t patch_size) {
    if (patch_size == 0) throw ShapeError("patch_size must be positive");
    if (samples.empty() || samples.size() % patch_size != 0) {
        throw ShapeError("signal length must be a positive multiple of patch_size");
    }
    std::size_t k = samples.size() / patch_size;
    return Array({k, patch_size}, std::vector<double>(samples));
}

std::vector<double> unpatchify(const Array& patches) {
    if (patches.shape().size() != 2) throw ShapeError("unpatchify expects a rank-2 array");
    return patches.values();
}

namespace {

NodeId dense(Graph& g, NodeId x, const std::string& base, std::size_t in, std::size_t out) {
    NodeId w = g.leaf(base + ".w", {in, out});
    NodeId b = g.leaf(base + ".b", {1, out});
    return g.add(g.matmul(x, w), b);
}

NodeId layer_norm(Graph& g, NodeId x, const std::string& base, std::size_t width) {
    return g.row_norm(x, g.leaf(base + ".gamma", {1, width}), g.leaf(base + ".beta", {1, width}));
}

NodeId attention(Graph& g, NodeId x, const std::string& base, std::size_t width,
                 std::size_t heads, double drop) {
    const std::size_t head_dim = width / heads;
    NodeId qt = g.transpose(dense(g, x, base + ".q", width, width));
    NodeId kt = g.transpose(dense(g, x, base + ".k", width, width));
    NodeId vt = g.transpose(dense(g, x, base + ".v", width, width));
    std::vector<NodeId> merged_t;
    for (std::size_t h = 0; h < heads; ++h) {
        std::vector<std::size_t> cols(head_dim);
        std::iota(cols.begin(), cols.end(), h * head_dim);
        NodeId qh = g.transpose(g.gather_rows(qt, cols));
        NodeId kh_t = g.gather_rows(kt, cols);
        NodeId scores = g.scalar_mul(g.matmul(qh, kh_t), 1.0 / std::sqrt(static_cast<double>(head_dim)));
        NodeId attn = g.dropout(g.softmax(scores), drop);
        NodeId vh = g.transpose(g.gather_rows(vt, cols));
        merged_t.push_back(g.transpose(g.matmul(attn, vh)));
    }
    NodeId merged = g.transpose(g.concat_rows(merged_t));
    return dense(g, merged, base + ".out", width, width);
}

NodeId feed_forward(Graph& g, NodeId x, const std::string& base, std::size_t width, double drop) {
    NodeId hidden = g.gelu(dense(g, x, base + ".l1", width, 4 * width));
    hidden = g.dropout(hidden, drop);
    return dense(g, hidden, base + ".l2", 4 * width, width);
}

NodeId transformer_block(Graph& g, NodeId x, const std::string& base, std::size_t width,
                         std::size_t heads, double drop) {
    x = g.add(x, attention(g, layer_norm(g, x, base + ".ln1", width), base + ".attn", width,
                           heads, drop));
    x = g.add(x, feed_forward(g, layer_norm(g, x, base + ".ln2", width), base + ".ffn", width,
                              drop));
    return x;
}

NodeId decoder_stack(Graph& g, NodeId h, const std::string& mod, const ModelConfig& config) {
    const std::size_t k = config.patches();
    h = g.add(h, g.leaf(mod + ".pos_dec", {k, config.dec_width}));
    for (std::size_t i = 0; i < config.dec_depth; ++i) {
        h = transformer_block(g, h, mod + ".dec.block" + std::to_string(i), config.dec_width,
                              config.heads, config.dropout);
    }
    h = layer_norm(g, h, mod + ".dec.final_ln", config.dec_width);
    return dense(g, h, mod + ".dec.head", config.dec_width, config.patch_size);
}

}  // namespace

NodeId embed_patches(Graph& g, NodeId patches, Modality modality, const ModelConfig& config) {
    config.validate();
    const std::string mod = modality_prefix(modality);
    const std::size_t k = config.patches();
    NodeId normed = layer_norm(g, patches, mod + ".patch_norm", config.patch_size);
    NodeId projected = dense(g, normed, mod + ".patch_proj", config.patch_size, config.enc_width);
    return g.add(projected, g.leaf(mod + ".pos_enc", {k, config.enc_width}));
}

NodeId encode_modality(Graph& g, NodeId embedded, Modality modality, const ModelConfig& config) {
    config.validate();
    const std::string mod = modality_prefix(modality);
    NodeId h = embedded;
    for (std::size_t i = 0; i < config.enc_depth; ++i) {
        h = transformer_block(g, h, mod + ".enc.block" + std::to_string(i), config.enc_width,
                              config.heads, config.dropout);
    }
    h = layer_norm(g, h, mod + ".enc.final_ln", config.enc_width);
    return dense(g, h, mod + ".enc.head", config.enc_width, config.enc_width);
}

NodeId encode_from_patches(Graph& g, NodeId patches, Modality modality,
                           const ModelConfig& config) {
    return encode_modality(g, embed_patches(g, patches, modality, config), modality, config);
}

NodeId merge_bottleneck(Graph& g, NodeId z_ecg, NodeId z_ppg, const MaskPlan& plan) {
    plan.validate();
    const Shape& se = g.shape_of(z_ecg);
    const Shape& sp = g.shape_of(z_ppg);
    if (se != sp || se.size() != 2 || se[0] != plan.k) {
        throw ShapeError("merge inputs must both be k x d with k matching the plan");
    }
    if (plan.masked.empty()) return z_ecg;
    if (plan.visible.empty()) return z_ppg;
    NodeId from_ecg = g.scatter_rows(g.gather_rows(z_ecg, plan.visible), plan.visible, plan.k);
    NodeId from_ppg = g.scatter_rows(g.gather_rows(z_ppg, plan.masked), plan.masked, plan.k);
    return g.add(from_ecg, from_ppg);
}

NodeId decode_modality(Graph& g, NodeId bottleneck, Modality modality,
                       const ModelConfig& config) {
    config.validate();
    const std::string mod = modality_prefix(modality);
    NodeId h = dense(g, bottleneck, mod + ".dec.proj", config.enc_width, config.dec_width);
    return decoder_stack(g, h, mod, config);
}

NodeId fingerprint(Graph& g, NodeId z) { return g.reduce_mean(z, 0); }

SingleModalNodes single_modal_forward(Graph& g, NodeId patches, Modality modality,
                                      const ModelConfig& config, const MaskPlan& plan) {
    config.validate();
    plan.validate();
    if (plan.k != config.patches()) throw ShapeError("mask plan size does not match patch count");
    if (plan.masked.empty()) throw ConfigError("single-modal forward needs at least one masked row");
    if (plan.visible.empty()) throw ConfigError("single-modal forward needs at least one visible row");
    const std::string mod = modality_prefix(modality);

    NodeId embedded = embed_patches(g, patches, modality, config);
    NodeId visible = g.gather_rows(embedded, plan.visible);
    NodeId z = encode_modality(g, visible, modality, config);

    NodeId projected = dense(g, z, mod + ".dec.proj", config.enc_width, config.dec_width);
    NodeId token = g.leaf(mod + ".mask_token", {1, config.dec_width});
    NodeId ones = g.constant(Array::full({plan.masked.size(), 1}, 1.0));
    NodeId token_rows = g.matmul(ones, token);
    NodeId full = g.add(g.scatter_rows(projected, plan.visible, plan.k),
                        g.scatter_rows(token_rows, plan.masked, plan.k));
    SingleModalNodes out;
    out.bottleneck = z;
    out.reconstruction = decoder_stack(g, full, mod, config);
    return out;
}

Bindings params_bindings(const ModelParams& params) {
    return Bindings(params.values.begin(), params.values.end());
}

SingleModalResult run_single_modal(const ModelParams& params, const std::vector<double>& segment,
                                   Modality modality, double mask_ratio, std::uint64_t seed) {
    const ModelConfig& cfg = params.config;
    if (segment.size() != cfg.segment_len) throw ShapeError("segment length does not match config");
    SingleModalResult result;
    result.plan = sample_mask_plan(cfg.patches(), mask_ratio, seed);
    Graph g;
    NodeId patches = g.leaf("input.patches", {cfg.patches(), cfg.patch_size});
    SingleModalNodes nodes = single_modal_forward(g, patches, modality, cfg, result.plan);
    Bindings bindings = params_bindings(params);
    bindings.emplace("input.patches", patchify(segment, cfg.patch_size));
    result.reconstruction = g.evaluate(nodes.reconstruction, bindings);
    result.bottleneck = g.value_of(nodes.bottleneck);
    return result;
}

namespace {

constexpr char kCheckpointMagic[4] = {'M', '2', 'C', 'K'};
constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace

void write_model_config(std::ostream& os, const ModelConfig& c) {
    write_u32(os, static_cast<std::uint32_t>(c.segment_len));
    write_u32(os, static_cast<std::uint32_t>(c.patch_size));
    write_u32(os, static_cast<std::uint32_t>(c.enc_width));
    write_u32(os, static_cast<std::uint32_t>(c.enc_depth));
    write_u32(os, static_cast<std::uint32_t>(c.dec_width));
    write_u32(os, static_cast<std::uint32_t>(c.dec_depth));
    write_u32(os, static_cast<std::uint32_t>(c.heads));
    write_f64(os, c.dropout);
}

ModelConfig read_model_config(std::istream& is) {
    ModelConfig c;
    c.segment_len = read_u32(is, "segment_len");
    c.patch_size = read_u32(is, "patch_size");
    c.enc_width = read_u32(is, "enc_width");
    c.enc_depth = read_u32(is, "enc_depth");
    c.dec_width = read_u32(is, "dec_width");
    c.dec_depth = read_u32(is, "dec_depth");
    c.heads = read_u32(is, "heads");
    c.dropout = read_f64(is, "dropout");
    return c;
}

void write_array_map(std::ostream& os, const std::map<std::string, Array>& values) {
    write_u32(os, static_cast<std::uint32_t>(values.size()));
    for (const auto& [name, value] : values) {
        write_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u8(os, static_cast<std::uint8_t>(value.shape().size()));
        for (std::size_t e : value.shape()) write_u32(os, static_cast<std::uint32_t>(e));
        for (double v : value.values()) write_f64(os, v);
    }
}

std::map<std::string, Array> read_array_map(std::istream& is) {
    std::map<std::string, Array> values;
    std::uint32_t count = read_u32(is, "array count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = read_u16(is, "array name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (is.gcount() != name_len) throw IoError("truncated file while reading array name");
        std::uint8_t rank = read_u8(is, "array rank");
        Shape shape(rank);
        std::size_t total = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            shape[d] = read_u32(is, "array extent");
            total *= shape[d];
        }
        std::vector<double> data(total);
        for (double& v : data) v = read_f64(is, "array data");
        values.emplace(std::move(name), Array(std::move(shape), std::move(data)));
    }
    return values;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    params.config.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, 4);
    write_u16(os, kCheckpointVersion);
    write_model_config(os, params.config);
    write_array_map(os, params.values);
    if (!os) throw IoError("failed while writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::string(magic, 4) != std::string(kCheckpointMagic, 4)) {
        throw IoError("not a checkpoint file: " + path);
    }
    std::uint16_t version = read_u16(is, "checkpoint version");
    if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version");
    ModelParams params;
    params.config = read_model_config(is);
    params.config.validate();
    params.values = read_array_map(is);

    std::vector<ParamSpec> layout = param_layout(params.config);
    if (layout.size() != params.values.size()) {
        throw IoError("checkpoint parameter set does not match its config");
    }
    for (const ParamSpec& spec : layout) {
        auto it = params.values.find(spec.name);
        if (it == params.values.end()) throw IoError("checkpoint missing parameter " + spec.name);
        if (it->second.shape() != spec.shape) {
            throw IoError("checkpoint parameter has wrong shape: " + spec.name);
        }
    }
    return params;
}

}  // namespace m2ae
