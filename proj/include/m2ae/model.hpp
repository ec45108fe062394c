#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "m2ae/array.hpp"
#include "m2ae/graph.hpp"

namespace m2ae {

struct ModelConfig {
    std::size_t segment_len = 2048;
    std::size_t patch_size = 64;
    std::size_t enc_width = 64;
    std::size_t enc_depth = 2;
    std::size_t dec_width = 32;
    std::size_t dec_depth = 1;
    std::size_t heads = 4;
    double dropout = 0.1;

    std::size_t patches() const { return segment_len / patch_size; }
    void validate() const;
};

// Complementary row partition shared by one batch. In cross-modal mode the
// merged bottleneck takes `visible` rows from the ECG encoder and `masked`
// rows from the PPG encoder (those patches are masked on the ECG side). In
// single-modal mode the sets are literal: `visible` rows reach the encoder,
// `masked` rows are replaced by the trainable mask token before decoding.
struct MaskPlan {
    std::size_t k = 0;
    std::vector<std::size_t> visible;
    std::vector<std::size_t> masked;

    void validate() const;
};

// Draws round(mask_ratio * k) masked rows uniformly without replacement;
// mask_ratio must lie in [0.1, 0.9]. Rounding is half-away-from-zero.
MaskPlan sample_mask_plan(std::size_t k, double mask_ratio, std::uint64_t seed);

enum class Modality { Ecg, Ppg };
const char* modality_prefix(Modality modality);

enum class ParamKind { Weight, Bias, Gamma, Beta, Table };

struct ParamSpec {
    std::string name;
    Shape shape;
    ParamKind kind;
};

// Every learnable parameter of the model, in a fixed deterministic order.
std::vector<ParamSpec> param_layout(const ModelConfig& config);

struct ModelParams {
    ModelConfig config;
    std::map<std::string, Array> values;
};

// Xavier-uniform weights, zero biases, unit/zero layer-norm affines,
// small-normal positional tables and mask tokens.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Rows of the k x s patch matrix are consecutive length-s windows.
Array patchify(const std::vector<double>& samples, std::size_t patch_size);
std::vector<double> unpatchify(const Array& patches);

// Graph builders. Parameters enter the graph as named leaves matching
// param_layout(), so one Bindings map built from ModelParams::values drives
// any composition of these.

// Per-patch normalization, linear projection to enc_width, plus positional
// rows: patches (k x s) -> embedded (k x enc_width).
NodeId embed_patches(Graph& g, NodeId patches, Modality modality, const ModelConfig& config);

// Pre-norm transformer encoder over all supplied rows, final norm and
// bottleneck head. Works on any row count (cross-modal passes all k rows,
// single-modal passes only the visible subset).
NodeId encode_modality(Graph& g, NodeId embedded, Modality modality, const ModelConfig& config);

// embed_patches + encode_modality.
NodeId encode_from_patches(Graph& g, NodeId patches, Modality modality,
                           const ModelConfig& config);

// Row i of the result comes from z_ecg when i is in plan.visible and from
// z_ppg otherwise.
NodeId merge_bottleneck(Graph& g, NodeId z_ecg, NodeId z_ppg, const MaskPlan& plan);

// Projection to dec_width, decoder positional rows, decoder blocks, and the
// per-patch output head: (k x enc_width) -> (k x patch_size).
NodeId decode_modality(Graph& g, NodeId bottleneck, Modality modality,
                       const ModelConfig& config);

// Mean over patch rows: (k x d) -> (1 x d).
NodeId fingerprint(Graph& g, NodeId z);

struct SingleModalNodes {
    NodeId bottleneck;      // |visible| x enc_width
    NodeId reconstruction;  // k x patch_size
};

// Masked-autoencoder forward for one modality: only visible rows are
// encoded; masked rows are re-inserted as the trainable mask token before
// the decoder runs over all k rows.
SingleModalNodes single_modal_forward(Graph& g, NodeId patches, Modality modality,
                                      const ModelConfig& config, const MaskPlan& plan);

// Bindings view of the parameter map, optionally with extra entries merged.
Bindings params_bindings(const ModelParams& params);

struct SingleModalResult {
    Array bottleneck;
    Array reconstruction;
    MaskPlan plan;
};

// Evaluation-mode convenience wrapper over single_modal_forward.
SingleModalResult run_single_modal(const ModelParams& params, const std::vector<double>& segment,
                                   Modality modality, double mask_ratio, std::uint64_t seed);

// Shared binary building blocks (little-endian): the checkpoint format and
// the training-state format are composed from these.
void write_model_config(std::ostream& os, const ModelConfig& config);
ModelConfig read_model_config(std::istream& is);
void write_array_map(std::ostream& os, const std::map<std::string, Array>& values);
std::map<std::string, Array> read_array_map(std::istream& is);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace m2ae
