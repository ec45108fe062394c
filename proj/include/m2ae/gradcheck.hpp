#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m2ae/model.hpp"
#include "m2ae/training.hpp"

namespace m2ae {

// Audit setup: reverse-mode gradients of the full training objective are
// compared against central finite differences on a random coordinate sample
// of every parameter block. Mask tokens do not appear in the cross-modal
// graph, so they are audited through the single-modality objectives.
struct GradCheckConfig {
    ModelConfig model;                  // see default_gradcheck_config()
    std::size_t batch = 4;
    std::size_t coords_per_block = 50;  // capped at the block size
    double tolerance = 1e-4;
    double skip_threshold = 1e-7;  // both slopes below this -> coordinate passes
    double noise_floor = 1e-8;     // abs deviation below central-difference roundoff passes
    double fd_step = 1e-5;
    double mask_ratio = 0.5;
    LossWeights weights;
    std::uint64_t seed = 0;
    std::string corrupt_block;  // test hook: falsify this block's gradient

    void validate() const;
};

// Full desk widths and depths; the segment is shortened so the
// finite-difference probes stay affordable.
GradCheckConfig default_gradcheck_config();

struct BlockCheck {
    std::string name;
    std::size_t coords = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<BlockCheck> blocks;  // every parameter block exactly once
    bool passed = true;
    double worst_rel_error = 0.0;
    std::string worst_block;

    std::string to_text() const;  // one line per block plus a verdict line
};

GradCheckReport run_gradcheck(const GradCheckConfig& config);

}  // namespace m2ae
