#pragma once

// ViT backbone with three heads (DINO projection, disease, symptom) used
// for both the teacher and the student. Patch embedding is a strided
// convolution realized as non-overlapping patch extraction + linear map.
// Positional embeddings are bicubically interpolated when the view grid
// differs from the base grid, so 256/128 dual-resolution multi-crop works.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cxr/ad.hpp"
#include "cxr/augment.hpp"
#include "cxr/config.hpp"
#include "cxr/rng.hpp"

namespace cxr::nn {

struct VitConfig {
    int patch_size = 8;
    int embed_dim = 384;
    int depth = 12;
    int heads = 6;
    double ln_eps = 1e-6;
    double drop_path = 0.1;  // 0 for the teacher
    int in_channels = 3;
    int dino_hidden = 2048;
    int dino_bottleneck = 256;
    int dino_out = 65536;
    int head_hidden = 256;
    int pos_grid = 32;  // base positional grid side (global size / patch)

    static VitConfig from_config(const cfg::RunConfig& c, bool student);
    int token_count(int view_size) const;
    void validate() const;
};

struct ForwardOutput {
    ad::Value cls_embedding;   // 1 x embed_dim
    ad::Value dino_logits;     // 1 x dino_out
    ad::Value disease_logits;  // 1 x 3
    ad::Value symptom_logits;  // 1 x 7
    // tokens entering the final block, incl. CLS. Saliency hooks here: the
    // heads read only the CLS row, so the last block's *output* patch rows
    // carry no gradient, while its input receives one through attention.
    ad::Value block_tokens;
    int grid_side = 0;         // patch grid side of this view
};

class VitModel {
public:
    explicit VitModel(VitConfig cfg);

    void init_random(std::uint64_t seed);

    // training=true enables stochastic depth (needs rng)
    ForwardOutput forward(const aug::View& view, bool training = false,
                          Rng* rng = nullptr) const;

    // replaces backbone tensors from a checkpoint archive; heads keep
    // their fresh initialization. Throws listing every mismatched tensor.
    void load_pretrained(const std::string& path);

    const VitConfig& config() const { return cfg_; }
    std::map<std::string, ad::Value>& params() { return params_; }
    const std::map<std::string, ad::Value>& params() const { return params_; }

    // name -> (rows, cols) for shape comparisons
    std::map<std::string, std::pair<std::size_t, std::size_t>> shapes() const;

private:
    VitConfig cfg_;
    std::map<std::string, ad::Value> params_;
    // cached bicubic interpolation matrices keyed by target grid side
    mutable std::map<int, std::vector<double>> pos_interp_cache_;

    ad::Value pos_embedding_for(int grid_side) const;
    const ad::Value& p(const std::string& name) const;
};

// teacher <- m * teacher + (1-m) * student, tensor-wise
void ema_update(VitModel& teacher, const VitModel& student, double momentum);

// bicubic (Catmull-Rom) interpolation matrix mapping a src_side^2 grid to
// a dst_side^2 grid, row-major; exposed for tests
std::vector<double> bicubic_interp_matrix(int src_side, int dst_side);

}  // namespace cxr::nn
