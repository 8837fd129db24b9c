#pragma once

// Multi-crop view generation: two global views (one clean, one augmented)
// plus N local views, with per-tier augmentation probabilities. Views are
// normalized 3-channel tensors; greyscale input is replicated to three
// channels before per-channel normalization.

#include <string>
#include <vector>

#include "cxr/config.hpp"
#include "cxr/image.hpp"
#include "cxr/rng.hpp"

namespace cxr::aug {

enum class CropKind { GlobalClean, GlobalAug, Local };

struct CropSpec {
    CropKind kind = CropKind::GlobalClean;
    int out_size = 256;
    double scale_lo = 1.0, scale_hi = 1.0;
    double flip_p = 0.0;
    double rot_degrees = 0.0;
    double autocontrast_p = 0.0;
    double equalize_p = 0.0;
    double blur_p = 0.0;
};

struct NormStats {
    double mean[3] = {0.485, 0.456, 0.406};
    double stddev[3] = {0.229, 0.224, 0.225};
};

struct View {
    CropKind kind;
    int size = 0;
    std::string trace_id;          // e.g. "g0", "l3"
    std::vector<double> chw;       // 3 * size * size, normalized
};

struct MultiCropBatch {
    std::vector<View> globals;  // exactly 2
    std::vector<View> locals;   // configured N
};

struct AugmentPolicy {
    CropSpec global_clean;
    CropSpec global_aug;
    CropSpec local;
    int n_local = 8;
    double blur_sigma_lo = 0.1, blur_sigma_hi = 2.0;
    NormStats norm;

    static AugmentPolicy from_config(const cfg::RunConfig& c);
};

// normalize/denormalize are exact inverses
std::vector<double> normalize(const img::ImageF& im, const NormStats& norm);
img::ImageF denormalize(const std::vector<double>& chw, int size,
                        const NormStats& norm);

// single augmented view (draws from rng as needed)
View make_view(const img::ImageF& image, const CropSpec& spec,
               const AugmentPolicy& policy, Rng& rng, std::string trace_id);

MultiCropBatch make_views(const img::ImageF& image, const AugmentPolicy& policy,
                          Rng& rng);

}  // namespace cxr::aug
