#pragma once

// Grad-CAM saliency from the final transformer block for a chosen
// symptom logit, plus box-agreement scoring (quantile-binarized IoU and
// the pointing game) and overlay rendering.

#include <optional>
#include <string>
#include <vector>

#include "cxr/image.hpp"
#include "cxr/vit.hpp"

namespace cxr::explain {

struct SaliencyMap {
    int grid_w = 0, grid_h = 0;
    std::vector<double> grid;  // patch-level map before upsampling
    int width = 0, height = 0;
    std::vector<double> map;  // upsampled, min-max normalized to [0,1]
    int symptom_index = -1;
    std::string image_id;
};

struct Box {
    int x = 0, y = 0, w = 0, h = 0;
};

struct OverlapScore {
    double iou = 0.0;
    bool iou_defined = false;
    bool pointing_hit = false;
};

// Patch-token activations A at the final block output (class token
// excluded), gradients g of the chosen logit w.r.t. A; channel weights
// are token-means of g; map = ReLU(sum_c alpha_c A_c), min-max
// normalized, bilinearly upsampled to (out_w, out_h). Constant maps
// normalize to all-zeros.
SaliencyMap grad_cam(const nn::VitModel& model, const aug::View& view,
                     int symptom_index, int out_w, int out_h);

// The CAM arithmetic on raw patch-token activations/gradients (class token
// already excluded), both n_patches x cols row-major. Exposed for the
// analytic-construction tests; grad_cam delegates here.
SaliencyMap cam_from_patch_tokens(const std::vector<double>& activations,
                                  const std::vector<double>& gradients,
                                  std::size_t n_patches, std::size_t cols,
                                  int grid_side, int out_w, int out_h);

// binarize the map at its q-quantile, intersect with the box
OverlapScore overlap(const SaliencyMap& map, const Box& box,
                     double binarize_q = 0.9);

// heat-colormapped saliency alpha-blended over the radiograph with the
// box drawn as a green rectangle; zero-saliency pixels keep the source
std::vector<std::uint8_t> render_overlay(const img::Image& image,
                                         const SaliencyMap& map,
                                         const std::optional<Box>& box,
                                         double alpha = 0.4);

void write_overlay_png(const std::string& path, const img::Image& image,
                       const SaliencyMap& map, const std::optional<Box>& box,
                       double alpha = 0.4);

}  // namespace cxr::explain
