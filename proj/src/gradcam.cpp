#include "cxr/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cxr/manifest.hpp"

namespace cxr::explain {

namespace {

// bilinear sample with half-pixel centers and edge clamping
double sample_grid(const std::vector<double>& grid, int gw, int gh, double gx,
                   double gy) {
    const int x0 = static_cast<int>(std::floor(gx));
    const int y0 = static_cast<int>(std::floor(gy));
    const double fx = gx - x0, fy = gy - y0;
    auto at = [&](int y, int x) {
        x = std::clamp(x, 0, gw - 1);
        y = std::clamp(y, 0, gh - 1);
        return grid[static_cast<std::size_t>(y) * gw + x];
    };
    const double top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
    const double bot = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

void minmax_normalize(std::vector<double>& v) {
    const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx - mn <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);  // degenerate constant map
        return;
    }
    for (double& x : v) x = (x - mn) / (mx - mn);
}

}  // namespace

SaliencyMap cam_from_patch_tokens(const std::vector<double>& activations,
                                  const std::vector<double>& gradients,
                                  std::size_t n_patches, std::size_t cols,
                                  int grid_side, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0)
        throw std::invalid_argument("cam: non-positive output size");
    if (activations.size() != n_patches * cols ||
        static_cast<std::size_t>(grid_side) * grid_side != n_patches)
        throw std::invalid_argument("cam: shape mismatch");

    // per-channel weights: mean gradient over patch tokens
    std::vector<double> alpha(cols, 0.0);
    if (gradients.size() == activations.size()) {
        for (std::size_t t = 0; t < n_patches; ++t)
            for (std::size_t c = 0; c < cols; ++c)
                alpha[c] += gradients[t * cols + c];
        for (double& a : alpha) a /= static_cast<double>(n_patches);
    }

    SaliencyMap m;
    m.grid_w = m.grid_h = grid_side;
    m.grid.resize(n_patches);
    for (std::size_t t = 0; t < n_patches; ++t) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            s += alpha[c] * activations[t * cols + c];
        m.grid[t] = std::max(0.0, s);
    }
    minmax_normalize(m.grid);

    m.width = out_w;
    m.height = out_h;
    m.map.resize(static_cast<std::size_t>(out_w) * out_h);
    for (int y = 0; y < out_h; ++y) {
        const double gy = (y + 0.5) * m.grid_h / static_cast<double>(out_h) - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const double gx =
                (x + 0.5) * m.grid_w / static_cast<double>(out_w) - 0.5;
            m.map[static_cast<std::size_t>(y) * out_w + x] =
                sample_grid(m.grid, m.grid_w, m.grid_h, gx, gy);
        }
    }
    return m;
}

SaliencyMap grad_cam(const nn::VitModel& model, const aug::View& view,
                     int symptom_index, int out_w, int out_h) {
    if (symptom_index < 0 || symptom_index >= data::kNumSymptoms)
        throw std::invalid_argument("grad_cam: symptom index out of range");

    const nn::ForwardOutput out = model.forward(view, /*training=*/false);
    ad::backward(ad::pick(out.symptom_logits, 0,
                          static_cast<std::size_t>(symptom_index)));

    const ad::Value& tokens = out.block_tokens;
    const std::size_t cols = tokens->cols;
    const std::size_t n_patches = tokens->rows - 1;  // row 0 is the class token
    std::vector<double> acts(tokens->data.begin() + cols, tokens->data.end());
    std::vector<double> grads;
    if (tokens->grad.size() == tokens->data.size())
        grads.assign(tokens->grad.begin() + cols, tokens->grad.end());

    SaliencyMap m = cam_from_patch_tokens(acts, grads, n_patches, cols,
                                          out.grid_side, out_w, out_h);
    m.symptom_index = symptom_index;
    return m;
}

OverlapScore overlap(const SaliencyMap& map, const Box& box, double binarize_q) {
    if (binarize_q <= 0.0 || binarize_q >= 1.0)
        throw std::invalid_argument("overlap: quantile outside (0,1)");
    if (box.w <= 0 || box.h <= 0 || box.x < 0 || box.y < 0 ||
        box.x + box.w > map.width || box.y + box.h > map.height)
        throw std::invalid_argument("overlap: box outside the image");
    if (map.map.empty()) throw std::invalid_argument("overlap: empty map");

    OverlapScore score;
    const double mx = *std::max_element(map.map.begin(), map.map.end());
    if (mx <= 0.0) return score;  // all-zero map: iou undefined, no hit

    // pointing game: first argmax pixel in row-major order
    const std::size_t arg =
        std::max_element(map.map.begin(), map.map.end()) - map.map.begin();
    const int ay = static_cast<int>(arg) / map.width;
    const int ax = static_cast<int>(arg) % map.width;
    score.pointing_hit = ax >= box.x && ax < box.x + box.w && ay >= box.y &&
                         ay < box.y + box.h;

    // q-quantile threshold over all pixels (nearest-rank below); strictly
    // positive so zero background never joins the saliency region
    std::vector<double> sorted = map.map;
    std::sort(sorted.begin(), sorted.end());
    const double thresh = std::max(
        sorted[static_cast<std::size_t>(binarize_q * (sorted.size() - 1))],
        1e-12);

    std::size_t inter = 0, uni = 0;
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            const bool sal =
                map.map[static_cast<std::size_t>(y) * map.width + x] >= thresh;
            const bool in_box = x >= box.x && x < box.x + box.w && y >= box.y &&
                                y < box.y + box.h;
            if (sal && in_box) ++inter;
            if (sal || in_box) ++uni;
        }
    if (uni == 0) return score;
    score.iou = static_cast<double>(inter) / static_cast<double>(uni);
    score.iou_defined = true;
    return score;
}

std::vector<std::uint8_t> render_overlay(const img::Image& image,
                                         const SaliencyMap& map,
                                         const std::optional<Box>& box,
                                         double alpha) {
    if (image.width != map.width || image.height != map.height)
        throw std::invalid_argument("render_overlay: image/map size mismatch");
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("render_overlay: alpha outside [0,1]");

    auto heat = [](double v, int channel) {
        // jet-style ramp: blue -> cyan -> yellow -> red
        const double center = channel == 0 ? 3.0 : (channel == 1 ? 2.0 : 1.0);
        const double c = std::clamp(1.5 - std::abs(4.0 * v - center), 0.0, 1.0);
        return c * 255.0;
    };

    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(image.width) *
                                  image.height * 3);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const std::size_t i =
                (static_cast<std::size_t>(y) * image.width + x);
            const double grey = image.pixels[i];
            const double v = map.map[i];
            for (int c = 0; c < 3; ++c) {
                // untouched source where saliency is zero
                const double out =
                    v > 0.0 ? (1.0 - alpha) * grey + alpha * heat(v, c) : grey;
                rgb[i * 3 + c] = static_cast<std::uint8_t>(
                    std::clamp(std::lround(out), 0L, 255L));
            }
        }

    if (box) {
        const int x0 = std::clamp(box->x, 0, image.width - 1);
        const int y0 = std::clamp(box->y, 0, image.height - 1);
        const int x1 = std::clamp(box->x + box->w - 1, 0, image.width - 1);
        const int y1 = std::clamp(box->y + box->h - 1, 0, image.height - 1);
        auto set_green = [&](int y, int x) {
            const std::size_t i =
                (static_cast<std::size_t>(y) * image.width + x) * 3;
            rgb[i] = 0;
            rgb[i + 1] = 255;
            rgb[i + 2] = 0;
        };
        for (int x = x0; x <= x1; ++x) {
            set_green(y0, x);
            set_green(y1, x);
        }
        for (int y = y0; y <= y1; ++y) {
            set_green(y, x0);
            set_green(y, x1);
        }
    }
    return rgb;
}

void write_overlay_png(const std::string& path, const img::Image& image,
                       const SaliencyMap& map, const std::optional<Box>& box,
                       double alpha) {
    img::write_png_rgb(path, image.width, image.height,
                       render_overlay(image, map, box, alpha));
}

}  // namespace cxr::explain
