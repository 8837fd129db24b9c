#include "cxr/qc.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace cxr::qc {

std::string to_string(RejectReason r) {
    switch (r) {
        case RejectReason::None: return "NONE";
        case RejectReason::FractionLow: return "FRACTION_LOW";
        case RejectReason::FractionHigh: return "FRACTION_HIGH";
        case RejectReason::Contours: return "CONTOURS";
    }
    throw std::logic_error("bad RejectReason");
}

LungMask ThresholdMaskProvider::provide(const img::Image& image) {
    if (image.width <= 0 || image.height <= 0)
        throw std::runtime_error("mask provider: empty image");
    // downscale to the provider working size
    img::ImageF small =
        img::resize_bilinear(img::to_float(image), working_size_, working_size_);
    LungMask work{working_size_, working_size_, {}};
    work.grid.resize(static_cast<std::size_t>(working_size_) * working_size_);
    for (std::size_t i = 0; i < work.grid.size(); ++i)
        work.grid[i] = small.pixels[i] > static_cast<float>(threshold_) ? 1 : 0;
    return upsample_nearest(work, image.width, image.height);
}

LungMask upsample_nearest(const LungMask& mask, int out_w, int out_h) {
    LungMask out{out_w, out_h, {}};
    out.grid.resize(static_cast<std::size_t>(out_w) * out_h);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::min(
            mask.height - 1, static_cast<int>((y + 0.5) * mask.height / out_h));
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(
                mask.width - 1, static_cast<int>((x + 0.5) * mask.width / out_w));
            out.grid[static_cast<std::size_t>(y) * out_w + x] = mask.at(sy, sx);
        }
    }
    return out;
}

std::vector<Contour> find_contours(const LungMask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<Contour> contours;
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            if (!mask.at(y0, x0) || label[y0 * w + x0] >= 0) continue;
            const int id = static_cast<int>(contours.size());
            Contour c;
            c.min_x = c.max_x = x0;
            c.min_y = c.max_y = y0;
            c.top_left_row = y0;
            c.top_left_col = x0;
            stack.clear();
            stack.emplace_back(y0, x0);
            label[y0 * w + x0] = id;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                ++c.area;
                c.min_x = std::min(c.min_x, x);
                c.max_x = std::max(c.max_x, x);
                c.min_y = std::min(c.min_y, y);
                c.max_y = std::max(c.max_y, y);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int ny = y + dy, nx = x + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        if (!mask.at(ny, nx) || label[ny * w + nx] >= 0) continue;
                        label[ny * w + nx] = id;
                        stack.emplace_back(ny, nx);
                    }
                }
            }
            contours.push_back(c);
        }
    }
    return contours;
}

QCReport qc_mask(const LungMask& mask) {
    QCReport rep;
    const std::size_t total = mask.grid.size();
    if (total == 0) {
        rep.reject_reason = RejectReason::Contours;
        return rep;
    }
    std::size_t ones = 0;
    for (std::uint8_t v : mask.grid) ones += v ? 1 : 0;
    rep.lung_fraction = static_cast<double>(ones) / static_cast<double>(total);
    const auto contours = find_contours(mask);
    rep.contour_count = static_cast<int>(contours.size());

    if (rep.lung_fraction < 0.08) {
        rep.reject_reason = RejectReason::FractionLow;
    } else if (rep.lung_fraction > 0.90) {
        rep.reject_reason = RejectReason::FractionHigh;
    } else if (rep.contour_count < 2) {
        rep.reject_reason = RejectReason::Contours;
    } else {
        rep.accepted = true;
        rep.reject_reason = RejectReason::None;
        rep.crop_box = tight_bbox(mask);
    }
    return rep;
}

CropBox tight_bbox(const LungMask& mask) {
    auto contours = find_contours(mask);
    if (contours.size() < 2)
        throw std::runtime_error("tight_bbox: fewer than two contours");
    std::sort(contours.begin(), contours.end(),
              [](const Contour& a, const Contour& b) {
                  if (a.area != b.area) return a.area > b.area;
                  if (a.top_left_row != b.top_left_row)
                      return a.top_left_row < b.top_left_row;
                  return a.top_left_col < b.top_left_col;
              });
    const Contour& c0 = contours[0];
    const Contour& c1 = contours[1];
    const int min_x = std::min(c0.min_x, c1.min_x);
    const int min_y = std::min(c0.min_y, c1.min_y);
    const int max_x = std::max(c0.max_x, c1.max_x);
    const int max_y = std::max(c0.max_y, c1.max_y);
    return CropBox{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
}

}  // namespace cxr::qc
