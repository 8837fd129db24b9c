#pragma once

// Lung-mask quality control and cropping. A mask is accepted when lung
// pixels occupy between 8% and 90% of the frame (inclusive) and at least
// two external contours are present; the crop box is the tightest
// rectangle around the two largest contours.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cxr/image.hpp"

namespace cxr::qc {

struct LungMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> grid;  // 0/1, row-major

    std::uint8_t at(int y, int x) const { return grid[y * width + x]; }
};

enum class RejectReason { None, FractionLow, FractionHigh, Contours };

std::string to_string(RejectReason r);

struct CropBox {
    int x = 0, y = 0, w = 0, h = 0;
};

struct QCReport {
    bool accepted = false;
    double lung_fraction = 0.0;
    int contour_count = 0;
    RejectReason reject_reason = RejectReason::Contours;
    std::optional<CropBox> crop_box;
};

// Pluggable segmentation provider. The reference implementation for tests
// and the synthetic corpus is a luminance threshold; a real segmentation
// network can be substituted behind the same interface.
class MaskProvider {
public:
    virtual ~MaskProvider() = default;
    // Binary mask at the source image size.
    virtual LungMask provide(const img::Image& image) = 0;
};

class ThresholdMaskProvider : public MaskProvider {
public:
    // Mimics the reference pipeline: downscale to the working size,
    // threshold, then nearest-neighbour upsample back to source size.
    explicit ThresholdMaskProvider(int threshold = 100, int working_size = 225)
        : threshold_(threshold), working_size_(working_size) {}
    LungMask provide(const img::Image& image) override;

private:
    int threshold_;
    int working_size_;
};

struct Contour {
    long area = 0;
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;  // inclusive bounds
    int top_left_row = 0, top_left_col = 0;          // first pixel, row-major
};

// external connected components of 1-pixels, 8-connectivity
std::vector<Contour> find_contours(const LungMask& mask);

LungMask upsample_nearest(const LungMask& mask, int out_w, int out_h);

QCReport qc_mask(const LungMask& mask);

// Tightest box around the two largest contours. Ties on area break by
// smaller top-left corner in row-major order.
CropBox tight_bbox(const LungMask& mask);

}  // namespace cxr::qc
