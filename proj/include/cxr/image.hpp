#pragma once

// 8-bit greyscale rasters, PNG I/O and the pixel-level transforms used by
// preprocessing and multi-crop augmentation. All transforms work on a
// float raster (values in [0, 255]) so chained operations do not
// accumulate quantization error.

#include <cstdint>
#include <string>
#include <vector>

namespace cxr::img {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, height*width

    std::uint8_t at(int y, int x) const { return pixels[y * width + x]; }
};

struct ImageF {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    float at(int y, int x) const { return pixels[y * width + x]; }
    float& at(int y, int x) { return pixels[y * width + x]; }
};

ImageF to_float(const Image& im);
Image to_u8(const ImageF& im);  // clamps and rounds

Image read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const Image& im);
// interleaved RGB, 3 bytes per pixel
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

ImageF resize_bilinear(const ImageF& im, int out_w, int out_h);
ImageF crop(const ImageF& im, int x, int y, int w, int h);
Image crop(const Image& im, int x, int y, int w, int h);
ImageF hflip(const ImageF& im);
// rotation about the image center, bilinear sampling, reflect padding
ImageF rotate(const ImageF& im, double degrees);
ImageF gaussian_blur(const ImageF& im, double sigma);
// stretches the intensity range to [0, 255]
ImageF autocontrast(const ImageF& im);
// histogram equalization on the 8-bit quantized intensities
ImageF equalize(const ImageF& im);

}  // namespace cxr::img
