#include "cxr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace cxr::img {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// reflect index into [0, n) (mirror without repeating the edge pixel)
inline int reflect(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

inline float sample_bilinear_reflect(const ImageF& im, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    const int xs[2] = {reflect(x0, im.width), reflect(x0 + 1, im.width)};
    const int ys[2] = {reflect(y0, im.height), reflect(y0 + 1, im.height)};
    const double v00 = im.at(ys[0], xs[0]);
    const double v01 = im.at(ys[0], xs[1]);
    const double v10 = im.at(ys[1], xs[0]);
    const double v11 = im.at(ys[1], xs[1]);
    return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                              fy * ((1 - fx) * v10 + fx * v11));
}

}  // namespace

ImageF to_float(const Image& im) {
    ImageF out{im.width, im.height, {}};
    out.pixels.assign(im.pixels.begin(), im.pixels.end());
    return out;
}

Image to_u8(const ImageF& im) {
    Image out{im.width, im.height, {}};
    out.pixels.resize(im.pixels.size());
    for (std::size_t i = 0; i < im.pixels.size(); ++i) {
        const float v = std::clamp(im.pixels[i], 0.0f, 255.0f);
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
    }
    return out;
}

Image read_png_gray(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open image: " + path);
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_expand(png);
    const int color = png_get_color_type(png, info);
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1, -1);
    png_read_update_info(png, info);

    Image out;
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y)
        rows[y] = out.pixels.data() + static_cast<std::size_t>(y) * out.width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

namespace {

void write_png(const std::string& path, int width, int height, int color_type,
               const std::uint8_t* data, std::size_t stride) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write image: " + path);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<std::uint8_t*>(data) + y * stride;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray(const std::string& path, const Image& im) {
    write_png(path, im.width, im.height, PNG_COLOR_TYPE_GRAY,
              im.pixels.data(), static_cast<std::size_t>(im.width));
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
        throw std::invalid_argument("write_png_rgb: buffer size mismatch");
    write_png(path, width, height, PNG_COLOR_TYPE_RGB, rgb.data(),
              static_cast<std::size_t>(width) * 3);
}

ImageF resize_bilinear(const ImageF& im, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0)
        throw std::invalid_argument("resize: non-positive target size");
    ImageF out{out_w, out_h, std::vector<float>(
                                 static_cast<std::size_t>(out_w) * out_h)};
    const double sx = static_cast<double>(im.width) / out_w;
    const double sy = static_cast<double>(im.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            out.at(y, x) = sample_bilinear_reflect(im, src_x, src_y);
        }
    }
    return out;
}

ImageF crop(const ImageF& im, int x, int y, int w, int h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("crop: zero-area box");
    if (x < 0 || y < 0 || x + w > im.width || y + h > im.height)
        throw std::invalid_argument("crop: box out of bounds");
    ImageF out{w, h, std::vector<float>(static_cast<std::size_t>(w) * h)};
    for (int r = 0; r < h; ++r)
        std::copy_n(im.pixels.begin() + static_cast<std::size_t>(y + r) * im.width + x,
                    w, out.pixels.begin() + static_cast<std::size_t>(r) * w);
    return out;
}

Image crop(const Image& im, int x, int y, int w, int h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("crop: zero-area box");
    if (x < 0 || y < 0 || x + w > im.width || y + h > im.height)
        throw std::invalid_argument("crop: box out of bounds");
    Image out{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    for (int r = 0; r < h; ++r)
        std::copy_n(im.pixels.begin() + static_cast<std::size_t>(y + r) * im.width + x,
                    w, out.pixels.begin() + static_cast<std::size_t>(r) * w);
    return out;
}

ImageF hflip(const ImageF& im) {
    ImageF out{im.width, im.height, std::vector<float>(im.pixels.size())};
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
            out.at(y, x) = im.at(y, im.width - 1 - x);
    return out;
}

ImageF rotate(const ImageF& im, double degrees) {
    const double rad = degrees * M_PI / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = (im.width - 1) / 2.0, cy = (im.height - 1) / 2.0;
    ImageF out{im.width, im.height, std::vector<float>(im.pixels.size())};
    for (int y = 0; y < im.height; ++y) {
        for (int x = 0; x < im.width; ++x) {
            const double dx = x - cx, dy = y - cy;
            // inverse map: rotate sample grid by -angle
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            out.at(y, x) = sample_bilinear_reflect(im, sx, sy);
        }
    }
    return out;
}

ImageF gaussian_blur(const ImageF& im, double sigma) {
    if (sigma <= 0.0) return im;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;

    ImageF tmp{im.width, im.height, std::vector<float>(im.pixels.size())};
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * im.at(y, reflect(x + i, im.width));
            tmp.at(y, x) = static_cast<float>(acc);
        }
    ImageF out{im.width, im.height, std::vector<float>(im.pixels.size())};
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp.at(reflect(y + i, im.height), x);
            out.at(y, x) = static_cast<float>(acc);
        }
    return out;
}

ImageF autocontrast(const ImageF& im) {
    float lo = im.pixels[0], hi = im.pixels[0];
    for (float v : im.pixels) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) return im;
    ImageF out{im.width, im.height, std::vector<float>(im.pixels.size())};
    const float scale = 255.0f / (hi - lo);
    for (std::size_t i = 0; i < im.pixels.size(); ++i)
        out.pixels[i] = (im.pixels[i] - lo) * scale;
    return out;
}

ImageF equalize(const ImageF& im) {
    // classic 8-bit histogram equalization
    std::array<std::size_t, 256> hist{};
    for (float v : im.pixels) {
        const int b = std::clamp(static_cast<int>(std::lround(v)), 0, 255);
        ++hist[b];
    }
    std::array<double, 256> lut{};
    std::size_t cum = 0;
    const double total = static_cast<double>(im.pixels.size());
    for (int b = 0; b < 256; ++b) {
        cum += hist[b];
        lut[b] = 255.0 * static_cast<double>(cum) / total;
    }
    ImageF out{im.width, im.height, std::vector<float>(im.pixels.size())};
    for (std::size_t i = 0; i < im.pixels.size(); ++i) {
        const int b =
            std::clamp(static_cast<int>(std::lround(im.pixels[i])), 0, 255);
        out.pixels[i] = static_cast<float>(lut[b]);
    }
    return out;
}

}  // namespace cxr::img
