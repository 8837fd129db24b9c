#include "cxr/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cxr::aug {

AugmentPolicy AugmentPolicy::from_config(const cfg::RunConfig& c) {
    AugmentPolicy p;
    const int g = c.get_int("aug.global_size");
    const int l = c.get_int("aug.local_size");

    p.global_clean = CropSpec{CropKind::GlobalClean, g, 1.0, 1.0, 0, 0, 0, 0, 0};

    p.global_aug.kind = CropKind::GlobalAug;
    p.global_aug.out_size = g;
    p.global_aug.scale_lo = c.get_double("aug.global2.scale_lo");
    p.global_aug.scale_hi = c.get_double("aug.global2.scale_hi");
    p.global_aug.flip_p = c.get_double("aug.global2.flip_p");
    p.global_aug.rot_degrees = c.get_double("aug.global2.rot_degrees");
    p.global_aug.autocontrast_p = c.get_double("aug.global2.autocontrast_p");
    p.global_aug.equalize_p = c.get_double("aug.global2.equalize_p");
    p.global_aug.blur_p = c.get_double("aug.global2.blur_p");

    p.local.kind = CropKind::Local;
    p.local.out_size = l;
    p.local.scale_lo = c.get_double("aug.local.scale_lo");
    p.local.scale_hi = c.get_double("aug.local.scale_hi");
    p.local.flip_p = c.get_double("aug.local.flip_p");
    p.local.rot_degrees = c.get_double("aug.local.rot_degrees");
    p.local.autocontrast_p = c.get_double("aug.local.autocontrast_p");
    p.local.equalize_p = c.get_double("aug.local.equalize_p");
    p.local.blur_p = c.get_double("aug.local.blur_p");

    p.n_local = c.get_int("aug.local.n_crops");
    p.blur_sigma_lo = c.get_double("aug.blur_sigma_lo");
    p.blur_sigma_hi = c.get_double("aug.blur_sigma_hi");
    p.norm.mean[0] = c.get_double("aug.norm_mean_r");
    p.norm.mean[1] = c.get_double("aug.norm_mean_g");
    p.norm.mean[2] = c.get_double("aug.norm_mean_b");
    p.norm.stddev[0] = c.get_double("aug.norm_std_r");
    p.norm.stddev[1] = c.get_double("aug.norm_std_g");
    p.norm.stddev[2] = c.get_double("aug.norm_std_b");
    for (const CropSpec* s : {&p.global_aug, &p.local})
        if (s->scale_lo > s->scale_hi)
            throw std::invalid_argument("augment: scale_lo > scale_hi");
    return p;
}

std::vector<double> normalize(const img::ImageF& im, const NormStats& norm) {
    const std::size_t plane = im.pixels.size();
    std::vector<double> chw(3 * plane);
    for (int c = 0; c < 3; ++c) {
        const double mean = norm.mean[c], sd = norm.stddev[c];
        for (std::size_t i = 0; i < plane; ++i)
            chw[c * plane + i] = (im.pixels[i] / 255.0 - mean) / sd;
    }
    return chw;
}

img::ImageF denormalize(const std::vector<double>& chw, int size,
                        const NormStats& norm) {
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    if (chw.size() != 3 * plane)
        throw std::invalid_argument("denormalize: size mismatch");
    img::ImageF out{size, size, std::vector<float>(plane)};
    // channels are replicated greyscale; invert from channel 0
    for (std::size_t i = 0; i < plane; ++i)
        out.pixels[i] = static_cast<float>(
            (chw[i] * norm.stddev[0] + norm.mean[0]) * 255.0);
    return out;
}

namespace {

// torchvision-style random resized crop; area fraction stays inside
// [scale_lo, scale_hi] of the source
img::ImageF random_resized_crop(const img::ImageF& im, const CropSpec& spec,
                                Rng& rng) {
    const double src_area =
        static_cast<double>(im.width) * static_cast<double>(im.height);
    if (spec.scale_lo >= 1.0 && spec.scale_hi >= 1.0)  // full frame
        return img::resize_bilinear(im, spec.out_size, spec.out_size);
    for (int attempt = 0; attempt < 20; ++attempt) {
        const double frac = rng.uniform(spec.scale_lo, spec.scale_hi);
        const double target = frac * src_area;
        const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
        const double ar = std::exp(log_ratio);
        const int w = static_cast<int>(std::round(std::sqrt(target * ar)));
        const int h = static_cast<int>(std::round(std::sqrt(target / ar)));
        if (w < 1 || h < 1 || w > im.width || h > im.height) continue;
        const double got = static_cast<double>(w) * h / src_area;
        if (got < spec.scale_lo || got > spec.scale_hi) continue;
        const int x = static_cast<int>(rng.bounded(im.width - w + 1));
        const int y = static_cast<int>(rng.bounded(im.height - h + 1));
        const img::ImageF region = img::crop(im, x, y, w, h);
        return img::resize_bilinear(region, spec.out_size, spec.out_size);
    }
    // fallback: centered square at the mid scale
    const double mid = 0.5 * (spec.scale_lo + spec.scale_hi);
    int side = static_cast<int>(std::floor(std::sqrt(mid * src_area)));
    side = std::clamp(side, 1, std::min(im.width, im.height));
    const int x = (im.width - side) / 2;
    const int y = (im.height - side) / 2;
    return img::resize_bilinear(img::crop(im, x, y, side, side), spec.out_size,
                                spec.out_size);
}

}  // namespace

View make_view(const img::ImageF& image, const CropSpec& spec,
               const AugmentPolicy& policy, Rng& rng, std::string trace_id) {
    img::ImageF v;
    if (spec.kind == CropKind::GlobalClean) {
        v = img::resize_bilinear(image, spec.out_size, spec.out_size);
    } else {
        v = random_resized_crop(image, spec, rng);
        if (spec.flip_p > 0.0 && rng.bernoulli(spec.flip_p)) v = img::hflip(v);
        if (spec.rot_degrees > 0.0)
            v = img::rotate(v, rng.uniform(-spec.rot_degrees, spec.rot_degrees));
        if (spec.autocontrast_p > 0.0 && rng.bernoulli(spec.autocontrast_p))
            v = img::autocontrast(v);
        if (spec.equalize_p > 0.0 && rng.bernoulli(spec.equalize_p))
            v = img::equalize(v);
        if (spec.blur_p > 0.0 && rng.bernoulli(spec.blur_p))
            v = img::gaussian_blur(
                v, rng.uniform(policy.blur_sigma_lo, policy.blur_sigma_hi));
    }
    View out;
    out.kind = spec.kind;
    out.size = spec.out_size;
    out.trace_id = std::move(trace_id);
    out.chw = normalize(v, policy.norm);
    return out;
}

MultiCropBatch make_views(const img::ImageF& image, const AugmentPolicy& policy,
                          Rng& rng) {
    MultiCropBatch batch;
    batch.globals.push_back(
        make_view(image, policy.global_clean, policy, rng, "g0"));
    batch.globals.push_back(
        make_view(image, policy.global_aug, policy, rng, "g1"));
    for (int i = 0; i < policy.n_local; ++i)
        batch.locals.push_back(
            make_view(image, policy.local, policy, rng, "l" + std::to_string(i)));
    return batch;
}

}  // namespace cxr::aug
