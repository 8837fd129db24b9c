#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "cxr/gradcam.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

TEST_CASE("analytic single-patch construction: argmax lands in the right "
          "patch for 50 random placements") {
    Rng rng(17);
    const int grid = 8;
    const std::size_t n = grid * grid;
    const std::size_t cols = 5;
    const int out = 256;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t hot = rng.bounded(n);
        // activations: one distinguished patch carries a positive feature
        std::vector<double> act(n * cols, 0.0);
        act[hot * cols + 2] = 1.0;
        // gradient of the logit: uniform positive weight on that channel
        std::vector<double> grad(n * cols, 0.0);
        for (std::size_t p = 0; p < n; ++p) grad[p * cols + 2] = 1.0;

        const explain::SaliencyMap m =
            explain::cam_from_patch_tokens(act, grad, n, cols, grid, out, out);
        REQUIRE(m.grid.size() == n);
        // patch-level argmax is the hot patch
        const std::size_t gmax =
            std::max_element(m.grid.begin(), m.grid.end()) - m.grid.begin();
        CHECK(gmax == hot);

        // upsampled argmax falls inside the hot patch's pixel footprint
        const std::size_t pmax =
            std::max_element(m.map.begin(), m.map.end()) - m.map.begin();
        const int px = static_cast<int>(pmax % out);
        const int py = static_cast<int>(pmax / out);
        const int cell = out / grid;
        CHECK(px / cell == static_cast<int>(hot) % grid);
        CHECK(py / cell == static_cast<int>(hot) / grid);
    }
}

TEST_CASE("constant activations yield an all-zero map") {
    const int grid = 4;
    const std::size_t n = grid * grid, cols = 3;
    std::vector<double> act(n * cols, 0.7);
    std::vector<double> grad(n * cols, 0.2);
    const explain::SaliencyMap m =
        explain::cam_from_patch_tokens(act, grad, n, cols, grid, 64, 64);
    for (double v : m.map) CHECK(v == 0.0);
    for (double v : m.grid) CHECK(v >= 0.0);
}

TEST_CASE("negative channel weights are rectified away") {
    const int grid = 2;
    const std::size_t n = 4, cols = 1;
    // patch 0 would be strongly negative before the ReLU
    std::vector<double> act = {5.0, 1.0, 0.0, 0.0};
    std::vector<double> grad = {-1.0, -1.0, -1.0, -1.0};
    const explain::SaliencyMap m =
        explain::cam_from_patch_tokens(act, grad, n, cols, grid, 2, 2);
    // alpha = mean grad = -1; ReLU(-1 * act) == 0 everywhere
    for (double v : m.grid) CHECK(v == 0.0);
}

TEST_CASE("map range is [0,1] with both extremes attained") {
    Rng rng(19);
    const int grid = 8;
    const std::size_t n = grid * grid, cols = 6;
    std::vector<double> act(n * cols), grad(n * cols);
    for (auto& v : act) v = rng.normal();
    for (auto& v : grad) v = rng.normal();
    const explain::SaliencyMap m =
        explain::cam_from_patch_tokens(act, grad, n, cols, grid, 128, 128);
    const auto [mn, mx] = std::minmax_element(m.grid.begin(), m.grid.end());
    CHECK(*mn == 0.0);
    CHECK(*mx == 1.0);
    for (double v : m.map) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(m.width == 128);
    CHECK(m.height == 128);
    CHECK(m.grid_w == grid);
    CHECK(m.grid_h == grid);
}

TEST_CASE("grad_cam on a 256px view uses a 32x32 patch grid") {
    nn::VitConfig c;
    c.patch_size = 8;
    c.embed_dim = 32;
    c.depth = 1;
    c.heads = 4;
    c.dino_hidden = 32;
    c.dino_bottleneck = 16;
    c.dino_out = 32;
    c.head_hidden = 16;
    c.pos_grid = 32;
    nn::VitModel model(c);
    model.init_random(23);

    aug::View v;
    v.kind = aug::CropKind::GlobalClean;
    v.size = 256;
    v.trace_id = "g0";
    v.chw.assign(3u * 256 * 256, 0.0);
    Rng rng(24);
    for (auto& x : v.chw) x = rng.normal();

    const explain::SaliencyMap m = explain::grad_cam(model, v, 3, 256, 256);
    CHECK(m.grid_w == 32);
    CHECK(m.grid_h == 32);
    CHECK(m.grid.size() == 1024);
    CHECK(m.width == 256);
    CHECK(m.map.size() == 256u * 256);
    CHECK(m.symptom_index == 3);
    CHECK_THROWS(explain::grad_cam(model, v, 7, 256, 256));
    CHECK_THROWS(explain::grad_cam(model, v, -1, 256, 256));
}

TEST_CASE("overlap geometry: identical, disjoint, and half-shifted regions") {
    // a binary map: left half hot on a 10x10 frame
    explain::SaliencyMap m;
    m.grid_w = m.grid_h = 10;
    m.width = m.height = 10;
    m.map.assign(100, 0.0);
    m.grid.assign(100, 0.0);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 5; ++x) m.map[y * 10 + x] = 1.0;

    // q = 0.5: threshold selects exactly the hot half
    const explain::Box same{0, 0, 5, 10};
    const explain::OverlapScore s1 = explain::overlap(m, same, 0.5);
    CHECK(s1.iou_defined);
    CHECK(s1.iou == doctest::Approx(1.0));
    CHECK(s1.pointing_hit);

    const explain::Box disjoint{5, 0, 5, 10};
    const explain::OverlapScore s2 = explain::overlap(m, disjoint, 0.5);
    CHECK(s2.iou == doctest::Approx(0.0));
    CHECK_FALSE(s2.pointing_hit);

    // box shifted right by 2: intersection 30, union 70
    const explain::Box half{2, 0, 5, 10};  // covers x in [2,7)
    const explain::OverlapScore s3 = explain::overlap(m, half, 0.5);
    CHECK(s3.iou == doctest::Approx(30.0 / 70.0));
}

TEST_CASE("pointing game uses the first row-major argmax") {
    explain::SaliencyMap m;
    m.grid_w = m.grid_h = 4;
    m.width = m.height = 4;
    m.grid.assign(16, 0.0);
    m.map.assign(16, 0.0);
    m.map[1 * 4 + 2] = 1.0;  // (x=2, y=1)
    m.map[3 * 4 + 3] = 1.0;  // tie, later in row-major order

    const explain::Box hit{2, 1, 1, 1};
    CHECK(explain::overlap(m, hit, 0.9).pointing_hit);
    const explain::Box second{3, 3, 1, 1};
    CHECK_FALSE(explain::overlap(m, second, 0.9).pointing_hit);
}

TEST_CASE("all-zero maps give undefined IoU and no pointing hit") {
    explain::SaliencyMap m;
    m.grid_w = m.grid_h = 4;
    m.width = m.height = 8;
    m.grid.assign(16, 0.0);
    m.map.assign(64, 0.0);
    const explain::Box box{0, 0, 8, 8};
    const explain::OverlapScore s = explain::overlap(m, box, 0.9);
    CHECK_FALSE(s.iou_defined);
    CHECK_FALSE(s.pointing_hit);
}

TEST_CASE("overlay rendering is deterministic, sized, and leaves zero-saliency "
          "pixels untouched") {
    img::Image im;
    im.width = 32;
    im.height = 24;
    im.pixels.assign(32 * 24, 100);

    explain::SaliencyMap m;
    m.grid_w = m.grid_h = 4;
    m.width = 32;
    m.height = 24;
    m.grid.assign(16, 0.0);
    m.map.assign(32 * 24, 0.0);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 16; ++x) m.map[y * 32 + x] = 0.8;

    const explain::Box box{4, 4, 8, 8};
    const std::vector<std::uint8_t> rgb1 =
        explain::render_overlay(im, m, box, 0.4);
    const std::vector<std::uint8_t> rgb2 =
        explain::render_overlay(im, m, box, 0.4);
    REQUIRE(rgb1.size() == 3u * 32 * 24);
    CHECK(rgb1 == rgb2);

    // bottom-right quadrant has zero saliency and no box: stays greyscale
    const std::size_t idx = 3 * (20 * 32 + 30);
    CHECK(rgb1[idx] == 100);
    CHECK(rgb1[idx + 1] == 100);
    CHECK(rgb1[idx + 2] == 100);

    // saliency region differs from the source grey
    const std::size_t hot = 3 * (2 * 32 + 2);
    const bool tinted = rgb1[hot] != 100 || rgb1[hot + 1] != 100 ||
                        rgb1[hot + 2] != 100;
    CHECK(tinted);

    const std::string path =
        (std::filesystem::temp_directory_path() / "cxr_overlay_test.png")
            .string();
    explain::write_overlay_png(path, im, m, box, 0.4);
    CHECK(std::filesystem::file_size(path) > 0);
    std::remove(path.c_str());
}

TEST_CASE("cam_from_patch_tokens validates its shapes") {
    std::vector<double> act(16, 0.0), grad(16, 0.0);
    // activation size disagrees with n_patches * cols
    CHECK_THROWS(explain::cam_from_patch_tokens(act, grad, 5, 4, 2, 8, 8));
    // grid side does not square to n_patches
    CHECK_THROWS(explain::cam_from_patch_tokens(act, grad, 4, 4, 3, 8, 8));
    CHECK_THROWS(explain::cam_from_patch_tokens(act, grad, 4, 4, 2, 0, 8));

    // missing gradients are tolerated: weights default to zero
    const explain::SaliencyMap m =
        explain::cam_from_patch_tokens(act, {}, 4, 4, 2, 4, 4);
    for (double v : m.grid) CHECK(v == 0.0);
}
