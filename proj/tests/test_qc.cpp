#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <queue>
#include <vector>

#include "cxr/qc.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

namespace {

qc::LungMask mask_of(int w, int h, std::vector<std::uint8_t> grid) {
    qc::LungMask m;
    m.width = w;
    m.height = h;
    m.grid = std::move(grid);
    return m;
}

qc::LungMask blank(int w, int h) {
    return mask_of(w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0));
}

void fill_rect(qc::LungMask& m, int x0, int y0, int w, int h) {
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x)
            m.grid[y * m.width + x] = 1;
}

// independent oracle: BFS flood fill (8-connectivity) + popcount
struct OracleResult {
    double fraction;
    int components;
};

OracleResult oracle(const qc::LungMask& m) {
    std::size_t ones = 0;
    for (auto v : m.grid) ones += v;
    std::vector<char> seen(m.grid.size(), 0);
    int comps = 0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * m.width + x;
            if (!m.grid[i] || seen[i]) continue;
            ++comps;
            std::queue<std::pair<int, int>> q;
            q.push({y, x});
            seen[i] = 1;
            while (!q.empty()) {
                auto [cy, cx] = q.front();
                q.pop();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width)
                            continue;
                        const std::size_t ni =
                            static_cast<std::size_t>(ny) * m.width + nx;
                        if (m.grid[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            q.push({ny, nx});
                        }
                    }
            }
        }
    return {static_cast<double>(ones) / static_cast<double>(m.grid.size()),
            comps};
}

}  // namespace

TEST_CASE("qc decisions match the flood-fill/popcount oracle on 500 random masks") {
    Rng rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        const int w = 8 + static_cast<int>(rng.bounded(25));
        const int h = 8 + static_cast<int>(rng.bounded(25));
        qc::LungMask m = blank(w, h);
        // sprinkle random rectangles to get varied fractions and topologies
        const int n_rects = 1 + static_cast<int>(rng.bounded(5));
        for (int r = 0; r < n_rects; ++r) {
            const int rw = 1 + static_cast<int>(rng.bounded(w / 2));
            const int rh = 1 + static_cast<int>(rng.bounded(h / 2));
            const int x = static_cast<int>(rng.bounded(w - rw + 1));
            const int y = static_cast<int>(rng.bounded(h - rh + 1));
            fill_rect(m, x, y, rw, rh);
        }
        const OracleResult expect = oracle(m);
        const qc::QCReport got = qc::qc_mask(m);
        CHECK(got.lung_fraction == doctest::Approx(expect.fraction));
        CHECK(got.contour_count == expect.components);
        const bool should_accept = expect.fraction >= 0.08 &&
                                   expect.fraction <= 0.90 &&
                                   expect.components >= 2;
        CHECK(got.accepted == should_accept);
    }
}

TEST_CASE("fraction boundaries 0.08 and 0.90 are accepted (inclusive)") {
    // 10x10 grid: 8 lung pixels = exactly 8%
    qc::LungMask lo = blank(10, 10);
    fill_rect(lo, 0, 0, 4, 1);
    fill_rect(lo, 6, 6, 4, 1);
    const qc::QCReport rlo = qc::qc_mask(lo);
    CHECK(rlo.lung_fraction == doctest::Approx(0.08));
    CHECK(rlo.accepted);

    // 90 of 100 pixels: two components split by a full empty row
    qc::LungMask hi = blank(10, 10);
    fill_rect(hi, 0, 0, 10, 5);
    fill_rect(hi, 0, 6, 10, 4);
    const qc::QCReport rhi = qc::qc_mask(hi);
    CHECK(rhi.lung_fraction == doctest::Approx(0.90));
    CHECK(rhi.accepted);

    // 7% -> FractionLow; 91% -> FractionHigh
    qc::LungMask low = blank(10, 10);
    fill_rect(low, 0, 0, 7, 1);
    const qc::QCReport rl = qc::qc_mask(low);
    CHECK_FALSE(rl.accepted);
    CHECK(rl.reject_reason == qc::RejectReason::FractionLow);

    qc::LungMask high = blank(10, 10);
    fill_rect(high, 0, 0, 10, 10);
    high.grid[0] = high.grid[1] = high.grid[2] = high.grid[3] =
        high.grid[4] = high.grid[5] = high.grid[6] = high.grid[7] =
            high.grid[8] = 0;
    const qc::QCReport rh = qc::qc_mask(high);
    CHECK(rh.lung_fraction == doctest::Approx(0.91));
    CHECK_FALSE(rh.accepted);
    CHECK(rh.reject_reason == qc::RejectReason::FractionHigh);
}

TEST_CASE("single contour is rejected with the Contours reason") {
    qc::LungMask m = blank(10, 10);
    fill_rect(m, 2, 2, 5, 5);
    const qc::QCReport r = qc::qc_mask(m);
    CHECK_FALSE(r.accepted);
    CHECK(r.reject_reason == qc::RejectReason::Contours);
}

TEST_CASE("tight bbox covers the two largest contours") {
    qc::LungMask m = blank(20, 20);
    fill_rect(m, 2, 3, 5, 8);    // area 40
    fill_rect(m, 12, 5, 4, 9);   // area 36
    fill_rect(m, 9, 17, 2, 2);   // small distractor, area 4
    const qc::CropBox box = qc::tight_bbox(m);
    CHECK(box.x == 2);
    CHECK(box.y == 3);
    CHECK(box.w == 14);   // 2..15 inclusive
    CHECK(box.h == 11);   // 3..13 inclusive
}

TEST_CASE("tight bbox breaks area ties by row-major top-left corner") {
    qc::LungMask m = blank(20, 20);
    fill_rect(m, 14, 14, 3, 3);  // later in row-major order
    fill_rect(m, 1, 1, 3, 3);    // equal area, earlier corner
    fill_rect(m, 8, 8, 3, 3);    // equal area, middle
    const qc::CropBox box = qc::tight_bbox(m);
    // top-two by tie-break: (1,1) and (8,8)
    CHECK(box.x == 1);
    CHECK(box.y == 1);
    CHECK(box.w == 10);
    CHECK(box.h == 10);
}

TEST_CASE("find_contours reports areas and bounds") {
    qc::LungMask m = blank(12, 8);
    fill_rect(m, 1, 1, 3, 2);
    fill_rect(m, 7, 4, 2, 3);
    auto contours = qc::find_contours(m);
    REQUIRE(contours.size() == 2);
    std::sort(contours.begin(), contours.end(),
              [](const auto& a, const auto& b) { return a.area > b.area; });
    CHECK(contours[0].area == 6);
    CHECK(contours[1].area == 6);
}

TEST_CASE("diagonal touch merges under 8-connectivity") {
    qc::LungMask m = blank(4, 4);
    m.grid[0 * 4 + 0] = 1;
    m.grid[1 * 4 + 1] = 1;
    CHECK(qc::find_contours(m).size() == 1);
}

TEST_CASE("threshold provider masks bright regions at source resolution") {
    img::Image im;
    im.width = im.height = 50;
    im.pixels.assign(2500, 20);
    for (int y = 10; y < 40; ++y) {
        for (int x = 5; x < 20; ++x) im.pixels[y * 50 + x] = 200;
        for (int x = 30; x < 45; ++x) im.pixels[y * 50 + x] = 200;
    }
    qc::ThresholdMaskProvider provider(100, 25);
    const qc::LungMask mask = provider.provide(im);
    CHECK(mask.width == 50);
    CHECK(mask.height == 50);
    CHECK(mask.at(25, 10) == 1);
    CHECK(mask.at(25, 25) == 0);
    const qc::QCReport r = qc::qc_mask(mask);
    CHECK(r.accepted);
    CHECK(r.contour_count >= 2);
}
