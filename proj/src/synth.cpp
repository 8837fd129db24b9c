#include "cxr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <utility>

#include "cxr/image.hpp"
#include "cxr/rng.hpp"

namespace cxr::synth {

namespace {

struct Lung {
    double cx, cy, rx, ry;

    bool inside(double x, double y, double margin = 0.0) const {
        const double dx = (x - cx) / (rx - margin);
        const double dy = (y - cy) / (ry - margin);
        return dx * dx + dy * dy <= 1.0;
    }
};

void fill_disc(img::ImageF& im, double cx, double cy, double r, float value) {
    const int x0 = std::max(0, static_cast<int>(cx - r) - 1);
    const int x1 = std::min(im.width - 1, static_cast<int>(cx + r) + 1);
    const int y0 = std::max(0, static_cast<int>(cy - r) - 1);
    const int y1 = std::min(im.height - 1, static_cast<int>(cy + r) + 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
                im.at(y, x) = value;
}

void fill_rect(img::ImageF& im, int x0, int y0, int w, int h, float value) {
    for (int y = std::max(0, y0); y < std::min(im.height, y0 + h); ++y)
        for (int x = std::max(0, x0); x < std::min(im.width, x0 + w); ++x)
            im.at(y, x) = value;
}

data::FindingBox box_of(const char* symptom, int x0, int y0, int w, int h,
                        int size) {
    data::FindingBox b;
    b.symptom = symptom;
    b.x = std::clamp(x0, 0, size - 1);
    b.y = std::clamp(y0, 0, size - 1);
    b.w = std::min(w, size - b.x);
    b.h = std::min(h, size - b.y);
    return b;
}

// random point comfortably inside the lung ellipse
std::pair<double, double> lung_point(const Lung& lung, double margin, Rng& rng) {
    for (int i = 0; i < 64; ++i) {
        const double x = lung.cx + (rng.uniform() * 2.0 - 1.0) * lung.rx;
        const double y = lung.cy + (rng.uniform() * 2.0 - 1.0) * lung.ry;
        if (lung.inside(x, y, margin)) return {x, y};
    }
    return {lung.cx, lung.cy};
}

}  // namespace

data::Manifest generate_corpus(const std::string& out_dir,
                               const SynthOptions& opt) {
    if (opt.n_images <= 0 || opt.image_size < 64)
        throw std::invalid_argument(
            "generate_corpus: need n_images > 0 and image_size >= 64");
    namespace fs = std::filesystem;
    const fs::path root(out_dir);
    fs::create_directories(root / "images");

    Rng rng(opt.seed);
    data::Manifest manifest;
    const int S = opt.image_size;
    const double sd = S;

    int patient_no = 0;
    int images_left_for_patient = 0;
    for (int idx = 0; idx < opt.n_images; ++idx) {
        if (images_left_for_patient == 0) {
            ++patient_no;
            // mostly one image per patient, occasionally two
            images_left_for_patient = rng.bernoulli(0.25) ? 2 : 1;
        }
        --images_left_for_patient;

        img::ImageF im;
        im.width = im.height = S;
        im.pixels.assign(static_cast<std::size_t>(S) * S, 0.0f);
        for (float& p : im.pixels)
            p = static_cast<float>(10.0 + rng.uniform() * 30.0);  // dark bg

        // two lung fields, slightly jittered
        const Lung lungs[2] = {
            {0.32 * sd + rng.normal() * 0.01 * sd,
             0.50 * sd + rng.normal() * 0.01 * sd, 0.16 * sd, 0.30 * sd},
            {0.68 * sd + rng.normal() * 0.01 * sd,
             0.50 * sd + rng.normal() * 0.01 * sd, 0.16 * sd, 0.30 * sd}};
        const float lung_base = static_cast<float>(140.0 + rng.uniform() * 25.0);
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x)
                if (lungs[0].inside(x, y) || lungs[1].inside(x, y))
                    im.at(y, x) =
                        lung_base + static_cast<float>(rng.uniform() * 10.0);

        data::SampleRecord rec;
        rec.patient_id = "p" + std::to_string(patient_no);
        rec.source = "synthetic";
        const int disease_idx = idx % 3;
        rec.disease = static_cast<data::Disease>(disease_idx);

        if (rec.disease == data::Disease::Tb) {
            // apical involvement: brightened upper lung halves plus coarse
            // foci, strong enough to survive the crop/resize pipeline but
            // kept below the 240+ range reserved for injected findings so
            // the disease pattern never out-shines a finding
            for (const Lung& lung : lungs) {
                for (int y = 0; y <= static_cast<int>(lung.cy); ++y)
                    for (int x = 0; x < S; ++x)
                        if (lung.inside(x, y)) im.at(y, x) = 215.0f;
            }
            const int n_foci = 4 + static_cast<int>(rng.bounded(4));
            for (int f = 0; f < n_foci; ++f) {
                const Lung& lung = lungs[rng.bounded(2)];
                auto [x, y] = lung_point(lung, 6.0, rng);
                y = lung.cy - std::abs(y - lung.cy);  // fold into the top half
                fill_disc(im, x, y, 3.0 + 1.5 * rng.uniform(), 230.0f);
            }
        } else if (rec.disease == data::Disease::Covid) {
            // diffuse basal haze: darker, flatter lower thirds
            for (const Lung& lung : lungs) {
                const double y_from = lung.cy + lung.ry / 3.0;
                for (int y = static_cast<int>(y_from); y < S; ++y)
                    for (int x = 0; x < S; ++x)
                        if (lung.inside(x, y)) im.at(y, x) = 105.0f;
            }
        }

        // at most one injected finding per image so each finding is the
        // single most salient structure in its radiograph; rare labels
        // match the pos_weight policy's rare set
        data::SymptomVector sym;
        const double weight[data::kNumSymptoms] = {0.175, 0.175, 0.175, 0.175,
                                                   0.175, 0.0625, 0.0625};
        int chosen = -1;
        if (rng.bernoulli(0.6)) {
            double u = rng.uniform(), acc = 0.0;
            for (int s = 0; s < data::kNumSymptoms; ++s) {
                acc += weight[s];
                if (u < acc) { chosen = s; break; }
            }
            if (chosen < 0) chosen = data::kNumSymptoms - 1;
        }
        for (int s = 0; s < data::kNumSymptoms; ++s) {
            if (s != chosen) continue;
            sym.bits[s] = true;
            const Lung& lung = lungs[rng.bounded(2)];
            auto [px, py] = lung_point(lung, 8.0, rng);
            const int x = static_cast<int>(px), y = static_cast<int>(py);
            switch (s) {
                case 0: {  // infiltration: dense patchy speckle
                    const int r = 10;
                    for (int yy = y - r; yy < y + r; ++yy)
                        for (int xx = x - r; xx < x + r; ++xx)
                            if (yy >= 0 && yy < S && xx >= 0 && xx < S &&
                                rng.bernoulli(0.65))
                                im.at(yy, xx) = 252.0f;
                    rec.boxes.push_back(box_of("infiltration", x - r, y - r,
                                               2 * r, 2 * r, S));
                    break;
                }
                case 1: {  // effusion: bright base wedge
                    const int by = static_cast<int>(lung.cy + lung.ry * 0.55);
                    const int bx = static_cast<int>(lung.cx - lung.rx * 0.6);
                    const int bw = static_cast<int>(lung.rx * 1.2);
                    const int bh = 7;
                    for (int yy = by; yy < by + bh && yy < S; ++yy)
                        for (int xx = bx; xx < bx + bw && xx < S; ++xx)
                            if (xx >= 0 && lung.inside(xx, yy))
                                im.at(yy, xx) = 255.0f;
                    rec.boxes.push_back(box_of("effusion", bx, by, bw, bh, S));
                    break;
                }
                case 2: {  // atelectasis: horizontal band
                    const int bw = 24, bh = 8;
                    fill_rect(im, x - bw / 2, y - bh / 2, bw, bh, 246.0f);
                    rec.boxes.push_back(box_of("atelectasis", x - bw / 2,
                                               y - bh / 2, bw, bh, S));
                    break;
                }
                case 3: {  // nodule: single small disc
                    fill_disc(im, x, y, 5.0, 255.0f);
                    rec.boxes.push_back(
                        box_of("nodule", x - 5, y - 5, 11, 11, S));
                    break;
                }
                case 4: {  // mass: single large disc
                    fill_disc(im, x, y, 9.0, 249.0f);
                    rec.boxes.push_back(box_of("mass", x - 9, y - 9, 19, 19, S));
                    break;
                }
                case 5: {  // pneumothorax: dark lateral strip
                    const int sx = static_cast<int>(
                        lung.cx + (lung.cx < sd / 2 ? -1.0 : 1.0) * lung.rx * 0.6);
                    const int sy = static_cast<int>(lung.cy - lung.ry * 0.5);
                    const int sw = 9, sh = static_cast<int>(lung.ry);
                    for (int yy = sy; yy < sy + sh && yy < S; ++yy)
                        for (int xx = sx; xx < sx + sw && xx < S; ++xx)
                            if (xx >= 0 && yy >= 0 && lung.inside(xx, yy))
                                im.at(yy, xx) = 45.0f;
                    rec.boxes.push_back(
                        box_of("pneumothorax", sx, sy, sw, sh, S));
                    break;
                }
                case 6: {  // consolidation: uniform bright square
                    const int bw = 16;
                    fill_rect(im, x - bw / 2, y - bw / 2, bw, bw, 243.0f);
                    rec.boxes.push_back(box_of("consolidation", x - bw / 2,
                                               y - bw / 2, bw, bw, S));
                    break;
                }
            }
        }
        rec.symptoms = sym;

        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d.png", idx);
        const fs::path png = root / "images" / name;
        img::write_png_gray(png.string(), img::to_u8(im));
        rec.image_path = (fs::path("images") / name).string();
        manifest.records.push_back(std::move(rec));
    }

    data::write_manifest((root / "manifest.jsonl").string(), manifest);
    return manifest;
}

}  // namespace cxr::synth
