#include "cxr/prep.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cxr/image.hpp"

namespace cxr::prep {

namespace fs = std::filesystem;

PrepResult run_prep(const data::Manifest& manifest,
                    const std::string& image_root, const std::string& out_dir,
                    const cfg::RunConfig& cfg, qc::MaskProvider& provider) {
    (void)cfg;
    const fs::path root(out_dir);
    fs::create_directories(root / "images");
    std::ofstream qc_log(root / "qc_report.jsonl");
    if (!qc_log)
        throw std::runtime_error("prep: cannot open qc_report.jsonl under " +
                                 out_dir);

    PrepResult result;
    for (const auto& rec : manifest.records) {
        const fs::path src = fs::path(image_root) / rec.image_path;
        const img::Image image = img::read_png_gray(src.string());
        const qc::LungMask mask = provider.provide(image);
        const qc::QCReport report = qc::qc_mask(mask);

        nlohmann::json j;
        j["image_path"] = rec.image_path;
        j["accepted"] = report.accepted;
        j["lung_fraction"] = report.lung_fraction;
        j["contour_count"] = report.contour_count;
        j["reject_reason"] = qc::to_string(report.reject_reason);
        if (report.crop_box)
            j["crop_box"] = {{"x", report.crop_box->x},
                             {"y", report.crop_box->y},
                             {"w", report.crop_box->w},
                             {"h", report.crop_box->h}};
        qc_log << j.dump() << "\n";

        if (!report.accepted) {
            ++result.rejected;
            continue;
        }
        const qc::CropBox box = *report.crop_box;
        const img::Image cropped = img::crop(image, box.x, box.y, box.w, box.h);

        data::SampleRecord out = rec;
        out.boxes.clear();
        for (const auto& b : rec.boxes) {
            // intersect with the crop, drop boxes that fall outside
            const int x0 = std::max(b.x, box.x);
            const int y0 = std::max(b.y, box.y);
            const int x1 = std::min(b.x + b.w, box.x + box.w);
            const int y1 = std::min(b.y + b.h, box.y + box.h);
            if (x1 <= x0 || y1 <= y0) continue;
            data::FindingBox nb;
            nb.symptom = b.symptom;
            nb.x = x0 - box.x;
            nb.y = y0 - box.y;
            nb.w = x1 - x0;
            nb.h = y1 - y0;
            out.boxes.push_back(nb);
        }
        const fs::path name = fs::path(rec.image_path).filename();
        img::write_png_gray((root / "images" / name).string(), cropped);
        out.image_path = (fs::path("images") / name).string();
        result.manifest.records.push_back(std::move(out));
        ++result.accepted;
    }
    data::write_manifest((root / "manifest.jsonl").string(), result.manifest);
    return result;
}

}  // namespace cxr::prep
