#pragma once

// Preprocessing pipeline: run lung-mask QC on every manifest record, crop
// accepted images to the tight lung bounding box, remap finding boxes into
// crop coordinates and emit the filtered manifest plus a QC report.

#include <string>

#include "cxr/config.hpp"
#include "cxr/manifest.hpp"
#include "cxr/qc.hpp"

namespace cxr::prep {

struct PrepResult {
    data::Manifest manifest;  // accepted records, paths relative to out_dir
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

// Reads images relative to image_root, writes cropped PNGs under
// <out_dir>/images/, the manifest to <out_dir>/manifest.jsonl and one QC
// JSON line per input to <out_dir>/qc_report.jsonl.
PrepResult run_prep(const data::Manifest& manifest,
                    const std::string& image_root, const std::string& out_dir,
                    const cfg::RunConfig& cfg, qc::MaskProvider& provider);

}  // namespace cxr::prep
