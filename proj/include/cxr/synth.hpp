#pragma once

// Deterministic synthetic chest-radiograph corpus: two-lung phantoms with
// class-specific disease patterns and seven geometric finding types whose
// bounding boxes are recorded in the manifest. Used by the toy profile
// and the end-to-end tests.

#include <cstdint>
#include <string>

#include "cxr/manifest.hpp"

namespace cxr::synth {

struct SynthOptions {
    int n_images = 640;
    int image_size = 96;
    std::uint64_t seed = 7;
};

// Writes PNGs under <out_dir>/images/ and the manifest to
// <out_dir>/manifest.jsonl; returns the manifest.
data::Manifest generate_corpus(const std::string& out_dir,
                               const SynthOptions& opt);

}  // namespace cxr::synth
