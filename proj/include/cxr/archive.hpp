#pragma once

// Named-tensor archive: a JSON manifest of (name, dtype, shape, offset)
// followed by raw little-endian float64 payloads. Used for model
// checkpoints and optimizer state; round-trips bit-exactly.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace cxr::io {

struct NamedTensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
};

struct TensorArchive {
    std::map<std::string, NamedTensor> tensors;  // sorted by name
    std::string metadata_json;                   // free-form, may be empty
};

void write_archive(const std::string& path, const TensorArchive& ar);
TensorArchive read_archive(const std::string& path);

}  // namespace cxr::io
