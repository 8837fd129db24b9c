#include "cxr/archive.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cxr::io {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'C', 'X', 'R', 'T', 'N', 'S', 'R', '1'};
}

void write_archive(const std::string& path, const TensorArchive& ar) {
    json header;
    header["metadata"] = ar.metadata_json;
    json list = json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ar.tensors) {
        if (t.data.size() != t.rows * t.cols)
            throw std::invalid_argument("archive: tensor \"" + name +
                                        "\" data/shape mismatch");
        list.push_back({{"name", name},
                        {"dtype", "f64"},
                        {"shape", {t.rows, t.cols}},
                        {"offset", offset}});
        offset += t.data.size() * sizeof(double);
    }
    header["tensors"] = list;
    const std::string hdr = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write archive: " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = hdr.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    for (const auto& [name, t] : ar.tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("archive write failed: " + path);
}

TensorArchive read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("archive not found: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a tensor archive: " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hdr(hlen, '\0');
    in.read(hdr.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("truncated archive header: " + path);
    json header = json::parse(hdr);

    TensorArchive ar;
    ar.metadata_json = header.value("metadata", std::string{});
    for (const auto& e : header.at("tensors")) {
        const std::string name = e.at("name").get<std::string>();
        if (e.at("dtype").get<std::string>() != "f64")
            throw std::runtime_error("archive tensor \"" + name +
                                     "\": unsupported dtype");
        NamedTensor t;
        t.rows = e.at("shape")[0].get<std::size_t>();
        t.cols = e.at("shape")[1].get<std::size_t>();
        t.data.resize(t.rows * t.cols);
        ar.tensors.emplace(name, std::move(t));
    }
    // payloads follow in name order, matching the writer
    for (auto& [name, t] : ar.tensors) {
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in)
            throw std::runtime_error("archive payload truncated at tensor \"" +
                                     name + "\"");
    }
    return ar;
}

}  // namespace cxr::io
