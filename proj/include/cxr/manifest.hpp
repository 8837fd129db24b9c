#pragma once

// Dataset manifest: one JSON object per line, strict schema.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cxr::data {

enum class Disease { Normal, Tb, Covid, Unlabeled };

std::string to_string(Disease d);
Disease disease_from_string(const std::string& s);

inline constexpr int kNumSymptoms = 7;
// canonical order, identical everywhere
inline constexpr std::array<const char*, kNumSymptoms> kSymptomNames = {
    "infiltration", "effusion",     "atelectasis",  "nodule",
    "mass",         "pneumothorax", "consolidation"};

int symptom_index(const std::string& name);  // -1 if unknown

struct SymptomVector {
    std::array<bool, kNumSymptoms> bits{};

    int popcount() const {
        int n = 0;
        for (bool b : bits) n += b ? 1 : 0;
        return n;
    }
    bool any() const { return popcount() > 0; }
};

struct FindingBox {
    std::string symptom;
    int x = 0, y = 0, w = 0, h = 0;
};

struct SampleRecord {
    std::string image_path;
    std::string patient_id;
    std::string source;
    Disease disease = Disease::Unlabeled;
    std::optional<SymptomVector> symptoms;  // absent for disease-only cohorts
    std::vector<FindingBox> boxes;
};

struct Manifest {
    std::vector<SampleRecord> records;
    int schema_version = 1;
};

struct ClassCounts {
    std::map<Disease, std::size_t> disease;
    std::array<std::size_t, kNumSymptoms> symptom{};
};

Manifest load_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& m);

// single-record (de)serialization, used by load/write and the tests
SampleRecord record_from_json_line(const std::string& line, int line_no);
std::string record_to_json_line(const SampleRecord& r);

ClassCounts class_counts(const Manifest& m);

}  // namespace cxr::data
