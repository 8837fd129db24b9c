#include "cxr/manifest.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace cxr::data {

using nlohmann::json;

std::string to_string(Disease d) {
    switch (d) {
        case Disease::Normal: return "normal";
        case Disease::Tb: return "tb";
        case Disease::Covid: return "covid";
        case Disease::Unlabeled: return "unlabeled";
    }
    throw std::logic_error("bad Disease value");
}

Disease disease_from_string(const std::string& s) {
    if (s == "normal") return Disease::Normal;
    if (s == "tb") return Disease::Tb;
    if (s == "covid") return Disease::Covid;
    if (s == "unlabeled") return Disease::Unlabeled;
    throw std::invalid_argument("disease: unknown value \"" + s + "\"");
}

int symptom_index(const std::string& name) {
    for (int i = 0; i < kNumSymptoms; ++i)
        if (name == kSymptomNames[i]) return i;
    return -1;
}

namespace {

[[noreturn]] void schema_error(int line_no, const std::string& what) {
    throw std::runtime_error("manifest line " + std::to_string(line_no) +
                             ": " + what);
}

}  // namespace

SampleRecord record_from_json_line(const std::string& line, int line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        schema_error(line_no, std::string("parse error: ") + e.what());
    }
    if (!j.is_object()) schema_error(line_no, "record is not an object");

    static const std::set<std::string> allowed = {
        "image_path", "patient_id", "source", "disease", "symptoms", "boxes"};
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) schema_error(line_no, "unknown key \"" + key + "\"");
    for (const auto& key : allowed)
        if (!j.contains(key)) schema_error(line_no, "missing key \"" + key + "\"");

    SampleRecord r;
    if (!j["image_path"].is_string() || j["image_path"].get<std::string>().empty())
        schema_error(line_no, "image_path must be a nonempty string");
    r.image_path = j["image_path"].get<std::string>();
    if (!j["patient_id"].is_string() || j["patient_id"].get<std::string>().empty())
        schema_error(line_no, "patient_id must be a nonempty string");
    r.patient_id = j["patient_id"].get<std::string>();
    if (!j["source"].is_string())
        schema_error(line_no, "source must be a string");
    r.source = j["source"].get<std::string>();
    if (!j["disease"].is_string())
        schema_error(line_no, "disease must be a string");
    try {
        r.disease = disease_from_string(j["disease"].get<std::string>());
    } catch (const std::invalid_argument& e) {
        schema_error(line_no, e.what());
    }

    const auto& sym = j["symptoms"];
    if (sym.is_null()) {
        r.symptoms.reset();
    } else if (sym.is_array()) {
        if (sym.size() != kNumSymptoms)
            schema_error(line_no, "symptoms length must be 7, got " +
                                      std::to_string(sym.size()));
        SymptomVector v;
        for (int i = 0; i < kNumSymptoms; ++i) {
            if (!sym[i].is_number_integer())
                schema_error(line_no, "symptoms entries must be integers");
            const int bit = sym[i].get<int>();
            if (bit != 0 && bit != 1)
                schema_error(line_no, "symptoms entries must be 0 or 1");
            v.bits[i] = bit == 1;
        }
        r.symptoms = v;
    } else {
        schema_error(line_no, "symptoms must be an array of 7 integers or null");
    }

    const auto& boxes = j["boxes"];
    if (!boxes.is_array()) schema_error(line_no, "boxes must be an array");
    for (const auto& b : boxes) {
        if (!b.is_object()) schema_error(line_no, "box must be an object");
        static const std::set<std::string> box_keys = {"symptom", "x", "y", "w", "h"};
        for (const auto& [key, _] : b.items())
            if (!box_keys.count(key))
                schema_error(line_no, "unknown box key \"" + key + "\"");
        for (const auto& key : box_keys)
            if (!b.contains(key)) schema_error(line_no, "missing box key \"" + key + "\"");
        FindingBox fb;
        if (!b["symptom"].is_string())
            schema_error(line_no, "box symptom must be a string");
        fb.symptom = b["symptom"].get<std::string>();
        if (symptom_index(fb.symptom) < 0)
            schema_error(line_no, "box symptom \"" + fb.symptom + "\" unknown");
        for (const char* k : {"x", "y", "w", "h"})
            if (!b[k].is_number_integer())
                schema_error(line_no, std::string("box ") + k + " must be an integer");
        fb.x = b["x"].get<int>();
        fb.y = b["y"].get<int>();
        fb.w = b["w"].get<int>();
        fb.h = b["h"].get<int>();
        if (fb.x < 0 || fb.y < 0 || fb.w < 0 || fb.h < 0)
            schema_error(line_no, "box coordinates must be non-negative");
        r.boxes.push_back(fb);
    }
    return r;
}

std::string record_to_json_line(const SampleRecord& r) {
    json j;
    j["image_path"] = r.image_path;
    j["patient_id"] = r.patient_id;
    j["source"] = r.source;
    j["disease"] = to_string(r.disease);
    if (r.symptoms) {
        json arr = json::array();
        for (bool b : r.symptoms->bits) arr.push_back(b ? 1 : 0);
        j["symptoms"] = arr;
    } else {
        j["symptoms"] = nullptr;
    }
    json boxes = json::array();
    for (const auto& b : r.boxes) {
        boxes.push_back({{"symptom", b.symptom},
                         {"x", b.x},
                         {"y", b.y},
                         {"w", b.w},
                         {"h", b.h}});
    }
    j["boxes"] = boxes;
    return j.dump();
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest file not found: " + path);
    Manifest m;
    std::set<std::string> seen_paths;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        SampleRecord r = record_from_json_line(line, line_no);
        if (!seen_paths.insert(r.image_path).second)
            schema_error(line_no, "duplicate image_path \"" + r.image_path + "\"");
        m.records.push_back(std::move(r));
    }
    return m;
}

void write_manifest(const std::string& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    for (const auto& r : m.records) out << record_to_json_line(r) << "\n";
}

ClassCounts class_counts(const Manifest& m) {
    ClassCounts c;
    c.disease[Disease::Normal] = 0;
    c.disease[Disease::Tb] = 0;
    c.disease[Disease::Covid] = 0;
    c.disease[Disease::Unlabeled] = 0;
    for (const auto& r : m.records) {
        ++c.disease[r.disease];
        if (r.symptoms)
            for (int i = 0; i < kNumSymptoms; ++i)
                if (r.symptoms->bits[i]) ++c.symptom[i];
    }
    return c;
}

}  // namespace cxr::data
