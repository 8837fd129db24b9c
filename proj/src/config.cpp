#include "cxr/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cxr::cfg {

namespace {

enum class KeyType { Int, Double, Bool, String };

struct KeySpec {
    const char* name;
    KeyType type;
    const char* toy_default;
    const char* paper_default;
    // numeric bounds (inclusive); ignored for Bool/String
    double lo;
    double hi;
};

constexpr double kInf = 1e300;

// clang-format off
const KeySpec kRegistry[] = {
    {"seed",                       KeyType::Int,    "1234",   "1234",   0, kInf},

    {"prep.mask_threshold",        KeyType::Int,    "100",    "100",    0, 255},
    {"prep.working_size",          KeyType::Int,    "225",    "225",    1, kInf},

    {"split.test_fraction",        KeyType::Double, "0.10",   "0.10",   0, 1},
    {"split.labeled_fraction",     KeyType::Double, "0.30",   "0.30",   0, 1},
    {"split.stratify",             KeyType::Bool,   "false",  "false",  0, 0},
    {"split.rng",                  KeyType::String, "mt19937_64", "mt19937_64", 0, 0},

    {"aug.global_size",            KeyType::Int,    "64",     "256",    8, kInf},
    {"aug.local_size",             KeyType::Int,    "32",     "128",    8, kInf},
    {"aug.local.n_crops",          KeyType::Int,    "8",      "8",      0, kInf},
    {"aug.global2.scale_lo",       KeyType::Double, "0.75",   "0.75",   1e-9, 1},
    {"aug.global2.scale_hi",       KeyType::Double, "1.0",    "1.0",    1e-9, 1},
    {"aug.local.scale_lo",         KeyType::Double, "0.4",    "0.2",    1e-9, 1},
    {"aug.local.scale_hi",         KeyType::Double, "0.8",    "0.6",    1e-9, 1},
    {"aug.global2.flip_p",         KeyType::Double, "0.5",    "0.5",    0, 1},
    {"aug.global2.rot_degrees",    KeyType::Double, "15",     "15",     0, 180},
    {"aug.global2.autocontrast_p", KeyType::Double, "0.3",    "0.3",    0, 1},
    {"aug.global2.equalize_p",     KeyType::Double, "0.3",    "0.3",    0, 1},
    {"aug.global2.blur_p",         KeyType::Double, "0.3",    "0.3",    0, 1},
    {"aug.local.flip_p",           KeyType::Double, "0.5",    "0.5",    0, 1},
    {"aug.local.rot_degrees",      KeyType::Double, "15",     "15",     0, 180},
    {"aug.local.autocontrast_p",   KeyType::Double, "0.5",    "0.5",    0, 1},
    {"aug.local.equalize_p",       KeyType::Double, "0.5",    "0.5",    0, 1},
    {"aug.local.blur_p",           KeyType::Double, "0.5",    "0.5",    0, 1},
    {"aug.blur_sigma_lo",          KeyType::Double, "0.1",    "0.1",    0, kInf},
    {"aug.blur_sigma_hi",          KeyType::Double, "2.0",    "2.0",    0, kInf},
    {"aug.norm_mean_r",            KeyType::Double, "0.485",  "0.485",  -kInf, kInf},
    {"aug.norm_mean_g",            KeyType::Double, "0.456",  "0.456",  -kInf, kInf},
    {"aug.norm_mean_b",            KeyType::Double, "0.406",  "0.406",  -kInf, kInf},
    {"aug.norm_std_r",             KeyType::Double, "0.229",  "0.229",  1e-9, kInf},
    {"aug.norm_std_g",             KeyType::Double, "0.224",  "0.224",  1e-9, kInf},
    {"aug.norm_std_b",             KeyType::Double, "0.225",  "0.225",  1e-9, kInf},

    {"model.patch_size",           KeyType::Int,    "8",      "8",      1, kInf},
    {"model.embed_dim",            KeyType::Int,    "64",     "384",    1, kInf},
    {"model.depth",                KeyType::Int,    "3",      "12",     1, kInf},
    {"model.heads",                KeyType::Int,    "4",      "6",      1, kInf},
    {"model.ln_eps",               KeyType::Double, "1e-6",   "1e-6",   0, 1},
    {"model.drop_path",            KeyType::Double, "0.1",    "0.1",    0, 0.999},
    {"model.dino_hidden",          KeyType::Int,    "128",    "2048",   1, kInf},
    {"model.dino_bottleneck",      KeyType::Int,    "32",     "256",    1, kInf},
    {"model.dino_out",             KeyType::Int,    "512",    "65536",  1, kInf},
    {"model.head_hidden",          KeyType::Int,    "32",     "256",    1, kInf},

    {"loss.lambda",                KeyType::Double, "0.5",    "0.5",    0, 1},
    {"loss.kl_temp",               KeyType::Double, "2.0",    "2.0",    1e-9, kInf},
    {"loss.focal_gamma",           KeyType::Double, "2.0",    "2.0",    0, kInf},
    {"loss.phase1_disease",        KeyType::Double, "0.25",   "0.25",   0, 1},
    {"loss.phase1_symptom",        KeyType::Double, "0.75",   "0.75",   0, 1},
    {"loss.student_temp",          KeyType::Double, "0.1",    "0.1",    1e-9, kInf},
    {"loss.teacher_temp_lo",       KeyType::Double, "0.04",   "0.04",   1e-9, kInf},
    {"loss.teacher_temp_hi",       KeyType::Double, "0.07",   "0.07",   1e-9, kInf},
    {"loss.teacher_temp_warmup",   KeyType::Double, "0.1",    "0.1",    0, 1},
    {"loss.center_momentum",       KeyType::Double, "0.9",    "0.9",    0, 1},
    {"loss.posw_clip_phase1",      KeyType::Double, "50.0",   "50.0",   1, kInf},
    {"loss.posw_clip_correction",  KeyType::Double, "20.0",   "20.0",   1, kInf},
    {"loss.posw_rare_boost",       KeyType::Double, "1.5",    "1.5",    1, kInf},
    {"loss.posw_boost_cap",        KeyType::Double, "75.0",   "75.0",   1, kInf},

    {"train.epochs_phase1",        KeyType::Int,    "8",      "30",     1, kInf},
    {"train.epochs_per_fold",      KeyType::Int,    "4",      "10",     1, kInf},
    // 0 = half of epochs_per_fold (the reference recipe leaves this open)
    {"train.ssl_epoch",            KeyType::Int,    "0",      "0",      0, kInf},
    {"train.correction_interval",  KeyType::Int,    "25",     "500",    1, kInf},
    {"train.correction_steps",     KeyType::Int,    "10",     "10",     1, kInf},
    {"train.batch_size",           KeyType::Int,    "8",      "32",     1, kInf},
    {"train.lr_start",             KeyType::Double, "1e-3",   "5e-5",   0, kInf},
    {"train.lr_end",               KeyType::Double, "1e-5",   "1e-6",   0, kInf},
    {"train.weight_decay",         KeyType::Double, "0.01",   "0.01",   0, kInf},
    {"train.beta1",                KeyType::Double, "0.9",    "0.9",    0, 1},
    {"train.beta2",                KeyType::Double, "0.999",  "0.999",  0, 1},
    {"train.adam_eps",             KeyType::Double, "1e-8",   "1e-8",   0, kInf},
    {"train.ema_lo",               KeyType::Double, "0.98",   "0.9995", 0, 1},
    {"train.ema_hi",               KeyType::Double, "1.0",    "1.0",    0, 1},
    {"train.pretrained",           KeyType::String, "",       "",       0, 0},

    {"eval.threshold",             KeyType::Double, "0.5",    "0.5",    0, 1},

    {"explain.binarize_q",         KeyType::Double, "0.9",    "0.9",    1e-9, 0.999999},
    {"explain.alpha",              KeyType::Double, "0.4",    "0.4",    0, 1},

    {"synth.n_images",             KeyType::Int,    "640",    "640",    1, kInf},
    {"synth.image_size",           KeyType::Int,    "96",     "96",     32, kInf},
    {"synth.symptom_fraction",     KeyType::Double, "0.45",   "0.45",   0, 1},
};
// clang-format on

const KeySpec* find_key(const std::string& name) {
    for (const auto& k : kRegistry)
        if (name == k.name) return &k;
    return nullptr;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void validate(const KeySpec& spec, const std::string& value) {
    switch (spec.type) {
        case KeyType::Int: {
            std::size_t pos = 0;
            long v = 0;
            try {
                v = std::stol(value, &pos);
            } catch (...) {
                throw std::runtime_error("config key " + std::string(spec.name) +
                                         ": expected integer, got \"" + value + "\"");
            }
            if (pos != value.size())
                throw std::runtime_error("config key " + std::string(spec.name) +
                                         ": expected integer, got \"" + value + "\"");
            if (v < spec.lo || v > spec.hi)
                throw std::runtime_error("config key " + std::string(spec.name) +
                                         ": value " + value + " out of [" +
                                         std::to_string(spec.lo) + "," +
                                         std::to_string(spec.hi) + "]");
            break;
        }
        case KeyType::Double: {
            std::size_t pos = 0;
            double v = 0;
            try {
                v = std::stod(value, &pos);
            } catch (...) {
                throw std::runtime_error("config key " + std::string(spec.name) +
                                         ": expected number, got \"" + value + "\"");
            }
            if (pos != value.size())
                throw std::runtime_error("config key " + std::string(spec.name) +
                                         ": expected number, got \"" + value + "\"");
            if (v < spec.lo || v > spec.hi) {
                std::ostringstream msg;
                msg << "config key " << spec.name << ": value " << value
                    << " out of [" << spec.lo << "," << spec.hi << "]";
                throw std::runtime_error(msg.str());
            }
            break;
        }
        case KeyType::Bool:
            if (value != "true" && value != "false")
                throw std::runtime_error("config key " + std::string(spec.name) +
                                         ": expected true/false, got \"" + value + "\"");
            break;
        case KeyType::String:
            break;
    }
}

}  // namespace

Profile profile_from_string(const std::string& s) {
    if (s == "toy") return Profile::Toy;
    if (s == "paper") return Profile::Paper;
    throw std::runtime_error("unknown profile \"" + s + "\" (expected toy|paper)");
}

RunConfig RunConfig::defaults(Profile p) {
    RunConfig c;
    c.profile_ = p;
    for (const auto& k : kRegistry)
        c.values_[k.name] = (p == Profile::Toy) ? k.toy_default : k.paper_default;
    return c;
}

RunConfig RunConfig::load(Profile p, const std::string& path,
                          const std::vector<std::string>& overrides) {
    RunConfig c = defaults(p);
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config file not found: " + path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": expected key = value");
            c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("override must be key=value: " + ov);
        c.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
    }
    return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw std::runtime_error("unknown config key \"" + key + "\"");
    validate(*spec, value);
    values_[key] = value;
}

int RunConfig::get_int(const std::string& key) const {
    return static_cast<int>(std::stol(values_.at(key)));
}

double RunConfig::get_double(const std::string& key) const {
    return std::stod(values_.at(key));
}

bool RunConfig::get_bool(const std::string& key) const {
    return values_.at(key) == "true";
}

const std::string& RunConfig::get_string(const std::string& key) const {
    return values_.at(key);
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["profile"] = profile_ == Profile::Toy ? "toy" : "paper";
    for (const auto& [k, v] : values_) j["config"][k] = v;
    return j.dump();
}

}  // namespace cxr::cfg
