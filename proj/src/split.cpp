#include "cxr/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace cxr::data {

using nlohmann::json;

SplitPlan make_split(const Manifest& m, std::uint64_t seed,
                     double test_fraction, double labeled_fraction,
                     bool stratify) {
    // unique patients in first-appearance order
    std::vector<std::string> patients;
    std::set<std::string> seen;
    std::map<std::string, Disease> patient_disease;
    for (const auto& r : m.records) {
        if (seen.insert(r.patient_id).second) {
            patients.push_back(r.patient_id);
            patient_disease[r.patient_id] = r.disease;
        }
    }
    const std::size_t n = patients.size();
    if (n < 10)
        throw std::runtime_error("make_split: need at least 10 patients, have " +
                                 std::to_string(n));

    Rng rng(seed);
    if (!stratify) {
        rng.shuffle(patients);
    } else {
        // shuffle within disease groups, then interleave round-robin
        std::map<Disease, std::vector<std::string>> groups;
        for (const auto& p : patients) groups[patient_disease[p]].push_back(p);
        for (auto& [_, g] : groups) rng.shuffle(g);
        patients.clear();
        bool more = true;
        std::size_t i = 0;
        while (more) {
            more = false;
            for (auto& [_, g] : groups) {
                if (i < g.size()) {
                    patients.push_back(g[i]);
                    more = true;
                }
            }
            ++i;
        }
    }

    const std::size_t n_test =
        static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
    const std::size_t pool = n - n_test;
    const std::size_t n_labeled = static_cast<std::size_t>(
        std::floor(labeled_fraction * static_cast<double>(pool) + 0.5));
    if (n_test == 0 || n_labeled == 0 || pool - n_labeled < 3)
        throw std::runtime_error("make_split: too few patients to populate all partitions");

    SplitPlan plan;
    plan.seed = seed;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n_test; ++i) plan.test_ids.insert(patients[idx++]);
    for (std::size_t i = 0; i < n_labeled; ++i)
        plan.labeled_ids.insert(patients[idx++]);
    const std::size_t rest = pool - n_labeled;
    const std::size_t base = rest / 3;
    const std::size_t rem = rest % 3;
    plan.unlabeled_fold_ids.resize(3);
    for (std::size_t f = 0; f < 3; ++f) {
        // the last `rem` folds take one extra so sizes differ by at most 1
        const std::size_t sz = base + (f >= 3 - rem ? 1 : 0);
        for (std::size_t i = 0; i < sz; ++i)
            plan.unlabeled_fold_ids[f].insert(patients[idx++]);
    }
    return plan;
}

void write_split(const std::string& path, const SplitPlan& plan) {
    json j;
    j["seed"] = plan.seed;
    j["test"] = plan.test_ids;
    j["labeled"] = plan.labeled_ids;
    j["unlabeled_folds"] = plan.unlabeled_fold_ids;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write split: " + path);
    out << j.dump(2) << "\n";
}

SplitPlan read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("split file not found: " + path);
    json j;
    in >> j;
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.test_ids = j.at("test").get<std::set<std::string>>();
    plan.labeled_ids = j.at("labeled").get<std::set<std::string>>();
    plan.unlabeled_fold_ids =
        j.at("unlabeled_folds").get<std::vector<std::set<std::string>>>();
    if (plan.unlabeled_fold_ids.size() != 3)
        throw std::runtime_error("split file must carry exactly 3 unlabeled folds");
    return plan;
}

std::vector<const SampleRecord*> records_for(const Manifest& m,
                                             const std::set<std::string>& ids) {
    std::vector<const SampleRecord*> out;
    for (const auto& r : m.records)
        if (ids.count(r.patient_id)) out.push_back(&r);
    return out;
}

std::vector<double> sampler_weights(
    const std::vector<const SampleRecord*>& records) {
    std::vector<double> w;
    w.reserve(records.size());
    for (const auto* r : records)
        w.push_back(r->symptoms && r->symptoms->any() ? 3.0 : 1.0);
    return w;
}

WeightedSampler::WeightedSampler(std::vector<double> weights) {
    if (weights.empty())
        throw std::invalid_argument("WeightedSampler: no weights");
    cumulative_.resize(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0)
            throw std::invalid_argument("WeightedSampler: non-positive weight");
        acc += weights[i];
        cumulative_[i] = acc;
    }
}

std::size_t WeightedSampler::draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                 static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
}

}  // namespace cxr::data
