#pragma once

// Patient-wise splitting into test / labeled / three unlabeled folds, and
// the symptom-weighted training sampler.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cxr/manifest.hpp"
#include "cxr/rng.hpp"

namespace cxr::data {

struct SplitPlan {
    std::set<std::string> test_ids;
    std::set<std::string> labeled_ids;
    std::vector<std::set<std::string>> unlabeled_fold_ids;  // size 3
    std::uint64_t seed = 0;
};

// fractions: 10% of patients to test (floor), then 30% of the remaining
// pool labeled (round half up); the rest splits into 3 folds whose sizes
// differ by at most one.
SplitPlan make_split(const Manifest& m, std::uint64_t seed,
                     double test_fraction = 0.10,
                     double labeled_fraction = 0.30, bool stratify = false);

void write_split(const std::string& path, const SplitPlan& plan);
SplitPlan read_split(const std::string& path);

// every record whose patient id is in `ids`, manifest order preserved
std::vector<const SampleRecord*> records_for(const Manifest& m,
                                             const std::set<std::string>& ids);

// 3.0 for records with at least one positive symptom, else 1.0; absent
// symptom vectors count as all-false
std::vector<double> sampler_weights(
    const std::vector<const SampleRecord*>& records);

// with-replacement draws proportional to weight
class WeightedSampler {
public:
    explicit WeightedSampler(std::vector<double> weights);
    std::size_t draw(Rng& rng) const;

private:
    std::vector<double> cumulative_;
};

}  // namespace cxr::data
