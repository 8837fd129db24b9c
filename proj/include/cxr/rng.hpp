#pragma once

// Named, seeded PRNG wrapper. The algorithm (mt19937_64) is fixed in the
// config so shuffles and draws reproduce across implementations; bounded
// draws avoid std::uniform_int_distribution, whose output is
// implementation-defined.

#include <cstdint>
#include <random>
#include <sstream>
#include <vector>

namespace cxr {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, n) via rejection sampling
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {  // Fisher-Yates
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[bounded(i)]);
    }

    // standard normal via Box-Muller
    double normal() {
        const double u1 = 1.0 - uniform();  // avoid log(0)
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::string save_state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }
    void restore_state(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cxr
