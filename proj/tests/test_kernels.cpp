#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cxr/kernels.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

// textbook triple loop, no skips, independent of the library kernels
void naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                double alpha, const std::vector<double>& a, std::size_t lda,
                const std::vector<double>& b, std::size_t ldb, double beta,
                std::vector<double>& c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ta ? a[p * lda + i] : a[i * lda + p];
                const double bv = tb ? b[j * ldb + p] : b[p * ldb + j];
                acc += av * bv;
            }
            c[i * ldc + j] = alpha * acc + beta * c[i * ldc + j];
        }
}

}  // namespace

TEST_CASE("scalar gemm matches naive oracle for all transpose combos") {
    Rng rng(42);
    const auto& t = kernels::scalar_table();
    for (int ta = 0; ta < 2; ++ta)
        for (int tb = 0; tb < 2; ++tb)
            for (int rep = 0; rep < 5; ++rep) {
                const std::size_t m = 1 + rng.bounded(9);
                const std::size_t n = 1 + rng.bounded(9);
                const std::size_t k = 1 + rng.bounded(9);
                const std::size_t lda = ta ? m : k;
                const std::size_t ldb = tb ? k : n;
                auto a = random_vec((ta ? k : m) * lda, rng);
                auto b = random_vec((tb ? n : k) * ldb, rng);
                auto c = random_vec(m * n, rng);
                auto expect = c;
                const double alpha = rng.uniform(-2.0, 2.0);
                const double beta = rep % 2 ? 1.0 : 0.0;
                naive_gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta,
                           expect, n);
                t.gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb,
                       beta, c.data(), n);
                for (std::size_t i = 0; i < m * n; ++i)
                    CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-12));
            }
}

#if defined(__x86_64__)
TEST_CASE("avx2 kernels agree with scalar kernels") {
    if (!kernels::cpu_has_avx2()) {
        MESSAGE("AVX2 not available on this CPU; skipping");
        return;
    }
    Rng rng(7);
    const auto& s = kernels::scalar_table();
    const auto& v = kernels::avx2_table();
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 1 + rng.bounded(257);  // odd tails included
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);

        CHECK(v.dot(a.data(), b.data(), n) ==
              doctest::Approx(s.dot(a.data(), b.data(), n)).epsilon(1e-12));
        CHECK(v.vsum(a.data(), n) ==
              doctest::Approx(s.vsum(a.data(), n)).epsilon(1e-12));
        CHECK(v.vmax(a.data(), n) == s.vmax(a.data(), n));

        std::vector<double> o1(n), o2(n);
        v.vadd(a.data(), b.data(), o1.data(), n);
        s.vadd(a.data(), b.data(), o2.data(), n);
        CHECK(o1 == o2);
        v.vmul(a.data(), b.data(), o1.data(), n);
        s.vmul(a.data(), b.data(), o2.data(), n);
        CHECK(o1 == o2);
        v.vscale(a.data(), 1.7, o1.data(), n);
        s.vscale(a.data(), 1.7, o2.data(), n);
        CHECK(o1 == o2);

        auto y1 = b, y2 = b;
        v.axpy(-0.3, a.data(), y1.data(), n);
        s.axpy(-0.3, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));
    }

    // gemm equivalence on assorted shapes
    for (int ta = 0; ta < 2; ++ta)
        for (int tb = 0; tb < 2; ++tb)
            for (int rep = 0; rep < 4; ++rep) {
                const std::size_t m = 1 + rng.bounded(33);
                const std::size_t n = 1 + rng.bounded(33);
                const std::size_t k = 1 + rng.bounded(33);
                const std::size_t lda = ta ? m : k;
                const std::size_t ldb = tb ? k : n;
                auto a = random_vec((ta ? k : m) * lda, rng);
                auto b = random_vec((tb ? n : k) * ldb, rng);
                auto c1 = random_vec(m * n, rng);
                auto c2 = c1;
                s.gemm(ta, tb, m, n, k, 1.3, a.data(), lda, b.data(), ldb, 1.0,
                       c1.data(), n);
                v.gemm(ta, tb, m, n, k, 1.3, a.data(), lda, b.data(), ldb, 1.0,
                       c2.data(), n);
                for (std::size_t i = 0; i < m * n; ++i)
                    CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-11));
            }
}
#endif

TEST_CASE("force_backend switches and rejects unknown names") {
    const std::string original = kernels::active_name();
    kernels::force_backend("scalar");
    CHECK(kernels::active_name() == "scalar");
    CHECK_THROWS(kernels::force_backend("neon"));
#if defined(__x86_64__)
    if (kernels::cpu_has_avx2()) {
        kernels::force_backend("avx2");
        CHECK(kernels::active_name() == "avx2");
    }
#endif
    kernels::force_backend(original);
}
