#if defined(__x86_64__)

#include <immintrin.h>

#include <algorithm>

#include "cxr/kernels.hpp"

namespace cxr::kernels {
namespace {

inline double hsum_pd(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// axpy on a contiguous row: crow += s * brow
inline void row_axpy(double s, const double* brow, double* crow,
                     std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        __m256d c1 = _mm256_loadu_pd(crow + j + 4);
        c0 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j), c0);
        c1 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j + 4), c1);
        _mm256_storeu_pd(crow + j, c0);
        _mm256_storeu_pd(crow + j + 4, c1);
    }
    for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        c0 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(brow + j), c0);
        _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) crow[j] += s * brow[j];
}

inline double dot_avx2_impl(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                               _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               acc0);
    }
    double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void gemm_avx2(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
               std::size_t k, double alpha, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double beta, double* c,
               std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        if (beta == 0.0) {
            std::fill(crow, crow + n, 0.0);
        } else if (beta != 1.0) {
            for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
        }
        if (!trans_b) {
            // saxpy form: C_i += (alpha * A_ip) * B_p
            for (std::size_t p = 0; p < k; ++p) {
                const double aval = trans_a ? a[p * lda + i] : a[i * lda + p];
                if (aval == 0.0) continue;
                row_axpy(alpha * aval, b + p * ldb, crow, n);
            }
        } else {
            // dot form: C_ij += alpha * <A_i, B_j>
            if (!trans_a) {
                const double* arow = a + i * lda;
                for (std::size_t j = 0; j < n; ++j)
                    crow[j] += alpha * dot_avx2_impl(arow, b + j * ldb, k);
            } else {
                for (std::size_t j = 0; j < n; ++j) {
                    const double* brow = b + j * ldb;
                    double acc = 0.0;
                    for (std::size_t p = 0; p < k; ++p)
                        acc += a[p * lda + i] * brow[p];
                    crow[j] += alpha * acc;
                }
            }
        }
    }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    return dot_avx2_impl(a, b, n);
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    row_axpy(alpha, x, y, n);
}

void vadd_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void vscale_avx2(const double* a, double s, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] * s;
}

double vsum_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double s = hsum_pd(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

double vmax_avx2(const double* a, std::size_t n) {
    if (n < 4) {
        double m = a[0];
        for (std::size_t i = 1; i < n; ++i) m = std::max(m, a[i]);
        return m;
    }
    __m256d acc = _mm256_loadu_pd(a);
    std::size_t i = 4;
    for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(a + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double m = std::max(std::max(lanes[0], lanes[1]),
                        std::max(lanes[2], lanes[3]));
    for (; i < n; ++i) m = std::max(m, a[i]);
    return m;
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table{gemm_avx2, dot_avx2,  axpy_avx2,
                                   vadd_avx2, vmul_avx2, vscale_avx2,
                                   vsum_avx2, vmax_avx2};
    return table;
}

}  // namespace cxr::kernels

#endif  // __x86_64__
