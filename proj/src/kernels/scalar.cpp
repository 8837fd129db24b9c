#include "cxr/kernels.hpp"

#include <algorithm>

namespace cxr::kernels {
namespace {

inline const double* row_ptr(const double* a, std::size_t lda, std::size_t i) {
    return a + i * lda;
}

void gemm_scalar(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
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
        for (std::size_t p = 0; p < k; ++p) {
            const double aval = trans_a ? a[p * lda + i] : a[i * lda + p];
            if (aval == 0.0) continue;
            const double s = alpha * aval;
            if (!trans_b) {
                const double* brow = row_ptr(b, ldb, p);
                for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
            } else {
                for (std::size_t j = 0; j < n; ++j) crow[j] += s * b[j * ldb + p];
            }
        }
    }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vadd_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void vscale_scalar(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

double vsum_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double vmax_scalar(const double* a, std::size_t n) {
    double m = a[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, a[i]);
    return m;
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{gemm_scalar, dot_scalar,  axpy_scalar,
                                   vadd_scalar, vmul_scalar, vscale_scalar,
                                   vsum_scalar, vmax_scalar};
    return table;
}

}  // namespace cxr::kernels
