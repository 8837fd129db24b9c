#pragma once

// Data-parallel math kernels used by the tensor/autodiff layer.
//
// Every kernel has a portable scalar reference implementation and, on
// x86-64 with AVX2+FMA, a vectorized variant. The active backend is
// selected once at startup from cpuid and can be forced with the
// CXR_KERNEL_BACKEND environment variable ("scalar" or "avx2"); the
// scalar versions stay compiled in and are the ground truth for the
// equivalence tests.
//
// All kernels operate on double precision. Matrices are row-major.

#include <cstddef>
#include <string>

namespace cxr::kernels {

struct KernelTable {
    // C[m x n] (+)= A[m x k] * B[k x n], row-major, optional transposes.
    // beta == 0 overwrites C, beta == 1 accumulates.
    void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, double alpha, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double beta, double* c,
                 std::size_t ldc);
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*vadd)(const double* a, const double* b, double* out, std::size_t n);
    void (*vmul)(const double* a, const double* b, double* out, std::size_t n);
    void (*vscale)(const double* a, double s, double* out, std::size_t n);
    double (*vsum)(const double* a, std::size_t n);
    double (*vmax)(const double* a, std::size_t n);
};

const KernelTable& scalar_table();
#if defined(__x86_64__)
const KernelTable& avx2_table();
#endif

// Backend active for this process.
const KernelTable& active();
std::string active_name();

// Test hook: force a backend by name ("scalar", "avx2"). Throws on an
// unknown or unavailable backend.
void force_backend(const std::string& name);

bool cpu_has_avx2();

}  // namespace cxr::kernels
