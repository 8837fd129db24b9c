#include <cstdlib>
#include <stdexcept>

#include "cxr/kernels.hpp"

#if defined(__x86_64__)
#include <cpuid.h>
#endif

namespace cxr::kernels {
namespace {

const KernelTable* g_active = nullptr;
std::string g_name;

void select_default() {
#if defined(__x86_64__)
    if (cpu_has_avx2()) {
        g_active = &avx2_table();
        g_name = "avx2";
        return;
    }
#endif
    g_active = &scalar_table();
    g_name = "scalar";
}

void init_once() {
    if (g_active) return;
    if (const char* env = std::getenv("CXR_KERNEL_BACKEND")) {
        force_backend(env);
        return;
    }
    select_default();
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__)
    unsigned int eax = 0, ebx = 0, ecx = 0, edx = 0;
    if (__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) {
        return (ebx & (1u << 5)) != 0;  // AVX2 feature bit
    }
#endif
    return false;
}

const KernelTable& active() {
    init_once();
    return *g_active;
}

std::string active_name() {
    init_once();
    return g_name;
}

void force_backend(const std::string& name) {
    if (name == "scalar") {
        g_active = &scalar_table();
        g_name = "scalar";
        return;
    }
#if defined(__x86_64__)
    if (name == "avx2") {
        if (!cpu_has_avx2())
            throw std::runtime_error("kernel backend avx2 not supported on this CPU");
        g_active = &avx2_table();
        g_name = "avx2";
        return;
    }
#endif
    throw std::runtime_error("unknown kernel backend: " + name);
}

}  // namespace cxr::kernels
