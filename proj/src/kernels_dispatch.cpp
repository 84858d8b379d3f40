#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "rbnn/kernels.hpp"

namespace rbnn::kernels {

namespace {

std::atomic<const Kernels*> g_active{nullptr};

const Kernels* pick_auto() {
    if (const Kernels* k = avx2_kernels(); k != nullptr && avx2_available()) return k;
    return &scalar_kernels();
}

const Kernels* pick(const std::string& name) {
    if (name == "scalar") return &scalar_kernels();
    if (name == "avx2") {
        const Kernels* k = avx2_kernels();
        if (k == nullptr || !avx2_available())
            throw std::runtime_error("kernels: avx2 requested but not available");
        return k;
    }
    if (name == "auto" || name.empty()) return pick_auto();
    throw std::runtime_error("kernels: unknown variant '" + name + "'");
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

const Kernels& active_kernels() {
    const Kernels* k = g_active.load(std::memory_order_acquire);
    if (k == nullptr) {
        const char* env = std::getenv("RBNN_KERNELS");
        k = pick(env ? env : "auto");
        g_active.store(k, std::memory_order_release);
    }
    return *k;
}

void force_kernels(const std::string& name) {
    g_active.store(pick(name), std::memory_order_release);
}

}  // namespace rbnn::kernels
