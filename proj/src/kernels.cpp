#include "mufasa/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace mufasa::kernels {
namespace {

const KernelTable* pick() {
    if (const char* env = std::getenv("MUFASA_SIMD"); env && std::string_view(env) == "scalar") {
        return &scalar_table();
    }
    if (const KernelTable* t = avx2_table()) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*> g_forced{nullptr};

}  // namespace

const KernelTable& active() {
    if (const KernelTable* f = g_forced.load(std::memory_order_relaxed)) return *f;
    static const KernelTable* chosen = pick();
    return *chosen;
}

void force(const KernelTable* table) { g_forced.store(table, std::memory_order_relaxed); }

}  // namespace mufasa::kernels
