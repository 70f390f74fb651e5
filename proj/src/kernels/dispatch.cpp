#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "cardiosynth/kernels/kernels.hpp"

namespace cardiosynth::kernels {

#ifndef CARDIOSYNTH_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool cpu_supports(Isa isa) {
  if (isa == Isa::scalar) return true;
#if defined(CARDIOSYNTH_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  return avx2_table() != nullptr && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable* table_for(Isa isa) { return isa == Isa::avx2 ? avx2_table() : &scalar_table(); }

const KernelTable* initial_table() {
  const char* env = std::getenv("CARDIOSYNTH_KERNELS");
  const std::string choice = env ? env : "auto";
  if (choice == "scalar") return &scalar_table();
  if (choice == "avx2" && !cpu_supports(Isa::avx2))
    throw std::runtime_error("CARDIOSYNTH_KERNELS=avx2 requested but AVX2/FMA is unavailable");
  return cpu_supports(Isa::avx2) ? avx2_table() : &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> s{initial_table()};
  return s;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) {
  if (!cpu_supports(isa)) throw std::runtime_error("kernel ISA " + std::string(to_string(isa)) + " unavailable");
  slot().store(table_for(isa), std::memory_order_release);
}

}  // namespace cardiosynth::kernels
