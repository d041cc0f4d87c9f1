#include "xrecon/autodiff/memory.hpp"

namespace xrecon::ad {

std::atomic<std::size_t> MemoryStats::live_{0};
std::atomic<std::size_t> MemoryStats::peak_{0};

void MemoryStats::reset_peak() noexcept { peak_.store(live_.load()); }

void MemoryStats::on_allocate(std::size_t bytes) noexcept {
  const std::size_t now = live_.fetch_add(bytes) + bytes;
  std::size_t prev = peak_.load();
  while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
  }
}

void MemoryStats::on_deallocate(std::size_t bytes) noexcept { live_.fetch_sub(bytes); }

}  // namespace xrecon::ad
