#pragma once

#include <atomic>
#include <cstddef>
#include <new>
#include <vector>

namespace xrecon::ad {

/// Process-wide accounting of bytes held by tensor storage. Used to show
/// that chunked field evaluation has a working set independent of grid size.
class MemoryStats {
 public:
  static std::size_t live_bytes() noexcept { return live_.load(std::memory_order_relaxed); }
  static std::size_t peak_bytes() noexcept { return peak_.load(std::memory_order_relaxed); }
  /// Restart peak tracking from the current live size.
  static void reset_peak() noexcept;

  static void on_allocate(std::size_t bytes) noexcept;
  static void on_deallocate(std::size_t bytes) noexcept;

 private:
  static std::atomic<std::size_t> live_;
  static std::atomic<std::size_t> peak_;
};

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    MemoryStats::on_allocate(n * sizeof(T));
    return static_cast<T*>(::operator new(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryStats::on_deallocate(n * sizeof(T));
    ::operator delete(p);
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Storage = std::vector<T, TrackingAllocator<T>>;

}  // namespace xrecon::ad
