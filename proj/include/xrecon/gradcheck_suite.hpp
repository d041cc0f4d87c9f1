#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xrecon {

struct GradCheckEntry {
  std::string name;
  std::string precision;  // "f64" or "f32 vs f64"
  double max_rel_error = 0;
  double tolerance = 0;
  std::string worst;
  std::size_t skipped = 0;  // elements whose stencil straddles a relu kink  // "param[index] analytic vs numeric" of the largest error
  /// The check is a planted bug; the entry passes when the checker rejects it.
  bool expect_failure = false;
  bool passed = false;
};

struct GradCheckSuiteReport {
  std::vector<GradCheckEntry> entries;
  double seconds = 0;
  bool passed() const;
  /// One line per check; no wall-clock figures, so reruns print identical text.
  std::string to_text() const;
};

inline constexpr double kOpTolerance = 1e-5;
inline constexpr double kEndToEndTolerance = 1e-3;

/// Per-op 64-bit checks on random micro shapes, whole teacher and student
/// losses on a micro config in 64-bit and in 32-bit against 64-bit
/// differences, and a negative control with a wrong derivative.
GradCheckSuiteReport run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace xrecon
