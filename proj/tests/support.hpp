#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "xrecon/config.hpp"

namespace xrecon::support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("xrecon_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small but complete run: 2 train / 1 val / 1 test phantoms, 2 epochs.
inline RunConfig tiny_config() {
  RunConfig c;
  c.data.n_train = 2;
  c.data.n_val = 1;
  c.data.n_test = 1;
  c.data.points = 256;
  c.train.epochs = 2;
  c.train.val_points = 256;
  c.eval.runs = 1;
  c.eval.n_points = 256;
  c.eval.emd_points = 128;
  c.eval.resolution = 24;
  c.eval.gt_resolution = 32;
  return c;
}

}  // namespace xrecon::support
