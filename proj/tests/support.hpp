#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "posegrid/posegrid.hpp"

namespace support {

inline const posegrid::ObjectModel& model(const std::string& name) {
  static const posegrid::ObjectModel lump = posegrid::build_model(posegrid::preset_model("lump"));
  static const posegrid::ObjectModel brick = posegrid::build_model(posegrid::preset_model("brick"));
  static const posegrid::ObjectModel pepper = posegrid::build_model(posegrid::preset_model("pepper"));
  if (name == "lump") return lump;
  if (name == "brick") return brick;
  return pepper;
}

inline posegrid::Pose random_pose(std::mt19937_64& rng, double spread = 0.2) {
  std::uniform_real_distribution<double> u(-spread, spread);
  return {posegrid::uniform_rotation(rng), posegrid::Vec3(u(rng), u(rng), 1.0 + u(rng))};
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("posegrid_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

}  // namespace support
