#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "tdlfd/kinematics.hpp"
#include "tdlfd/tasks.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return TDLFD_DATA_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(TDLFD_FIXTURES) / name; }

inline tdlfd::RobotSpec eight_robot() { return tdlfd::load_robot(data_dir() / "robots/robot_eight.json"); }
inline tdlfd::RobotSpec anatomy_robot() { return tdlfd::load_robot(data_dir() / "robots/robot_anatomy.json"); }
inline tdlfd::TaskDef task(const std::string& name) { return tdlfd::load_task(data_dir() / "tasks" / (name + ".json")); }

// fresh directory under the system temp dir, removed on destruction
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("tdlfd-" + tag + "-" + std::to_string(rd()));
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

inline tdlfd::Config random_config(const tdlfd::RobotSpec& spec, std::mt19937_64& rng) {
  tdlfd::Config c = tdlfd::home_config(spec);
  for (Eigen::Index i = 0; i < c.tensions.size(); ++i) {
    c.tensions[i] = std::uniform_real_distribution<double>(0.0, spec.tension_max[static_cast<std::size_t>(i)])(rng);
  }
  if (spec.insertion_enabled) c.insertion = std::uniform_real_distribution<double>(0.02, spec.insertion_max)(rng);
  if (spec.rotation_enabled) c.rotation = std::uniform_real_distribution<double>(-3.14, 3.14)(rng);
  return c;
}

inline tdlfd::RobotSpec single_tendon_robot(double bending_stiffness = 1e-2) {
  tdlfd::RobotSpec s;
  s.name = "single";
  s.length = 0.2;
  s.backbone_radius = 0.01;
  s.bending_stiffness = bending_stiffness;
  s.torsional_stiffness = 0.8 * bending_stiffness;
  s.tendons = {{tdlfd::RoutingKind::straight, 0.01, 0.7, 0.0}};
  s.tension_max = {20.0};
  s.insertion_max = 0.2;
  return s;
}

}  // namespace testing
