#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdlfd/ik.hpp"
#include "tdlfd/learning.hpp"
#include "tdlfd/mesh.hpp"
#include "tdlfd/parallel.hpp"

namespace tdlfd {

using Rng = std::mt19937_64;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct EightTask {
  Vec3 p_ref_min{-0.04, 0.12, 0.085};  // axis-aligned box, flat along y
  Vec3 p_ref_max{0.04, 0.12, 0.125};
  Range width{0.01, 0.04};
  Range height{0.01, 0.04};
};

struct SphereTask {
  Vec3 p_ref_min{-0.02, 0.10, 0.12};
  Vec3 p_ref_max{0.02, 0.10, 0.16};
  Range radius{0.01, 0.03};
};

struct AnatomyTask {
  std::filesystem::path mesh_path;
  Vec3 nominal_p_ref{0.0, 0.0, 0.12};
  double perturbation = 0.01;  // +- per axis
  Range scale{0.5, 1.5};
  Vec3 diamond_offset{0.0, 0.0, 0.03};  // diamond centre relative to p_ref
  double diamond_half_width = 0.012;
};

struct TaskDef {
  Schema variant = Schema::eight_plane;
  std::string name;
  std::string robot;  // default robot spec name or path, may be empty
  EightTask eight;
  SphereTask sphere;
  AnatomyTask anatomy;
  double noise = 0.002;  // humanize amplitude, m
  std::size_t waypoints = 50;
};

void validate(const TaskDef& task);
TaskDef task_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json task_to_json(const TaskDef& task);
TaskDef load_task(const std::filesystem::path& path);

/// Deterministic per-index stream derived from a run seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

ContextVector sample_context(const TaskDef& task, Rng& rng);

/// Closed figure-eight in the x-z plane through p_ref:
/// p(t) = p_ref + (w/2 sin 2t, 0, h/2 sin t), t in [0, 2 pi].
std::vector<Vec3> oracle_eight(const ContextVector& context, std::size_t count);

struct SpherePair {
  Vec3 upper_center;
  double upper_radius;
  Vec3 lower_center;
  double lower_radius;
};

/// Sphere 1 touches p_ref on its -y face; sphere 2 sits directly below it.
SpherePair sphere_pair(const ContextVector& context);

/// Descends sphere 1 from p_ref to the tangency point, then sphere 2 down to
/// its -y face, swinging east on the way. Mirror-symmetric about the tangency
/// plane when the radii are equal and `count` is odd.
std::vector<Vec3> oracle_double_sphere(const ContextVector& context, std::size_t count);

/// Mesh scaled by s about its centroid and moved so the centroid sits at p_ref.
Mesh place_anatomy(const Mesh& mesh, const ContextVector& context);

/// Diamond over p_ref projected onto the placed mesh, traced forward then
/// back: 2 * count - 1 points, a palindrome.
std::vector<Vec3> oracle_anatomy(const ContextVector& context, const Mesh& mesh, const AnatomyTask& task,
                                 std::size_t count);

struct HumanizeNoise {
  double amplitude = 0.002;
  int components = 3;  // sinusoids per axis, 1..3
};

/// Adds a smooth perturbation of at most `amplitude` that vanishes at both ends.
std::vector<Vec3> humanize(const std::vector<Vec3>& points, const HumanizeNoise& noise, Rng& rng);

struct SnapResult {
  TipTrajectory trajectory;  // achieved tips
  std::vector<double> residuals;
  std::vector<Config> configs;
};

/// Replaces each point with the tip reached by warm-started IK from the home config.
SnapResult snap_to_reachable(const RobotSpec& robot, const std::vector<Vec3>& points, const IkSettings& ik);

enum class DemoSource { synthetic, teleop };

struct DemoMeta {
  Schema task = Schema::eight_plane;
  DemoSource source = DemoSource::synthetic;
  std::uint64_t seed = 0;   // synthetic: per-demonstration stream seed
  std::string session;      // teleop session id
  double snap_residual = 0.0;
  std::string manifest;
};

struct Demonstration {
  ContextVector context;
  TipTrajectory trajectory;
  DemoMeta meta;
};

/// The curve the synthetic demonstrator aims for before noise and snapping.
std::vector<Vec3> oracle_curve(const TaskDef& task, const ContextVector& context, const Mesh* mesh,
                               std::size_t count);

struct DatasetOptions {
  std::size_t count = 50;
  std::size_t waypoints = 50;
  double noise = 0.002;
  std::uint64_t seed = 0;
  Exec exec = Exec::serial;
};

/// sample_context -> oracle -> humanize -> snap -> resample, one rng stream per demonstration.
std::vector<Demonstration> generate_dataset(const TaskDef& task, const RobotSpec& robot,
                                            const DatasetOptions& options, const IkSettings& ik,
                                            const Mesh* mesh = nullptr);

/// Synthetic demonstration for a given context (used for held-out cases).
Demonstration demonstrate(const TaskDef& task, const RobotSpec& robot, const ContextVector& context,
                          std::size_t waypoints, double noise, std::uint64_t seed, const IkSettings& ik,
                          const Mesh* mesh = nullptr);

TrainingSet to_training_set(const std::vector<Demonstration>& demos);

// Demonstration store: one JSON record per line.
nlohmann::json demo_to_json(const Demonstration& demo);
Demonstration demo_from_json(const nlohmann::json& doc);
void write_store(const std::filesystem::path& path, const std::vector<Demonstration>& demos);
void append_to_store(const std::filesystem::path& path, const Demonstration& demo);
std::vector<Demonstration> load_store(const std::filesystem::path& path);

struct ReachabilityCheck {
  std::vector<Vec3> probes;
  std::vector<double> residuals;
  double max_residual = 0.0;
};

/// IK spot checks at the corners and centre of the task's p_ref region.
ReachabilityCheck check_reachability(const TaskDef& task, const RobotSpec& robot, const IkSettings& ik,
                                     const Mesh* mesh = nullptr);

}  // namespace tdlfd
