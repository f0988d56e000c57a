#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "skelact/error.hpp"
#include "skelact/skeleton.hpp"
#include "skelact/types.hpp"

namespace skelact {

enum class DescriptorFamily {
  Cartesian,
  Angular,
  Mixed,
  Centro,
  RelaCentro,
  RelaCentroDct,
  RelaCentroDctAmdf,
};

/// How the Centro block's reference point is computed.
enum class CentroidMode {
  PerFrame,      ///< mean of the joints in each frame (a trajectory)
  WholeSequence  ///< one mean over every joint of every frame (a constant)
};

struct DescriptorKind {
  DescriptorFamily family = DescriptorFamily::Cartesian;
  int dct_keep = 100;
  int amdf_n = 45;
  CentroidMode centroid = CentroidMode::PerFrame;

  void validate() const;
  friend bool operator==(const DescriptorKind&, const DescriptorKind&) = default;
};

std::string_view to_string(DescriptorFamily f);
DescriptorFamily parse_descriptor_family(std::string_view name);
std::string_view to_string(CentroidMode m);
CentroidMode parse_centroid_mode(std::string_view name);

/// Joint index or kCamera, the fixed capture origin.
inline constexpr int kCamera = -1;

struct AngleTriple {
  int a = 0;
  int vertex = 0;
  int b = 0;
  friend bool operator==(const AngleTriple&, const AngleTriple&) = default;
};

struct AngleTable {
  std::vector<AngleTriple> triples;

  void validate(const SkeletonTopology& topology) const;
  /// Triples that do not reference the camera.
  AngleTable without_camera() const;
  friend bool operator==(const AngleTable&, const AngleTable&) = default;
};

/// The 35 most-active-bone angles over the kinect20 joint names: arm, leg,
/// symmetric, big-symmetric, hand-foot and camera-facing groups.
AngleTable default_angle_table(const SkeletonTopology& topology);

/// JSON list of [joint, vertex, joint] name triples; "CAMERA" is the origin.
AngleTable parse_angle_table(std::string_view json_text, const SkeletonTopology& topology);
AngleTable load_angle_table(const std::filesystem::path& path, const SkeletonTopology& topology);
std::string angle_table_to_json(const AngleTable& table, const SkeletonTopology& topology);

inline constexpr double kDegenerateRay = 1e-12;

/// Angle at `v` between rays v->a and v->b, in [0, pi].
template <typename DA, typename DV, typename DB>
typename DA::Scalar vertex_angle(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DV>& v,
                                 const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  using std::acos;
  const Eigen::Matrix<Scalar, 3, 1> ra = a - v;
  const Eigen::Matrix<Scalar, 3, 1> rb = b - v;
  const Scalar na = ra.norm(), nb = rb.norm();
  if (!(na >= Scalar(kDegenerateRay)) || !(nb >= Scalar(kDegenerateRay)))
    throw Error("vertex_angle: degenerate ray (|a-v| = " + std::to_string(double(na)) +
                ", |b-v| = " + std::to_string(double(nb)) + ")");
  Scalar c = ra.dot(rb) / (na * nb);
  c = std::clamp(c, Scalar(-1), Scalar(1));
  return acos(c);
}

/// Per-frame feature vectors, one row per source frame.
struct DescriptorSequence {
  Eigen::MatrixXd vectors;
  DescriptorKind kind;

  int frame_count() const { return static_cast<int>(vectors.rows()); }
  int dimension() const { return static_cast<int>(vectors.cols()); }
};

/// 3 x F trajectory; column t is the mean joint position of frame t.
Eigen::Matrix3Xd per_frame_centroid(const ActionSequence& seq);
/// Single mean over all joints of all frames.
Eigen::Vector3d sequence_centroid(const ActionSequence& seq);

/// Raw base signal per family, D x F (columns are frames).
Eigen::MatrixXd cartesian_base(const ActionSequence& seq);
Eigen::MatrixXd angular_base(const ActionSequence& seq, const AngleTable& angles);

/// Expands a D x F base signal into F rows of
///   [B(t), mean, variance, skewness, kurtosis, velocity, acceleration, jerk]
/// (8D columns), using edge replication for windows that cross either end.
Eigen::MatrixXd stats_calculus(const Eigen::MatrixXd& base);

/// Full descriptor extraction for one sequence.
DescriptorSequence extract(const ActionSequence& seq, const DescriptorKind& kind,
                           const AngleTable& angles);

/// Per-frame descriptor dimension for a given joint and angle count.
int descriptor_dimension(const DescriptorKind& kind, int joints, int angles);

}  // namespace skelact
