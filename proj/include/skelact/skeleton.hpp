#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "skelact/types.hpp"

namespace skelact {

struct Bone {
  int parent = 0;
  int child = 0;
  friend bool operator==(const Bone&, const Bone&) = default;
};

/// Joint names plus a bone tree. Immutable once constructed; the constructor
/// rejects anything that is not a spanning tree rooted at `root`.
class SkeletonTopology {
 public:
  /// `root` defaults to a joint called HipCenter (any case or separator), or
  /// the first joint when no such joint exists.
  SkeletonTopology(std::string name, std::vector<std::string> joint_names,
                   const std::vector<std::pair<std::string, std::string>>& bones,
                   std::optional<std::string> root = std::nullopt);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& joint_names() const noexcept { return joint_names_; }
  int joint_count() const noexcept { return static_cast<int>(joint_names_.size()); }
  int root() const noexcept { return root_; }
  const std::vector<Bone>& bones() const noexcept { return bones_; }
  int bone_count() const noexcept { return static_cast<int>(bones_.size()); }

  /// Bone indices ordered breadth-first from the root (parent before child).
  const std::vector<int>& traversal() const noexcept { return traversal_; }
  /// Parent joint, or -1 for the root.
  int parent(int joint) const { return parent_.at(joint); }
  std::optional<int> index_of(std::string_view joint) const;
  /// Like index_of but throws Error naming the missing joint.
  int require(std::string_view joint) const;

  friend bool operator==(const SkeletonTopology& a, const SkeletonTopology& b) {
    return a.name_ == b.name_ && a.joint_names_ == b.joint_names_ && a.root_ == b.root_ &&
           a.bones_ == b.bones_;
  }

 private:
  std::string name_;
  std::vector<std::string> joint_names_;
  int root_ = 0;
  std::vector<Bone> bones_;
  std::vector<int> parent_;
  std::vector<int> traversal_;
};

using TopologyPtr = std::shared_ptr<const SkeletonTopology>;

/// One captured pose: column j holds joint j's coordinates.
struct Frame {
  Eigen::Matrix3Xd positions;
  std::int64_t timestamp_index = 0;
};

struct ActionSequence {
  TopologyPtr topology;
  std::vector<Frame> frames;
  std::optional<Label> label;
  std::optional<int> subject;
  std::optional<int> instance;
  /// Optional per-frame ground truth; empty or exactly one entry per frame.
  std::vector<Label> frame_labels;

  int frame_count() const noexcept { return static_cast<int>(frames.size()); }

  /// Throws Error when any structural invariant is violated.
  void validate() const;

  friend bool operator==(const ActionSequence& a, const ActionSequence& b);
};

/// Per-bone target lengths, indexed like SkeletonTopology::bones().
struct BoneLengthProfile {
  Eigen::VectorXd lengths;
};

struct SkippedBone {
  std::size_t sequence = 0;
  int frame = 0;
  int bone = 0;
};

inline constexpr double kDegenerateBoneLength = 1e-12;

/// Mean Euclidean length of every bone over all frames of all sequences.
/// Zero-length samples are skipped (and appended to `skipped` when given);
/// a bone with no usable sample is an error.
BoneLengthProfile compute_average_bone_lengths(std::span<const ActionSequence> training,
                                               std::vector<SkippedBone>* skipped = nullptr);

/// Rescales every bone to its profile length, walking the tree breadth-first
/// so each child moves with its already-final parent. Bone directions and the
/// root position are preserved.
ActionSequence normalize_bones(const ActionSequence& seq, const BoneLengthProfile& profile);

/// Concatenates sequences sharing one topology into a single stream whose
/// per-frame labels are the source sequences' labels.
ActionSequence concatenate(std::span<const ActionSequence> parts);

/// The 20-joint Kinect v1 skeleton (SDK joint order, rooted at HipCenter).
TopologyPtr kinect20_topology();

TopologyPtr parse_topology(std::string_view json_text);
TopologyPtr load_topology(const std::filesystem::path& path);
std::string topology_to_json(const SkeletonTopology& topology);

}  // namespace skelact
