#include "skelact/skeleton.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <set>
#include <string>

#include "io_util.hpp"
#include "skelact/error.hpp"

namespace skelact {

namespace {

std::string fold_name(std::string_view s) {
  std::string out;
  for (char c : s)
    if (std::isalnum(static_cast<unsigned char>(c)))
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

SkeletonTopology::SkeletonTopology(std::string name, std::vector<std::string> joint_names,
                                   const std::vector<std::pair<std::string, std::string>>& bones,
                                   std::optional<std::string> root)
    : name_(std::move(name)), joint_names_(std::move(joint_names)) {
  if (joint_names_.empty()) throw Error("topology '" + name_ + "': no joints");
  std::set<std::string> seen;
  for (const auto& j : joint_names_) {
    if (j.empty()) throw Error("topology '" + name_ + "': empty joint name");
    if (!seen.insert(j).second) throw Error("topology '" + name_ + "': duplicate joint " + j);
  }

  if (root) {
    root_ = require(*root);
  } else {
    root_ = 0;
    for (int j = 0; j < joint_count(); ++j)
      if (fold_name(joint_names_[j]) == "hipcenter") root_ = j;
  }

  parent_.assign(joint_names_.size(), -1);
  std::vector<std::vector<int>> children(joint_names_.size());
  for (const auto& [p, c] : bones) {
    Bone b{require(p), require(c)};
    if (b.parent == b.child) throw Error("topology '" + name_ + "': self-loop at " + p);
    if (b.child == root_) throw Error("topology '" + name_ + "': root " + c + " has a parent");
    if (parent_[b.child] != -1)
      throw Error("topology '" + name_ + "': joint " + c + " has more than one parent");
    parent_[b.child] = b.parent;
    children[b.parent].push_back(static_cast<int>(bones_.size()));
    bones_.push_back(b);
  }

  std::deque<int> queue{root_};
  std::vector<bool> reached(joint_names_.size(), false);
  reached[root_] = true;
  while (!queue.empty()) {
    int j = queue.front();
    queue.pop_front();
    for (int bi : children[j]) {
      int c = bones_[bi].child;
      if (reached[c]) throw Error("topology '" + name_ + "': cycle through " + joint_names_[c]);
      reached[c] = true;
      traversal_.push_back(bi);
      queue.push_back(c);
    }
  }
  for (int j = 0; j < joint_count(); ++j)
    if (!reached[j])
      throw Error("topology '" + name_ + "': joint " + joint_names_[j] +
                  " is not connected to root " + joint_names_[root_]);
}

std::optional<int> SkeletonTopology::index_of(std::string_view joint) const {
  auto it = std::find(joint_names_.begin(), joint_names_.end(), joint);
  if (it == joint_names_.end()) return std::nullopt;
  return static_cast<int>(it - joint_names_.begin());
}

int SkeletonTopology::require(std::string_view joint) const {
  if (auto i = index_of(joint)) return *i;
  throw Error("topology '" + name_ + "': unknown joint " + std::string(joint));
}

void ActionSequence::validate() const {
  if (!topology) throw Error("sequence has no topology");
  const auto joints = topology->joint_count();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const Frame& fr = frames[f];
    if (fr.positions.cols() != joints)
      throw Error("frame " + std::to_string(f) + ": expected " + std::to_string(joints) +
                  " joints, got " + std::to_string(fr.positions.cols()));
    if (!fr.positions.allFinite()) throw Error("frame " + std::to_string(f) + ": non-finite coordinate");
    if (fr.timestamp_index < 0) throw Error("frame " + std::to_string(f) + ": negative timestamp");
    if (f > 0 && fr.timestamp_index <= frames[f - 1].timestamp_index)
      throw Error("frame " + std::to_string(f) + ": timestamp not strictly increasing");
  }
  if (!frame_labels.empty() && frame_labels.size() != frames.size())
    throw Error("frame_labels has " + std::to_string(frame_labels.size()) + " entries for " +
                std::to_string(frames.size()) + " frames");
}

bool operator==(const ActionSequence& a, const ActionSequence& b) {
  if (!a.topology || !b.topology) return a.topology == b.topology;
  if (!(*a.topology == *b.topology)) return false;
  if (a.label != b.label || a.subject != b.subject || a.instance != b.instance ||
      a.frame_labels != b.frame_labels || a.frames.size() != b.frames.size())
    return false;
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    if (a.frames[f].timestamp_index != b.frames[f].timestamp_index) return false;
    if (a.frames[f].positions != b.frames[f].positions) return false;
  }
  return true;
}

BoneLengthProfile compute_average_bone_lengths(std::span<const ActionSequence> training,
                                               std::vector<SkippedBone>* skipped) {
  if (training.empty()) throw Error("bone profile: empty training set");
  const TopologyPtr& topo = training.front().topology;
  if (!topo) throw Error("bone profile: sequence without topology");
  const int nb = topo->bone_count();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(nb);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(nb);
  std::size_t total_frames = 0;

  for (std::size_t s = 0; s < training.size(); ++s) {
    const ActionSequence& seq = training[s];
    if (!seq.topology || !(*seq.topology == *topo))
      throw Error("bone profile: sequence " + std::to_string(s) + " has a different topology");
    total_frames += seq.frames.size();
    for (int f = 0; f < seq.frame_count(); ++f) {
      const auto& pos = seq.frames[f].positions;
      for (int b = 0; b < nb; ++b) {
        const Bone& bone = topo->bones()[b];
        double len = (pos.col(bone.child) - pos.col(bone.parent)).norm();
        if (!(len >= kDegenerateBoneLength)) {
          if (skipped) skipped->push_back({s, f, b});
          continue;
        }
        sum[b] += len;
        ++count[b];
      }
    }
  }
  if (total_frames == 0) throw Error("bone profile: training set has no frames");
  for (int b = 0; b < nb; ++b)
    if (count[b] == 0) {
      const Bone& bone = topo->bones()[b];
      throw Error("bone profile: every sample of bone " + topo->joint_names()[bone.parent] + "->" +
                  topo->joint_names()[bone.child] + " is degenerate");
    }
  return {sum.cwiseQuotient(count.cast<double>())};
}

ActionSequence normalize_bones(const ActionSequence& seq, const BoneLengthProfile& profile) {
  if (!seq.topology) throw Error("normalize_bones: sequence without topology");
  const SkeletonTopology& topo = *seq.topology;
  if (profile.lengths.size() != topo.bone_count())
    throw Error("normalize_bones: profile has " + std::to_string(profile.lengths.size()) +
                " bones, topology '" + topo.name() + "' has " + std::to_string(topo.bone_count()));

  ActionSequence out = seq;
  for (int f = 0; f < seq.frame_count(); ++f) {
    const Eigen::Matrix3Xd& src = seq.frames[f].positions;
    Eigen::Matrix3Xd& dst = out.frames[f].positions;
    for (int bi : topo.traversal()) {
      const Bone& b = topo.bones()[bi];
      Eigen::Vector3d dir = src.col(b.child) - src.col(b.parent);
      double len = dir.norm();
      if (!(len >= kDegenerateBoneLength))
        throw Error("normalize_bones: zero-length bone " + topo.joint_names()[b.parent] + "->" +
                    topo.joint_names()[b.child] + " in frame " + std::to_string(f));
      dst.col(b.child) = dst.col(b.parent) + dir * (profile.lengths[bi] / len);
    }
  }
  return out;
}

ActionSequence concatenate(std::span<const ActionSequence> parts) {
  if (parts.empty()) throw Error("concatenate: nothing to concatenate");
  ActionSequence out;
  out.topology = parts.front().topology;
  out.subject = parts.front().subject;
  std::int64_t t = 0;
  for (const ActionSequence& p : parts) {
    if (!p.topology || !(*p.topology == *out.topology))
      throw Error("concatenate: topology mismatch");
    for (int f = 0; f < p.frame_count(); ++f) {
      out.frames.push_back({p.frames[f].positions, t++});
      out.frame_labels.push_back(p.frame_labels.empty() ? p.label.value_or(kBackground)
                                                        : p.frame_labels[f]);
    }
    if (p.subject != out.subject) out.subject.reset();
  }
  return out;
}

TopologyPtr kinect20_topology() {
  static const TopologyPtr topo = std::make_shared<const SkeletonTopology>(
      "kinect20",
      std::vector<std::string>{"HipCenter",     "Spine",      "ShoulderCenter", "Head",
                               "ShoulderLeft",  "ElbowLeft",  "WristLeft",      "HandLeft",
                               "ShoulderRight", "ElbowRight", "WristRight",     "HandRight",
                               "HipLeft",       "KneeLeft",   "AnkleLeft",      "FootLeft",
                               "HipRight",      "KneeRight",  "AnkleRight",     "FootRight"},
      std::vector<std::pair<std::string, std::string>>{
          {"HipCenter", "Spine"},          {"Spine", "ShoulderCenter"},
          {"ShoulderCenter", "Head"},      {"ShoulderCenter", "ShoulderLeft"},
          {"ShoulderLeft", "ElbowLeft"},   {"ElbowLeft", "WristLeft"},
          {"WristLeft", "HandLeft"},       {"ShoulderCenter", "ShoulderRight"},
          {"ShoulderRight", "ElbowRight"}, {"ElbowRight", "WristRight"},
          {"WristRight", "HandRight"},     {"HipCenter", "HipLeft"},
          {"HipLeft", "KneeLeft"},         {"KneeLeft", "AnkleLeft"},
          {"AnkleLeft", "FootLeft"},       {"HipCenter", "HipRight"},
          {"HipRight", "KneeRight"},       {"KneeRight", "AnkleRight"},
          {"AnkleRight", "FootRight"}},
      std::string("HipCenter"));
  return topo;
}

TopologyPtr parse_topology(std::string_view json_text) {
  using detail::need_as;
  const auto j = detail::parse_json(json_text, "topology");
  auto name = need_as<std::string>(j, "name", "topology");
  auto joints = need_as<std::vector<std::string>>(j, "joints", "topology");
  std::vector<std::pair<std::string, std::string>> bones;
  for (const auto& b : detail::need(j, "bones", "topology")) {
    if (!b.is_array() || b.size() != 2 || !b[0].is_string() || !b[1].is_string())
      throw Error("topology: each bone must be a [parent, child] pair of joint names");
    bones.emplace_back(b[0].get<std::string>(), b[1].get<std::string>());
  }
  std::optional<std::string> root;
  if (j.contains("root")) root = need_as<std::string>(j, "root", "topology");
  return std::make_shared<const SkeletonTopology>(std::move(name), std::move(joints), bones,
                                                  std::move(root));
}

TopologyPtr load_topology(const std::filesystem::path& path) {
  return parse_topology(detail::read_file(path));
}

std::string topology_to_json(const SkeletonTopology& topology) {
  detail::Json j;
  j["name"] = topology.name();
  j["joints"] = topology.joint_names();
  j["root"] = topology.joint_names()[topology.root()];
  auto bones = detail::Json::array();
  for (const Bone& b : topology.bones())
    bones.push_back({topology.joint_names()[b.parent], topology.joint_names()[b.child]});
  j["bones"] = bones;
  return j.dump(2) + "\n";
}

}  // namespace skelact
