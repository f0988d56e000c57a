#include "skelact/synthetic.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include <Eigen/Geometry>

#include "skelact/error.hpp"

namespace skelact {

namespace {

enum Joint : int {
  HipCenter, Spine, ShoulderCenter, Head,
  ShoulderLeft, ElbowLeft, WristLeft, HandLeft,
  ShoulderRight, ElbowRight, WristRight, HandRight,
  HipLeft, KneeLeft, AnkleLeft, FootLeft,
  HipRight, KneeRight, AnkleRight, FootRight,
  kJoints
};

constexpr double kDepth = 2.5;

const std::array<Eigen::Vector3d, kJoints>& rest_pose() {
  static const std::array<Eigen::Vector3d, kJoints> pose = {
      Eigen::Vector3d(0.00, 0.00, kDepth),   Eigen::Vector3d(0.00, 0.10, kDepth),
      Eigen::Vector3d(0.00, 0.45, kDepth),   Eigen::Vector3d(0.00, 0.65, kDepth),
      Eigen::Vector3d(-0.18, 0.40, kDepth),  Eigen::Vector3d(-0.22, 0.12, kDepth),
      Eigen::Vector3d(-0.24, -0.12, kDepth), Eigen::Vector3d(-0.25, -0.20, kDepth),
      Eigen::Vector3d(0.18, 0.40, kDepth),   Eigen::Vector3d(0.22, 0.12, kDepth),
      Eigen::Vector3d(0.24, -0.12, kDepth),  Eigen::Vector3d(0.25, -0.20, kDepth),
      Eigen::Vector3d(-0.10, -0.05, kDepth), Eigen::Vector3d(-0.11, -0.48, kDepth),
      Eigen::Vector3d(-0.12, -0.88, kDepth), Eigen::Vector3d(-0.12, -0.93, kDepth - 0.08),
      Eigen::Vector3d(0.10, -0.05, kDepth),  Eigen::Vector3d(0.11, -0.48, kDepth),
      Eigen::Vector3d(0.12, -0.88, kDepth),  Eigen::Vector3d(0.12, -0.93, kDepth - 0.08),
  };
  return pose;
}

using Rot = Eigen::Matrix3d;

Rot rx(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix(); }
Rot ry(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix(); }
Rot rz(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

struct Pose {
  std::array<Rot, kJoints> local;
  Eigen::Vector3d root_shift = Eigen::Vector3d::Zero();
  Pose() { local.fill(Rot::Identity()); }
};

/// Joint rotations at phase `p` in [0, 1]; `a` scales every amplitude.
Pose motion_pose(SyntheticMotion m, double p, double a) {
  constexpr double pi = std::numbers::pi;
  const double env = std::sin(pi * p);
  Pose pose;
  auto& r = pose.local;
  switch (m) {
    case SyntheticMotion::WaveRight:
      r[ShoulderRight] = rz(2.0 * a * env);
      r[ElbowRight] = rz(0.7 * a * env * std::sin(2 * pi * 3 * p));
      break;
    case SyntheticMotion::KickLeft:
      r[HipLeft] = rx(1.2 * a * env);
      r[KneeLeft] = rx(-0.6 * a * env * env);
      r[ShoulderLeft] = rz(-0.3 * a * env);
      r[ShoulderRight] = rz(0.3 * a * env);
      break;
    case SyntheticMotion::Clap: {
      const double close = 0.5 * (1 - std::cos(2 * pi * 3 * p));
      r[ShoulderLeft] = rx(1.3 * a * env) * ry(-0.6 * a * env * close);
      r[ShoulderRight] = rx(1.3 * a * env) * ry(0.6 * a * env * close);
      r[ElbowLeft] = rx(0.4 * a * env);
      r[ElbowRight] = rx(0.4 * a * env);
      break;
    }
    case SyntheticMotion::Squat:
      pose.root_shift = Eigen::Vector3d(0, -0.3 * a * env, 0);
      r[Spine] = rx(0.4 * a * env);
      r[HipLeft] = rx(1.2 * a * env);
      r[HipRight] = rx(1.2 * a * env);
      r[KneeLeft] = rx(-2.0 * a * env);
      r[KneeRight] = rx(-2.0 * a * env);
      r[ShoulderLeft] = rx(1.0 * a * env);
      r[ShoulderRight] = rx(1.0 * a * env);
      break;
    case SyntheticMotion::Walk: {
      const double s = std::sin(2 * pi * 2 * p);
      pose.root_shift = Eigen::Vector3d(0.4 * a * (p - 0.5), 0.02 * std::abs(s), 0);
      r[HipLeft] = rx(0.5 * a * s);
      r[HipRight] = rx(-0.5 * a * s);
      r[KneeLeft] = rx(-0.5 * a * std::max(0.0, -s));
      r[KneeRight] = rx(-0.5 * a * std::max(0.0, s));
      r[ShoulderLeft] = rx(-0.4 * a * s);
      r[ShoulderRight] = rx(0.4 * a * s);
      break;
    }
  }
  return pose;
}

/// Forward kinematics: each bone keeps its (scaled) rest vector, rotated by
/// the accumulated rotations of every joint above it.
Eigen::Matrix3Xd pose_positions(const SkeletonTopology& topo, const Pose& pose,
                                const std::vector<Eigen::Vector3d>& bone_vectors,
                                const Eigen::Vector3d& root) {
  Eigen::Matrix3Xd pos(3, topo.joint_count());
  std::vector<Rot> acc(static_cast<std::size_t>(topo.joint_count()), Rot::Identity());
  const int r = topo.root();
  pos.col(r) = root + pose.root_shift;
  acc[static_cast<std::size_t>(r)] = pose.local[static_cast<std::size_t>(r)];
  for (int b : topo.traversal()) {
    const Bone& bone = topo.bones()[static_cast<std::size_t>(b)];
    const Rot& up = acc[static_cast<std::size_t>(bone.parent)];
    pos.col(bone.child) = pos.col(bone.parent) + up * bone_vectors[static_cast<std::size_t>(b)];
    acc[static_cast<std::size_t>(bone.child)] = up * pose.local[static_cast<std::size_t>(bone.child)];
  }
  return pos;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::initializer_list<std::uint32_t> tags) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  words.insert(words.end(), tags.begin(), tags.end());
  std::seed_seq sseq(words.begin(), words.end());
  return std::mt19937_64(sseq);
}

std::vector<Eigen::Vector3d> subject_bones(const SkeletonTopology& topo, int subject, std::uint64_t seed,
                                           const SyntheticOptions& opts) {
  auto rng = make_rng(seed, {0x5b0e5u, static_cast<std::uint32_t>(subject)});
  std::uniform_real_distribution<double> overall(1 - opts.bone_scale_jitter, 1 + opts.bone_scale_jitter);
  std::uniform_real_distribution<double> per_bone(-0.03, 0.03);
  const double s = overall(rng);
  const auto& rest = rest_pose();
  std::vector<Eigen::Vector3d> out;
  for (const Bone& b : topo.bones())
    out.push_back(s * (1 + per_bone(rng)) * (rest[static_cast<std::size_t>(b.child)] - rest[static_cast<std::size_t>(b.parent)]));
  return out;
}

ActionSequence generate(SyntheticMotion motion, int subject, int instance, std::uint64_t seed,
                        const SyntheticOptions& opts, const std::optional<Eigen::Vector3d>& placement) {
  const TopologyPtr topo = kinect20_topology();
  const auto bones = subject_bones(*topo, subject, seed, opts);
  auto rng = make_rng(seed, {0x1a57u, static_cast<std::uint32_t>(motion), static_cast<std::uint32_t>(subject),
                             static_cast<std::uint32_t>(instance)});
  std::uniform_int_distribution<int> length(opts.min_frames, opts.max_frames);
  std::uniform_real_distribution<double> amp(1 - opts.amplitude_jitter, 1 + opts.amplitude_jitter);
  std::uniform_real_distribution<double> shift(-opts.offset, opts.offset);
  std::uniform_real_distribution<double> warp(0.85, 1.15);
  std::normal_distribution<double> noise(0.0, 1.0);

  const int frames = length(rng);
  const double a = amp(rng);
  const double gamma = warp(rng);
  Eigen::Vector3d root = rest_pose()[HipCenter];
  const Eigen::Vector3d jitter(shift(rng), shift(rng), shift(rng));
  root += placement ? *placement : jitter;

  ActionSequence seq;
  seq.topology = topo;
  seq.label = static_cast<Label>(motion);
  seq.subject = subject;
  seq.instance = instance;
  for (int f = 0; f < frames; ++f) {
    const double p = frames > 1 ? std::pow(static_cast<double>(f) / (frames - 1), gamma) : 0.0;
    Frame fr;
    fr.positions = pose_positions(*topo, motion_pose(motion, p, a), bones, root);
    if (opts.noise > 0)
      for (Eigen::Index i = 0; i < fr.positions.size(); ++i) fr.positions.data()[i] += opts.noise * noise(rng);
    fr.timestamp_index = f;
    seq.frames.push_back(std::move(fr));
  }
  return seq;
}

}  // namespace

std::string_view to_string(SyntheticMotion m) {
  switch (m) {
    case SyntheticMotion::WaveRight: return "wave_right";
    case SyntheticMotion::KickLeft: return "kick_left";
    case SyntheticMotion::Clap: return "clap";
    case SyntheticMotion::Squat: return "squat";
    case SyntheticMotion::Walk: return "walk";
  }
  return "?";
}

void SyntheticOptions::validate() const {
  if (min_frames < 1 || max_frames < min_frames) throw Error("synthetic: need 1 <= min_frames <= max_frames");
  if (noise < 0 || amplitude_jitter < 0 || amplitude_jitter >= 1 || offset < 0 || bone_scale_jitter < 0 ||
      bone_scale_jitter >= 1)
    throw Error("synthetic: jitter settings out of range");
}

ActionSequence synthesize_instance(SyntheticMotion motion, int subject, int instance, std::uint64_t seed,
                                   const SyntheticOptions& opts) {
  opts.validate();
  return generate(motion, subject, instance, seed, opts, std::nullopt);
}

std::vector<ActionSequence> synthesize_set(int motions, std::span<const int> subjects, int instances_per_subject,
                                           std::uint64_t seed, const SyntheticOptions& opts) {
  if (motions < 1 || motions > kSyntheticMotionCount)
    throw Error("synthetic: motions must be in [1, " + std::to_string(kSyntheticMotionCount) + "]");
  if (instances_per_subject < 1) throw Error("synthetic: instances_per_subject must be >= 1");
  opts.validate();
  std::vector<ActionSequence> out;
  for (int m = 0; m < motions; ++m)
    for (int s : subjects)
      for (int e = 1; e <= instances_per_subject; ++e)
        out.push_back(generate(static_cast<SyntheticMotion>(m), s, e, seed, opts, std::nullopt));
  return out;
}

ActionSequence synthesize_stream(std::span<const SyntheticMotion> motions, int subject, int stream_id,
                                 std::uint64_t seed, const SyntheticOptions& opts) {
  if (motions.empty()) throw Error("synthetic: empty stream");
  opts.validate();
  auto rng = make_rng(seed, {0x57e4u, static_cast<std::uint32_t>(subject), static_cast<std::uint32_t>(stream_id)});
  std::uniform_real_distribution<double> shift(-opts.offset, opts.offset);
  const Eigen::Vector3d placement(shift(rng), shift(rng), shift(rng));
  std::vector<ActionSequence> parts;
  for (std::size_t k = 0; k < motions.size(); ++k)
    parts.push_back(generate(motions[k], subject, 1000 * (stream_id + 1) + static_cast<int>(k), seed, opts,
                             placement));
  ActionSequence stream = concatenate(parts);
  stream.subject = subject;
  stream.instance = stream_id;
  return stream;
}

}  // namespace skelact
