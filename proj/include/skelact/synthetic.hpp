#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "skelact/skeleton.hpp"

namespace skelact {

/// Seeded motion generators over the kinect20 skeleton. Each motion is a
/// set of joint rotations driven by the sequence phase; subjects differ in
/// bone scale, instances in length, amplitude, placement and sensor noise.
enum class SyntheticMotion { WaveRight, KickLeft, Clap, Squat, Walk };

inline constexpr int kSyntheticMotionCount = 5;

std::string_view to_string(SyntheticMotion m);

struct SyntheticOptions {
  int min_frames = 30;
  int max_frames = 50;
  double noise = 0.005;             // per-coordinate Gaussian sigma, metres
  double amplitude_jitter = 0.15;   // relative
  double offset = 0.0;              // uniform placement range, metres
  double bone_scale_jitter = 0.1;   // per-subject relative

  void validate() const;
};

/// One labelled instance; label is the motion's enum value.
ActionSequence synthesize_instance(SyntheticMotion motion, int subject, int instance,
                                   std::uint64_t seed, const SyntheticOptions& opts = {});

/// Instances for the first `motions` generators: every listed subject
/// performs each motion `instances_per_subject` times.
std::vector<ActionSequence> synthesize_set(int motions, std::span<const int> subjects,
                                           int instances_per_subject, std::uint64_t seed,
                                           const SyntheticOptions& opts = {});

/// Back-to-back instances by one subject with per-frame ground truth.
ActionSequence synthesize_stream(std::span<const SyntheticMotion> motions, int subject, int stream_id,
                                 std::uint64_t seed, const SyntheticOptions& opts = {});

}  // namespace skelact
