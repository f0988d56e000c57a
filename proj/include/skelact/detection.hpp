#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelact/hmm.hpp"
#include "skelact/types.hpp"

namespace skelact {

using Hmm = DiscreteHmm<double>;

/// Per-action HMMs wired in parallel into one larger HMM. Every step leaves
/// the current unit with probability `exit_prob` and re-enters a unit chosen
/// uniformly (possibly the same one) through that unit's initial
/// distribution.
struct CompositeHmm {
  std::vector<Hmm> units;
  std::vector<int> state_offsets;  // first composite state of each unit
  std::vector<int> state_unit;     // unit owning each composite state
  double exit_prob = 0.0;
  Hmm model;                       // the assembled tables

  int states() const { return model.states(); }
  Label unit_label(int unit) const { return units.at(static_cast<std::size_t>(unit)).label; }
};

CompositeHmm compose_parallel(std::span<const Hmm> units, double exit_prob);

struct Segment {
  int start = 0;  // first frame
  int end = 0;    // last frame, inclusive
  Label label = kBackground;
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Maximal runs of equal labels, covering every frame.
std::vector<Segment> segments_of(std::span<const Label> frame_labels);

struct DetectionResult {
  std::vector<Label> frame_labels;
  std::vector<Segment> segments;
};

enum class DetectionMode {
  /// One Viterbi decode of the whole stream, then majority smoothing.
  GlobalSmoothed,
  /// Decode each centred window on its own and keep the centre label.
  PerWindow,
};

std::string_view to_string(DetectionMode m);
DetectionMode parse_detection_mode(std::string_view name);

/// Frame indices [first, last] of the width-`width` window centred on `t`,
/// truncated at the stream ends. Even widths extend one frame further back.
std::pair<int, int> centred_window(int t, int width, int frames);

/// Majority label over each centred window; ties go to the centre frame's
/// label when it is among the winners, else to the lowest label.
std::vector<Label> majority_smooth(std::span<const Label> labels, int width);

DetectionResult detect_sliding(const CompositeHmm& c, std::span<const Symbol> obs, int window_width,
                               DetectionMode mode = DetectionMode::GlobalSmoothed);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  long true_positives = 0;
  long false_positives = 0;
  long false_negatives = 0;
};

struct DetectionScores {
  Prf micro;
  std::map<Label, Prf> per_class;
};

/// Frame-level scores. Background frames have no class of their own but a
/// non-background prediction on them is a false positive, and a background
/// prediction on an action frame is a false negative.
DetectionScores score_detection(std::span<const Label> predicted, std::span<const Label> truth);

/// Segment-level scores: a predicted segment matches an unmatched truth
/// segment of the same label when their frame IoU reaches `iou_threshold`.
Prf score_segments(std::span<const Label> predicted, std::span<const Label> truth,
                   double iou_threshold = 0.5);

/// Tab-separated export: "frame_index<TAB>label" per frame, then a
/// "# segments" block of "start<TAB>end<TAB>label" (end inclusive).
std::string format_detection(const DetectionResult& result);

}  // namespace skelact
