#include "skelact/detection.hpp"

#include <algorithm>

namespace skelact {

CompositeHmm compose_parallel(std::span<const Hmm> units, double exit_prob) {
  if (units.empty()) throw Error("compose_parallel: no units");
  if (!(exit_prob >= 0.0 && exit_prob < 1.0)) throw Error("compose_parallel: exit_prob must be in [0, 1)");
  const int m = units.front().symbols();
  CompositeHmm c;
  c.exit_prob = exit_prob;
  int total = 0;
  for (std::size_t u = 0; u < units.size(); ++u) {
    units[u].validate();
    if (units[u].symbols() != m)
      throw Error("compose_parallel: unit " + std::to_string(u) + " has " +
                  std::to_string(units[u].symbols()) + " symbols, expected " + std::to_string(m));
    c.units.push_back(units[u]);
    c.state_offsets.push_back(total);
    for (int s = 0; s < units[u].states(); ++s) c.state_unit.push_back(static_cast<int>(u));
    total += units[u].states();
  }

  const double share = 1.0 / static_cast<double>(units.size());
  Eigen::VectorXd entry(total);
  for (std::size_t u = 0; u < units.size(); ++u)
    entry.segment(c.state_offsets[u], units[u].states()) = share * units[u].initial;

  Hmm& h = c.model;
  h.label = units.front().label;
  h.initial = entry;
  h.transition = (exit_prob * entry.transpose()).replicate(total, 1);
  h.emission.resize(total, m);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const int off = c.state_offsets[u], s = units[u].states();
    h.transition.block(off, off, s, s) += (1.0 - exit_prob) * units[u].transition;
    h.emission.middleRows(off, s) = units[u].emission;
  }
  return c;
}

std::vector<Segment> segments_of(std::span<const Label> frame_labels) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < frame_labels.size(); ++t) {
    if (out.empty() || out.back().label != frame_labels[t])
      out.push_back({static_cast<int>(t), static_cast<int>(t), frame_labels[t]});
    else
      out.back().end = static_cast<int>(t);
  }
  return out;
}

std::string_view to_string(DetectionMode m) {
  return m == DetectionMode::GlobalSmoothed ? "global" : "per_window";
}

DetectionMode parse_detection_mode(std::string_view name) {
  if (name == "global") return DetectionMode::GlobalSmoothed;
  if (name == "per_window") return DetectionMode::PerWindow;
  throw Error("unknown detection mode '" + std::string(name) + "'");
}

std::pair<int, int> centred_window(int t, int width, int frames) {
  const int before = width / 2;
  const int after = width - 1 - before;
  return {std::max(0, t - before), std::min(frames - 1, t + after)};
}

std::vector<Label> majority_smooth(std::span<const Label> labels, int width) {
  if (width < 1) throw Error("majority_smooth: window width must be >= 1");
  const int n = static_cast<int>(labels.size());
  std::vector<Label> out(labels.size());
  std::map<Label, int> counts;
  for (int t = 0; t < n; ++t) {
    const auto [lo, hi] = centred_window(t, width, n);
    counts.clear();
    for (int k = lo; k <= hi; ++k) ++counts[labels[static_cast<std::size_t>(k)]];
    const Label centre = labels[static_cast<std::size_t>(t)];
    int best = counts[centre];
    Label winner = centre;
    for (const auto& [label, count] : counts)  // ascending labels
      if (count > best) {
        best = count;
        winner = label;
      }
    out[static_cast<std::size_t>(t)] = winner;
  }
  return out;
}

namespace {

std::vector<Label> unit_labels(const CompositeHmm& c, const std::vector<int>& states) {
  std::vector<Label> out;
  out.reserve(states.size());
  for (int s : states) out.push_back(c.unit_label(c.state_unit[static_cast<std::size_t>(s)]));
  return out;
}

}  // namespace

DetectionResult detect_sliding(const CompositeHmm& c, std::span<const Symbol> obs, int window_width,
                               DetectionMode mode) {
  if (obs.empty()) throw Error("detect_sliding: empty observation stream");
  if (window_width < 1) throw Error("detect_sliding: window width must be >= 1");
  DetectionResult r;
  if (mode == DetectionMode::GlobalSmoothed) {
    const auto path = viterbi(c.model, obs);
    r.frame_labels = majority_smooth(unit_labels(c, path.states), window_width);
  } else {
    const int n = static_cast<int>(obs.size());
    r.frame_labels.resize(obs.size());
    for (int t = 0; t < n; ++t) {
      const auto [lo, hi] = centred_window(t, window_width, n);
      const auto path = viterbi(c.model, obs.subspan(static_cast<std::size_t>(lo),
                                                     static_cast<std::size_t>(hi - lo + 1)));
      const int s = path.states[static_cast<std::size_t>(t - lo)];
      r.frame_labels[static_cast<std::size_t>(t)] = c.unit_label(c.state_unit[static_cast<std::size_t>(s)]);
    }
  }
  r.segments = segments_of(r.frame_labels);
  return r;
}

namespace {

Prf finish(long tp, long fp, long fn) {
  Prf p;
  p.true_positives = tp;
  p.false_positives = fp;
  p.false_negatives = fn;
  p.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  p.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  p.f1 = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
  return p;
}

}  // namespace

DetectionScores score_detection(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size())
    throw Error("score_detection: " + std::to_string(predicted.size()) + " predicted vs " +
                std::to_string(truth.size()) + " truth frames");
  struct Counts {
    long tp = 0, fp = 0, fn = 0;
  };
  std::map<Label, Counts> per;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const Label p = predicted[t], g = truth[t];
    if (p == g) {
      if (g != kBackground) ++per[g].tp;
      continue;
    }
    if (p != kBackground) ++per[p].fp;
    if (g != kBackground) ++per[g].fn;
  }
  DetectionScores out;
  Counts total;
  for (const auto& [label, c] : per) {
    out.per_class[label] = finish(c.tp, c.fp, c.fn);
    total.tp += c.tp;
    total.fp += c.fp;
    total.fn += c.fn;
  }
  out.micro = finish(total.tp, total.fp, total.fn);
  return out;
}

Prf score_segments(std::span<const Label> predicted, std::span<const Label> truth,
                   double iou_threshold) {
  if (predicted.size() != truth.size()) throw Error("score_segments: length mismatch");
  auto keep_actions = [](std::vector<Segment> s) {
    std::erase_if(s, [](const Segment& x) { return x.label == kBackground; });
    return s;
  };
  const auto pred = keep_actions(segments_of(predicted));
  const auto gold = keep_actions(segments_of(truth));
  std::vector<bool> used(gold.size(), false);
  long tp = 0;
  for (const Segment& p : pred) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (used[g] || gold[g].label != p.label) continue;
      const int inter = std::min(p.end, gold[g].end) - std::max(p.start, gold[g].start) + 1;
      if (inter <= 0) continue;
      const int uni = std::max(p.end, gold[g].end) - std::min(p.start, gold[g].start) + 1;
      if (static_cast<double>(inter) / uni >= iou_threshold) {
        used[g] = true;
        ++tp;
        break;
      }
    }
  }
  return finish(tp, static_cast<long>(pred.size()) - tp, static_cast<long>(gold.size()) - tp);
}

std::string format_detection(const DetectionResult& result) {
  auto label = [](Label l) { return l == kBackground ? std::string("background") : std::to_string(l); };
  std::string out = "# frames\n";
  for (std::size_t t = 0; t < result.frame_labels.size(); ++t)
    out += std::to_string(t) + "\t" + label(result.frame_labels[t]) + "\n";
  out += "# segments\n";
  for (const Segment& s : result.segments)
    out += std::to_string(s.start) + "\t" + std::to_string(s.end) + "\t" + label(s.label) + "\n";
  return out;
}

}  // namespace skelact
