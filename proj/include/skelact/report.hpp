#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skelact/detection.hpp"
#include "skelact/types.hpp"

namespace skelact {

struct RunMetadata {
  std::string mode;           // "recognition" or "detection"
  std::string config_hash;    // FNV-1a 64 of the canonical config JSON
  std::uint64_t seed = 0;
  std::string manifest_hash;  // FNV-1a 64 of the manifest file bytes
  std::string bundle_hash;
};

struct RecognitionReport {
  std::vector<Label> classes;                  // ascending
  /// confusion[i][j]: truth classes[i] predicted classes[j]; the extra last
  /// column counts sequences no model could explain.
  std::vector<std::vector<long>> confusion;
  std::vector<long> class_counts;
  std::vector<std::optional<double>> class_accuracy;  // nullopt: no instances
  long correct = 0;
  long total = 0;
  double overall_accuracy = 0;
};

/// Builds the accuracy table; classes are the union of `model_labels` and
/// the truth labels.
RecognitionReport score_recognition(std::span<const Label> model_labels, std::span<const Label> truth,
                                    std::span<const std::optional<Label>> predicted);

struct DetectionReport {
  DetectionScores frames;
  Prf segments;
  long streams = 0;
  long frame_count = 0;
};

struct EvaluationReport {
  RunMetadata metadata;
  std::optional<RecognitionReport> recognition;
  std::optional<DetectionReport> detection;
};

std::string report_to_json(const EvaluationReport& report);
/// Aligned plain-text rendering of the same numbers.
std::string report_to_table(const EvaluationReport& report);

std::string hash_hex(std::string_view bytes);

}  // namespace skelact
