#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelact/dataset.hpp"
#include "skelact/descriptors.hpp"
#include "skelact/detection.hpp"
#include "skelact/hmm.hpp"
#include "skelact/quantization.hpp"
#include "skelact/reduction.hpp"
#include "skelact/skeleton.hpp"

namespace skelact {

struct HmmConfig {
  int states = 3;
  int restarts = 3;
  double smoothing = 1e-6;
  int max_iterations = 100;
  double tolerance = 1e-4;
  HmmTopology topology = HmmTopology::Ergodic;

  void validate() const;
  friend bool operator==(const HmmConfig&, const HmmConfig&) = default;
};

struct DetectionConfig {
  int window = 7;
  double exit_prob = 0.05;
  DetectionMode mode = DetectionMode::GlobalSmoothed;

  void validate() const;
  friend bool operator==(const DetectionConfig&, const DetectionConfig&) = default;
};

/// Where the bone-length profile is estimated.
enum class NormalizationSource { Train, All };

struct PipelineConfig {
  DescriptorKind descriptor;
  double variance_fraction = 0.95;
  ApConfig ap;
  HmmConfig hmm;
  DetectionConfig detection;
  std::uint64_t seed = 0;
  /// "kinect20" or a topology file path.
  std::string topology = "kinect20";
  /// "default" or an angle-table file path.
  std::string angle_table = "default";
  NormalizationSource normalization_source = NormalizationSource::Train;

  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

std::string_view to_string(HmmTopology t);
HmmTopology parse_hmm_topology(std::string_view name);
std::string_view to_string(NormalizationSource s);
NormalizationSource parse_normalization_source(std::string_view name);

/// Config files list every field; a missing key is an error naming it.
std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig parse_config(std::string_view json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Topology named by `cfg.topology`; relative paths resolve against `base_dir`.
TopologyPtr resolve_topology(const PipelineConfig& cfg, const std::filesystem::path& base_dir = {});
/// Angle table named by `cfg.angle_table`, or an empty table when the
/// descriptor family uses no angles.
AngleTable resolve_angle_table(const PipelineConfig& cfg, const SkeletonTopology& topology,
                               const std::filesystem::path& base_dir = {});

bool uses_angles(DescriptorFamily family);

/// Every fitted stage, in application order.
struct ModelBundle {
  static constexpr int kFormatVersion = 1;

  PipelineConfig config;
  TopologyPtr topology;
  AngleTable angles;
  BoneLengthProfile bones;
  Normalizer<double> normalizer;
  PcaModel<double> pca;
  Codebook<double> codebook;
  std::vector<Hmm> hmms;  // ascending label

  /// Checks the dimension chain between stages.
  void validate() const;
  std::vector<Label> labels() const;
};

struct LabelTrainingLog {
  Label label = 0;
  int sequences = 0;
  int best_restart = 0;
  std::vector<HmmTrainingLog<double>> restarts;
};

struct TrainingLog {
  int descriptor_dimension = 0;
  int pca_dimension = 0;
  int training_frames = 0;
  int clustered_rows = 0;
  int codebook_size = 0;
  int ap_iterations = 0;
  bool ap_converged = false;
  int skipped_bone_samples = 0;
  std::vector<LabelTrainingLog> hmms;
};

struct TrainingResult {
  ModelBundle bundle;
  TrainingLog log;
};

enum class Purpose { Recognition, Detection };

/// Fits bone profile, descriptor normalizer, PCA, codebook and one HMM per
/// label on `train_seqs` only. Stage failures surface as StageError.
/// `bone_profile` overrides the profile estimated from the training data.
TrainingResult train(std::span<const ActionSequence> train_seqs, const PipelineConfig& cfg,
                     const AngleTable& angles, Purpose purpose = Purpose::Recognition,
                     const BoneLengthProfile* bone_profile = nullptr);

/// Bone normalization, extraction, z-scoring, projection and symbol
/// assignment for one sequence.
SymbolSequence symbolize(const ModelBundle& bundle, const ActionSequence& seq);

struct Recognition {
  std::optional<Label> label;
  std::vector<Label> labels;            // parallel to log_likelihoods
  std::vector<double> log_likelihoods;
};

Recognition recognize(const ModelBundle& bundle, const ActionSequence& seq);
DetectionResult detect(const ModelBundle& bundle, const ActionSequence& stream);

/// "skelact-bundle 1" line followed by a JSON body.
std::string serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(std::string_view text);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

std::string training_log_to_json(const TrainingLog& log);

}  // namespace skelact
