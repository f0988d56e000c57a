#include "skelact/pipeline.hpp"

#include <map>
#include <random>
#include <set>

#include "io_util.hpp"

namespace skelact {

using detail::Json;
using detail::need;
using detail::need_as;

void HmmConfig::validate() const {
  if (states < 1) throw Error("hmm: states must be >= 1");
  if (restarts < 1) throw Error("hmm: restarts must be >= 1");
  if (!(smoothing >= 0.0)) throw Error("hmm: smoothing must be >= 0");
  if (max_iterations < 0) throw Error("hmm: max_iterations must be >= 0");
  if (!(tolerance >= 0.0)) throw Error("hmm: tolerance must be >= 0");
}

void DetectionConfig::validate() const {
  if (window < 1) throw Error("detection: window must be >= 1");
  if (!(exit_prob >= 0.0 && exit_prob < 1.0)) throw Error("detection: exit_prob must be in [0, 1)");
}

void PipelineConfig::validate() const {
  descriptor.validate();
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw Error("config: variance_fraction must be in (0, 1]");
  ap.validate();
  hmm.validate();
  detection.validate();
  if (topology.empty()) throw Error("config: topology must not be empty");
  if (angle_table.empty()) throw Error("config: angle_table must not be empty");
}

std::string_view to_string(HmmTopology t) {
  return t == HmmTopology::Ergodic ? "ergodic" : "left_to_right";
}

HmmTopology parse_hmm_topology(std::string_view name) {
  if (name == "ergodic") return HmmTopology::Ergodic;
  if (name == "left_to_right") return HmmTopology::LeftToRight;
  throw Error("unknown hmm topology '" + std::string(name) + "'");
}

std::string_view to_string(NormalizationSource s) {
  return s == NormalizationSource::Train ? "train" : "all";
}

NormalizationSource parse_normalization_source(std::string_view name) {
  if (name == "train") return NormalizationSource::Train;
  if (name == "all") return NormalizationSource::All;
  throw Error("unknown normalization_source '" + std::string(name) + "'");
}

namespace {

Json config_json(const PipelineConfig& c) {
  Json j;
  j["descriptor"] = {{"family", to_string(c.descriptor.family)},
                     {"dct_keep", c.descriptor.dct_keep},
                     {"amdf_n", c.descriptor.amdf_n},
                     {"centroid", to_string(c.descriptor.centroid)}};
  j["variance_fraction"] = c.variance_fraction;
  j["ap"] = {{"damping", c.ap.damping},
             {"max_iterations", c.ap.max_iterations},
             {"convergence_window", c.ap.convergence_window},
             {"preference", c.ap.preference ? Json(*c.ap.preference) : Json(nullptr)},
             {"max_rows", c.ap.max_rows}};
  j["hmm"] = {{"states", c.hmm.states},
              {"restarts", c.hmm.restarts},
              {"smoothing", c.hmm.smoothing},
              {"max_iterations", c.hmm.max_iterations},
              {"tolerance", c.hmm.tolerance},
              {"topology", to_string(c.hmm.topology)}};
  j["detection"] = {{"window", c.detection.window},
                    {"exit_prob", c.detection.exit_prob},
                    {"mode", to_string(c.detection.mode)}};
  j["seed"] = c.seed;
  j["topology"] = c.topology;
  j["angle_table"] = c.angle_table;
  j["normalization_source"] = to_string(c.normalization_source);
  return j;
}

PipelineConfig config_from_json(const Json& j) {
  constexpr std::string_view w = "config";
  PipelineConfig c;
  const Json& d = need(j, "descriptor", w);
  c.descriptor.family = parse_descriptor_family(need_as<std::string>(d, "family", "config.descriptor"));
  c.descriptor.dct_keep = need_as<int>(d, "dct_keep", "config.descriptor");
  c.descriptor.amdf_n = need_as<int>(d, "amdf_n", "config.descriptor");
  c.descriptor.centroid = parse_centroid_mode(need_as<std::string>(d, "centroid", "config.descriptor"));
  c.variance_fraction = need_as<double>(j, "variance_fraction", w);
  const Json& ap = need(j, "ap", w);
  c.ap.damping = need_as<double>(ap, "damping", "config.ap");
  c.ap.max_iterations = need_as<int>(ap, "max_iterations", "config.ap");
  c.ap.convergence_window = need_as<int>(ap, "convergence_window", "config.ap");
  const Json& pref = need(ap, "preference", "config.ap");
  if (!pref.is_null()) c.ap.preference = need_as<double>(ap, "preference", "config.ap");
  c.ap.max_rows = need_as<int>(ap, "max_rows", "config.ap");
  const Json& h = need(j, "hmm", w);
  c.hmm.states = need_as<int>(h, "states", "config.hmm");
  c.hmm.restarts = need_as<int>(h, "restarts", "config.hmm");
  c.hmm.smoothing = need_as<double>(h, "smoothing", "config.hmm");
  c.hmm.max_iterations = need_as<int>(h, "max_iterations", "config.hmm");
  c.hmm.tolerance = need_as<double>(h, "tolerance", "config.hmm");
  c.hmm.topology = parse_hmm_topology(need_as<std::string>(h, "topology", "config.hmm"));
  const Json& det = need(j, "detection", w);
  c.detection.window = need_as<int>(det, "window", "config.detection");
  c.detection.exit_prob = need_as<double>(det, "exit_prob", "config.detection");
  c.detection.mode = parse_detection_mode(need_as<std::string>(det, "mode", "config.detection"));
  c.seed = need_as<std::uint64_t>(j, "seed", w);
  c.topology = need_as<std::string>(j, "topology", w);
  c.angle_table = need_as<std::string>(j, "angle_table", w);
  c.normalization_source =
      parse_normalization_source(need_as<std::string>(j, "normalization_source", w));
  c.validate();
  return c;
}

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json rows_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

Eigen::VectorXd vec_from(const Json& a, std::string_view where) {
  if (!a.is_array()) throw Error(std::string(where) + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw Error(std::string(where) + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd rows_from(const Json& a, std::string_view where) {
  if (!a.is_array()) throw Error(std::string(where) + ": expected an array of rows");
  if (a.empty()) return {};
  const auto first = vec_from(a[0], where);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()), first.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    const auto row = vec_from(a[r], where);
    if (row.size() != m.cols()) throw Error(std::string(where) + ": ragged rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

template <typename F>
auto stage(std::string_view name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string(name), e.what());
  }
}

void require_compatible(const ModelBundle& b, const ActionSequence& seq) {
  if (!seq.topology || !(*seq.topology == *b.topology))
    throw Error("sequence topology '" + (seq.topology ? seq.topology->name() : std::string("<none>")) +
                "' does not match the bundle's '" + b.topology->name() + "'");
  if (seq.frames.empty()) throw Error("sequence has no frames");
}

}  // namespace

std::string config_to_json(const PipelineConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

PipelineConfig parse_config(std::string_view json_text) {
  return config_from_json(detail::parse_json(json_text, "config"));
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path));
}

bool uses_angles(DescriptorFamily family) {
  return family == DescriptorFamily::Angular || family == DescriptorFamily::Mixed;
}

TopologyPtr resolve_topology(const PipelineConfig& cfg, const std::filesystem::path& base_dir) {
  if (cfg.topology == "kinect20") return kinect20_topology();
  std::filesystem::path p(cfg.topology);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return load_topology(p);
}

AngleTable resolve_angle_table(const PipelineConfig& cfg, const SkeletonTopology& topology,
                               const std::filesystem::path& base_dir) {
  if (!uses_angles(cfg.descriptor.family)) return {};
  if (cfg.angle_table == "default") return default_angle_table(topology);
  std::filesystem::path p(cfg.angle_table);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return load_angle_table(p, topology);
}

void ModelBundle::validate() const {
  if (!topology) throw Error("bundle: no topology");
  config.validate();
  if (bones.lengths.size() != topology->bone_count()) throw Error("bundle: bone profile size mismatch");
  if (uses_angles(config.descriptor.family)) angles.validate(*topology);
  const int dim = descriptor_dimension(config.descriptor, topology->joint_count(),
                                       static_cast<int>(angles.triples.size()));
  if (normalizer.dimension() != dim)
    throw Error("bundle: normalizer dimension " + std::to_string(normalizer.dimension()) +
                " != descriptor dimension " + std::to_string(dim));
  if (pca.input_dimension() != dim) throw Error("bundle: pca input dimension mismatch");
  if (pca.retained < 1 || pca.components.cols() < pca.retained || pca.components.rows() != dim)
    throw Error("bundle: pca components malformed");
  if (codebook.size() < 1) throw Error("bundle: empty codebook");
  if (codebook.dimension() != pca.output_dimension())
    throw Error("bundle: codebook dimension " + std::to_string(codebook.dimension()) +
                " != pca output dimension " + std::to_string(pca.output_dimension()));
  if (hmms.empty()) throw Error("bundle: no HMMs");
  std::set<Label> seen;
  for (const Hmm& h : hmms) {
    h.validate();
    if (h.symbols() != codebook.size())
      throw Error("bundle: HMM for label " + std::to_string(h.label) + " has " +
                  std::to_string(h.symbols()) + " symbols, codebook has " +
                  std::to_string(codebook.size()));
    if (!seen.insert(h.label).second) throw Error("bundle: duplicate label " + std::to_string(h.label));
  }
}

std::vector<Label> ModelBundle::labels() const {
  std::vector<Label> out;
  for (const Hmm& h : hmms) out.push_back(h.label);
  return out;
}

TrainingResult train(std::span<const ActionSequence> train_seqs, const PipelineConfig& cfg,
                     const AngleTable& angles, Purpose purpose, const BoneLengthProfile* bone_profile) {
  cfg.validate();
  if (train_seqs.empty()) throw StageError("input", "no training sequences");
  const TopologyPtr topo = train_seqs.front().topology;
  std::map<Label, std::vector<std::size_t>> by_label;
  stage("input", [&] {
    for (std::size_t i = 0; i < train_seqs.size(); ++i) {
      const ActionSequence& s = train_seqs[i];
      s.validate();
      if (!s.topology || !(*s.topology == *topo))
        throw Error("sequence " + std::to_string(i) + " has a different topology");
      if (s.frames.empty()) throw Error("sequence " + std::to_string(i) + " has no frames");
      if (!s.label) throw Error("sequence " + std::to_string(i) + " has no label");
      by_label[*s.label].push_back(i);
    }
    if (purpose == Purpose::Recognition && by_label.size() < 2)
      throw Error("recognition needs at least 2 labels, got " + std::to_string(by_label.size()));
    if (uses_angles(cfg.descriptor.family)) angles.validate(*topo);
  });

  TrainingResult res;
  ModelBundle& b = res.bundle;
  TrainingLog& log = res.log;
  b.config = cfg;
  b.topology = topo;
  b.angles = uses_angles(cfg.descriptor.family) ? angles : AngleTable{};

  b.bones = stage("bone normalization", [&] {
    if (bone_profile) {
      if (bone_profile->lengths.size() != topo->bone_count())
        throw Error("bone profile has " + std::to_string(bone_profile->lengths.size()) +
                    " lengths, topology has " + std::to_string(topo->bone_count()) + " bones");
      return *bone_profile;
    }
    std::vector<SkippedBone> skipped;
    auto p = compute_average_bone_lengths(train_seqs, &skipped);
    log.skipped_bone_samples = static_cast<int>(skipped.size());
    return p;
  });

  std::vector<Eigen::MatrixXd> descriptors = stage("descriptor extraction", [&] {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(train_seqs.size());
    for (const ActionSequence& s : train_seqs)
      out.push_back(extract(normalize_bones(s, b.bones), cfg.descriptor, b.angles).vectors);
    return out;
  });
  Eigen::Index total = 0;
  for (const auto& d : descriptors) total += d.rows();
  Eigen::MatrixXd stacked(total, descriptors.front().cols());
  {
    Eigen::Index r = 0;
    for (const auto& d : descriptors) {
      stacked.middleRows(r, d.rows()) = d;
      r += d.rows();
    }
  }
  log.descriptor_dimension = static_cast<int>(stacked.cols());
  log.training_frames = static_cast<int>(stacked.rows());

  b.normalizer = stage("descriptor normalization", [&] { return fit_normalizer(stacked); });
  stacked = apply_normalizer_rows(b.normalizer, stacked);
  b.pca = stage("pca", [&] { return fit_pca(stacked, cfg.variance_fraction); });
  // Keep only the retained axes so the bundle stays small.
  b.pca.components = b.pca.components.leftCols(b.pca.retained).eval();
  const Eigen::MatrixXd projected = project_rows(b.pca, stacked);
  log.pca_dimension = static_cast<int>(projected.cols());

  const auto fit = stage("vector quantization", [&] { return fit_codebook(projected, cfg.ap, cfg.seed); });
  b.codebook = fit.codebook;
  log.clustered_rows = static_cast<int>(fit.clustered_rows.size());
  log.codebook_size = b.codebook.size();
  log.ap_iterations = fit.clustering.iterations;
  log.ap_converged = fit.clustering.converged;

  std::vector<SymbolSequence> symbols(train_seqs.size());
  {
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < train_seqs.size(); ++i) {
      for (Eigen::Index t = 0; t < descriptors[i].rows(); ++t)
        symbols[i].push_back(assign_symbol(b.codebook, projected.row(r + t)));
      r += descriptors[i].rows();
    }
  }

  BaumWelchOptions<double> opts;
  opts.max_iterations = cfg.hmm.max_iterations;
  opts.tolerance = cfg.hmm.tolerance;
  opts.smoothing = cfg.hmm.smoothing;
  stage("hmm training", [&] {
    for (const auto& [label, members] : by_label) {
      std::vector<SymbolSequence> data;
      for (std::size_t i : members) data.push_back(symbols[i]);
      std::seed_seq sseq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                         static_cast<std::uint32_t>(label)};
      std::mt19937_64 rng(sseq);
      auto trained = train_hmm<double>(data, cfg.hmm.states, b.codebook.size(), cfg.hmm.restarts,
                                       cfg.hmm.topology, opts, rng);
      trained.model.label = label;
      b.hmms.push_back(std::move(trained.model));
      log.hmms.push_back({label, static_cast<int>(data.size()), trained.best_restart, std::move(trained.logs)});
    }
  });
  stage("bundle", [&] { b.validate(); });
  return res;
}

SymbolSequence symbolize(const ModelBundle& bundle, const ActionSequence& seq) {
  require_compatible(bundle, seq);
  const auto desc = extract(normalize_bones(seq, bundle.bones), bundle.config.descriptor, bundle.angles);
  const Eigen::MatrixXd z = apply_normalizer_rows(bundle.normalizer, desc.vectors);
  const Eigen::MatrixXd p = project_rows(bundle.pca, z);
  SymbolSequence out;
  out.reserve(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index t = 0; t < p.rows(); ++t) out.push_back(assign_symbol(bundle.codebook, p.row(t)));
  return out;
}

Recognition recognize(const ModelBundle& bundle, const ActionSequence& seq) {
  const SymbolSequence obs = symbolize(bundle, seq);
  const auto c = classify<double>(bundle.hmms, obs);
  Recognition r;
  r.label = c.label;
  r.labels = bundle.labels();
  r.log_likelihoods = c.log_likelihoods;
  return r;
}

DetectionResult detect(const ModelBundle& bundle, const ActionSequence& stream) {
  if (stream.frames.empty()) throw Error("detect: empty stream");
  const SymbolSequence obs = symbolize(bundle, stream);
  const auto composite = compose_parallel(bundle.hmms, bundle.config.detection.exit_prob);
  return detect_sliding(composite, obs, bundle.config.detection.window, bundle.config.detection.mode);
}

std::string serialize_bundle(const ModelBundle& b) {
  b.validate();
  Json j;
  j["config"] = config_json(b.config);
  j["topology"] = detail::parse_json(topology_to_json(*b.topology), "topology");
  j["angles"] = detail::parse_json(angle_table_to_json(b.angles, *b.topology), "angles")["angles"];
  j["bones"] = vec_json(b.bones.lengths);
  Json degenerate = Json::array();
  for (Eigen::Index i = 0; i < b.normalizer.degenerate.size(); ++i) degenerate.push_back(bool(b.normalizer.degenerate[i]));
  j["normalizer"] = {{"means", vec_json(b.normalizer.means)},
                     {"stds", vec_json(b.normalizer.stds)},
                     {"degenerate", degenerate}};
  j["pca"] = {{"mean", vec_json(b.pca.mean)},
              {"eigenvalues", vec_json(b.pca.eigenvalues)},
              {"components", rows_json(b.pca.components.leftCols(b.pca.retained).transpose())}};
  j["codebook"] = rows_json(b.codebook.exemplars);
  Json hmms = Json::array();
  for (const Hmm& h : b.hmms)
    hmms.push_back({{"label", h.label},
                    {"states", h.states()},
                    {"initial", vec_json(h.initial)},
                    {"transition", rows_json(h.transition)},
                    {"emission", rows_json(h.emission)}});
  j["hmms"] = hmms;
  return "skelact-bundle " + std::to_string(ModelBundle::kFormatVersion) + "\n" + j.dump(1) + "\n";
}

ModelBundle deserialize_bundle(std::string_view text) {
  const auto nl = text.find('\n');
  const std::string_view head = text.substr(0, nl);
  constexpr std::string_view magic = "skelact-bundle ";
  if (!head.starts_with(magic)) throw Error("bundle: missing 'skelact-bundle' version line");
  const std::string version(head.substr(magic.size()));
  if (version != std::to_string(ModelBundle::kFormatVersion))
    throw Error("bundle: unsupported format version '" + version + "' (this build reads version " +
                std::to_string(ModelBundle::kFormatVersion) + ")");
  if (nl == std::string_view::npos) throw Error("bundle: no body");
  const Json j = detail::parse_json(text.substr(nl + 1), "bundle");
  constexpr std::string_view w = "bundle";

  ModelBundle b;
  b.config = config_from_json(need(j, "config", w));
  b.topology = parse_topology(need(j, "topology", w).dump());
  Json angles;
  angles["angles"] = need(j, "angles", w);
  b.angles = parse_angle_table(angles.dump(), *b.topology);
  b.bones.lengths = vec_from(need(j, "bones", w), "bundle.bones");
  const Json& n = need(j, "normalizer", w);
  b.normalizer.means = vec_from(need(n, "means", "bundle.normalizer"), "bundle.normalizer.means");
  b.normalizer.stds = vec_from(need(n, "stds", "bundle.normalizer"), "bundle.normalizer.stds");
  const Json& deg = need(n, "degenerate", "bundle.normalizer");
  if (!deg.is_array() || deg.size() != static_cast<std::size_t>(b.normalizer.means.size()))
    throw Error("bundle.normalizer.degenerate: size mismatch");
  b.normalizer.degenerate.resize(b.normalizer.means.size());
  for (std::size_t i = 0; i < deg.size(); ++i) b.normalizer.degenerate[static_cast<Eigen::Index>(i)] = deg[i].get<bool>();
  if (b.normalizer.stds.size() != b.normalizer.means.size()) throw Error("bundle.normalizer: size mismatch");
  const Json& p = need(j, "pca", w);
  b.pca.mean = vec_from(need(p, "mean", "bundle.pca"), "bundle.pca.mean");
  b.pca.eigenvalues = vec_from(need(p, "eigenvalues", "bundle.pca"), "bundle.pca.eigenvalues");
  b.pca.components = rows_from(need(p, "components", "bundle.pca"), "bundle.pca.components").transpose();
  b.pca.retained = b.pca.components.cols();
  b.codebook.exemplars = rows_from(need(j, "codebook", w), "bundle.codebook");
  for (const Json& h : need(j, "hmms", w)) {
    Hmm m;
    m.label = need_as<Label>(h, "label", "bundle.hmms");
    m.initial = vec_from(need(h, "initial", "bundle.hmms"), "bundle.hmms.initial");
    m.transition = rows_from(need(h, "transition", "bundle.hmms"), "bundle.hmms.transition");
    m.emission = rows_from(need(h, "emission", "bundle.hmms"), "bundle.hmms.emission");
    if (need_as<int>(h, "states", "bundle.hmms") != m.states())
      throw Error("bundle.hmms: state count disagrees with the tables");
    b.hmms.push_back(std::move(m));
  }
  b.validate();
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  detail::write_file(path, serialize_bundle(bundle));
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  return deserialize_bundle(detail::read_file(path));
}

std::string training_log_to_json(const TrainingLog& log) {
  Json j;
  j["descriptor_dimension"] = log.descriptor_dimension;
  j["pca_dimension"] = log.pca_dimension;
  j["training_frames"] = log.training_frames;
  j["clustered_rows"] = log.clustered_rows;
  j["codebook_size"] = log.codebook_size;
  j["ap_iterations"] = log.ap_iterations;
  j["ap_converged"] = log.ap_converged;
  j["skipped_bone_samples"] = log.skipped_bone_samples;
  Json hmms = Json::array();
  for (const auto& h : log.hmms) {
    Json restarts = Json::array();
    for (const auto& r : h.restarts) restarts.push_back({{"restart", r.restart}, {"log_likelihoods", r.log_likelihoods}});
    hmms.push_back({{"label", h.label},
                    {"sequences", h.sequences},
                    {"best_restart", h.best_restart},
                    {"restarts", restarts}});
  }
  j["hmms"] = hmms;
  return j.dump(2) + "\n";
}

}  // namespace skelact
