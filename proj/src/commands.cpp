#include "skelact/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>

#include "io_util.hpp"
#include "skelact/dataset.hpp"
#include "skelact/pipeline.hpp"
#include "skelact/report.hpp"
#include "skelact/synthetic.hpp"

namespace fs = std::filesystem;

namespace skelact {

namespace {

using detail::Json;

struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> descriptor, centroid, hmm_topology, detection_mode, normalization_source, topology,
      angle_table;
  std::optional<int> states, restarts, hmm_iterations, window, max_rows, dct_keep, amdf_n, ap_iterations;
  std::optional<double> smoothing, exit_prob, variance_fraction, damping, preference, tolerance;
  std::optional<std::uint64_t> seed;

  void add_pipeline(CLI::App* sub) {
    sub->add_option("--config", config_path, "Pipeline config file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--descriptor", descriptor, "Descriptor family");
    sub->add_option("--centroid", centroid, "Centro reference: per_frame or whole_sequence");
    sub->add_option("--dct-keep", dct_keep, "DCT coefficients kept");
    sub->add_option("--amdf-n", amdf_n, "AMDF lag count");
    sub->add_option("--variance-fraction", variance_fraction, "PCA retained variance fraction");
    sub->add_option("--damping", damping, "Affinity propagation damping");
    sub->add_option("--ap-iterations", ap_iterations, "Affinity propagation iteration cap");
    sub->add_option("--preference", preference, "Affinity propagation preference");
    sub->add_option("--max-rows", max_rows, "Rows clustered by affinity propagation");
    sub->add_option("--states", states, "HMM states per action");
    sub->add_option("--restarts", restarts, "Baum-Welch restarts per action");
    sub->add_option("--smoothing", smoothing, "Emission smoothing");
    sub->add_option("--hmm-iterations", hmm_iterations, "Baum-Welch iteration cap");
    sub->add_option("--tolerance", tolerance, "Baum-Welch stopping tolerance");
    sub->add_option("--hmm-topology", hmm_topology, "ergodic or left_to_right");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--topology", topology, "kinect20 or a topology file");
    sub->add_option("--angle-table", angle_table, "default or an angle-table file");
    sub->add_option("--normalization-source", normalization_source, "train or all");
    add_detection(sub);
  }

  void add_detection(CLI::App* sub) {
    sub->add_option("--window", window, "Detection window width in frames");
    sub->add_option("--exit-prob", exit_prob, "Probability of leaving an action model per frame");
    sub->add_option("--detection-mode", detection_mode, "global or per_window");
  }

  PipelineConfig load() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    apply(c);
    return c;
  }

  fs::path base_dir() const {
    return config_path.empty() ? fs::path() : fs::path(config_path).parent_path();
  }

  void apply(PipelineConfig& c) const {
    if (descriptor) c.descriptor.family = parse_descriptor_family(*descriptor);
    if (centroid) c.descriptor.centroid = parse_centroid_mode(*centroid);
    if (dct_keep) c.descriptor.dct_keep = *dct_keep;
    if (amdf_n) c.descriptor.amdf_n = *amdf_n;
    if (variance_fraction) c.variance_fraction = *variance_fraction;
    if (damping) c.ap.damping = *damping;
    if (ap_iterations) c.ap.max_iterations = *ap_iterations;
    if (preference) c.ap.preference = *preference;
    if (max_rows) c.ap.max_rows = *max_rows;
    if (states) c.hmm.states = *states;
    if (restarts) c.hmm.restarts = *restarts;
    if (smoothing) c.hmm.smoothing = *smoothing;
    if (hmm_iterations) c.hmm.max_iterations = *hmm_iterations;
    if (tolerance) c.hmm.tolerance = *tolerance;
    if (hmm_topology) c.hmm.topology = parse_hmm_topology(*hmm_topology);
    if (seed) c.seed = *seed;
    if (topology) c.topology = *topology;
    if (angle_table) c.angle_table = *angle_table;
    if (normalization_source) c.normalization_source = parse_normalization_source(*normalization_source);
    apply_detection(c);
    c.validate();
  }

  void apply_detection(PipelineConfig& c) const {
    if (window) c.detection.window = *window;
    if (exit_prob) c.detection.exit_prob = *exit_prob;
    if (detection_mode) c.detection.mode = parse_detection_mode(*detection_mode);
    c.detection.validate();
  }
};

enum class Side { Train, Test };

/// Entries on one side of a split file, or of the listed subjects; every
/// entry when neither is given.
std::vector<ManifestEntry> select(const DatasetManifest& m, const std::string& split_path,
                                  const std::vector<int>& subjects, Side side) {
  if (!split_path.empty()) {
    const Split s = make_split(m, parse_split(detail::read_file(split_path)));
    return side == Side::Train ? s.train : s.test;
  }
  if (subjects.empty()) return m.entries;
  const std::set<int> keep(subjects.begin(), subjects.end());
  std::vector<ManifestEntry> out;
  for (const auto& e : m.entries)
    if (keep.count(e.subject)) out.push_back(e);
  return out;
}

TopologyPtr topology_by_ref(const std::string& ref) {
  return ref == "kinect20" ? kinect20_topology() : load_topology(ref);
}

int cmd_ingest(const fs::path& input, const fs::path& layout_path, const fs::path& output,
               const std::string& topology_ref, const std::string& naming, int fixed_label, int fixed_subject,
               bool use_exclusions, std::ostream& out, std::ostream& err) {
  const LoaderLayout layout = load_layout(layout_path);
  TopologyPtr topo;
  if (!topology_ref.empty()) {
    topo = topology_by_ref(topology_ref);
  } else if (layout.topology.empty() || layout.topology == "kinect20") {
    topo = kinect20_topology();
  } else {
    // Layout presets name a topology shipped next to them.
    const fs::path shipped = layout_path.parent_path() / ".." / "topology" / (layout.topology + ".json");
    if (!fs::exists(shipped))
      throw Error("layout '" + layout.name + "' names topology '" + layout.topology + "'; pass --topology FILE");
    topo = load_topology(shipped);
  }
  if (!layout.topology.empty() && layout.topology != topo->name())
    throw Error("layout '" + layout.name + "' expects topology '" + layout.topology + "', got '" + topo->name() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    err << "error: no input files in " << input.string() << "\n";
    return 1;
  }
  fs::create_directories(output);

  DatasetManifest manifest;
  manifest.topology = topo->name();
  Json excluded = Json::array();
  Json failures = Json::array();
  int next_instance = 1;
  for (const fs::path& f : files) {
    const std::string stem = f.stem().string();
    if (use_exclusions && (default_msr_exclusions().count(stem) || default_msr_exclusions().count(f.filename().string()))) {
      excluded.push_back(f.filename().string());
      continue;
    }
    try {
      ManifestEntry entry;
      if (naming == "msr") {
        const MsrName n = parse_msr_filename(f.filename().string());
        entry.label = n.action;
        entry.subject = n.subject;
        entry.instance = n.instance;
      } else {
        entry.label = fixed_label;
        entry.subject = fixed_subject;
        entry.instance = next_instance++;
      }
      ActionSequence seq = load_joint_text(f, layout, topo);
      seq.label = entry.label;
      seq.subject = entry.subject;
      seq.instance = entry.instance;
      entry.path = stem + ".seq";
      save_canonical(seq, output / entry.path);
      manifest.entries.push_back(entry);
    } catch (const std::exception& e) {
      failures.push_back({{"file", f.filename().string()}, {"error", e.what()}});
    }
  }
  manifest.validate();
  Json j = detail::parse_json(manifest_to_json(manifest), "manifest");
  j["excluded"] = excluded;
  j["failures"] = failures;
  detail::write_file(output / "manifest.json", j.dump(2) + "\n");
  out << "ingested " << manifest.entries.size() << " file(s), excluded " << excluded.size() << ", failed "
      << failures.size() << "\n";
  for (const auto& f : failures)
    err << "failed: " << f["file"].get<std::string>() << ": " << f["error"].get<std::string>() << "\n";
  if (manifest.entries.empty()) {
    err << "error: no file could be converted\n";
    return 1;
  }
  return 0;
}

int cmd_synth(const fs::path& output, int actions, const std::vector<int>& subjects, int instances, int streams,
              int stream_length, std::uint64_t seed, double noise, std::ostream& out) {
  if (subjects.empty()) throw Error("synth: no subjects");
  if (streams < 0 || stream_length < 1) throw Error("synth: streams must be >= 0 and stream length >= 1");
  SyntheticOptions opts;
  opts.noise = noise;
  fs::create_directories(output);
  DatasetManifest manifest{"kinect20", {}};
  for (const ActionSequence& s : synthesize_set(actions, subjects, instances, seed, opts)) {
    ManifestEntry e{"", *s.label, *s.subject, *s.instance};
    e.path = "a" + std::to_string(e.label) + "_s" + std::to_string(e.subject) + "_e" + std::to_string(e.instance) + ".seq";
    save_canonical(s, output / e.path);
    manifest.entries.push_back(e);
  }
  detail::write_file(output / "manifest.json", manifest_to_json(manifest));
  out << "wrote " << manifest.entries.size() << " instance(s)\n";
  if (streams > 0) {
    DatasetManifest sm{"kinect20", {}};
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::uniform_int_distribution<int> pick(0, actions - 1);
    for (int k = 0; k < streams; ++k) {
      std::vector<SyntheticMotion> motions;
      for (int i = 0; i < stream_length; ++i) motions.push_back(static_cast<SyntheticMotion>(pick(rng)));
      const int subject = subjects[static_cast<std::size_t>(k) % subjects.size()];
      const ActionSequence s = synthesize_stream(motions, subject, k, seed, opts);
      ManifestEntry e{"stream_" + std::to_string(k) + ".seq", 0, subject, k};
      save_canonical(s, output / e.path);
      sm.entries.push_back(e);
    }
    detail::write_file(output / "streams.json", manifest_to_json(sm));
    out << "wrote " << streams << " stream(s)\n";
  }
  return 0;
}

int cmd_train(const ConfigFlags& flags, const fs::path& manifest_path, const std::string& split_path,
              const std::vector<int>& train_subjects, const std::vector<int>& test_subjects,
              const std::string& purpose_name, const fs::path& bundle_path, std::string log_path, std::ostream& out) {
  const PipelineConfig cfg = flags.load();
  const TopologyPtr topo = resolve_topology(cfg, flags.base_dir());
  const AngleTable angles = resolve_angle_table(cfg, *topo, flags.base_dir());
  const DatasetManifest manifest = load_manifest(manifest_path);
  if (manifest.topology != topo->name())
    throw Error("manifest topology '" + manifest.topology + "' differs from config topology '" + topo->name() + "'");
  const auto train_entries = select(manifest, split_path, train_subjects, Side::Train);
  if (train_entries.empty()) throw Error("no training entries after the split");
  const fs::path base = manifest_path.parent_path();
  const auto train_seqs = load_entries(train_entries, base, topo);
  std::optional<BoneLengthProfile> profile;
  if (cfg.normalization_source == NormalizationSource::All) {
    auto every = train_seqs;
    if (!split_path.empty() || !test_subjects.empty())
      for (auto& s : load_entries(select(manifest, split_path, test_subjects, Side::Test), base, topo))
        every.push_back(std::move(s));
    profile = compute_average_bone_lengths(every);
  }
  Purpose purpose;
  if (purpose_name == "recognition")
    purpose = Purpose::Recognition;
  else if (purpose_name == "detection")
    purpose = Purpose::Detection;
  else
    throw Error("unknown purpose '" + purpose_name + "'");
  const TrainingResult res = train(train_seqs, cfg, angles, purpose, profile ? &*profile : nullptr);
  save_bundle(res.bundle, bundle_path);
  if (log_path.empty()) log_path = bundle_path.string() + ".log.json";
  detail::write_file(log_path, training_log_to_json(res.log));
  out << "trained " << res.bundle.hmms.size() << " model(s) on " << train_seqs.size() << " sequence(s); codebook "
      << res.log.codebook_size << ", pca " << res.log.pca_dimension << "/" << res.log.descriptor_dimension << "\n";
  return 0;
}

int cmd_recognize(const fs::path& bundle_path, const std::vector<std::string>& inputs, std::ostream& out) {
  const ModelBundle bundle = load_bundle(bundle_path);
  for (const std::string& in : inputs) {
    const Recognition r = recognize(bundle, load_canonical(in, bundle.topology));
    out << in << "\t" << (r.label ? std::to_string(*r.label) : std::string("none"));
    for (std::size_t k = 0; k < r.labels.size(); ++k)
      out << "\t" << r.labels[k] << ":" << Json(r.log_likelihoods[k]).dump();
    out << "\n";
  }
  return 0;
}

int cmd_detect(const ConfigFlags& flags, const fs::path& bundle_path, const fs::path& input,
               const std::string& output, std::ostream& out) {
  ModelBundle bundle = load_bundle(bundle_path);
  flags.apply_detection(bundle.config);
  const DetectionResult r = detect(bundle, load_canonical(input, bundle.topology));
  if (output.empty())
    out << format_detection(r);
  else
    detail::write_file(output, format_detection(r));
  return 0;
}

int cmd_evaluate(const ConfigFlags& flags, const fs::path& bundle_path, const fs::path& manifest_path,
                 const std::string& split_path, const std::vector<int>& test_subjects, const std::string& mode,
                 const fs::path& report_path, const std::string& table_path, std::ostream& out) {
  const std::string bundle_text = detail::read_file(bundle_path);
  ModelBundle bundle = deserialize_bundle(bundle_text);
  flags.apply_detection(bundle.config);
  const std::string manifest_text = detail::read_file(manifest_path);
  const DatasetManifest manifest = parse_manifest(manifest_text);
  const auto test_entries = select(manifest, split_path, test_subjects, Side::Test);
  if (test_entries.empty()) throw Error("no test entries");
  const auto seqs = load_entries(test_entries, manifest_path.parent_path(), bundle.topology);

  EvaluationReport report;
  report.metadata = {mode, hash_hex(config_to_json(bundle.config)), bundle.config.seed, hash_hex(manifest_text),
                     hash_hex(bundle_text)};
  if (mode == "recognition") {
    std::vector<Label> truth;
    std::vector<std::optional<Label>> predicted;
    for (const ActionSequence& s : seqs) {
      truth.push_back(*s.label);
      predicted.push_back(recognize(bundle, s).label);
    }
    report.recognition = score_recognition(bundle.labels(), truth, predicted);
  } else if (mode == "detection") {
    DetectionReport d;
    std::vector<Label> all_pred, all_truth;
    long tp = 0, fp = 0, fn = 0;
    for (const ActionSequence& s : seqs) {
      const std::vector<Label> truth =
          s.frame_labels.empty() ? std::vector<Label>(s.frames.size(), *s.label) : s.frame_labels;
      const DetectionResult r = detect(bundle, s);
      all_pred.insert(all_pred.end(), r.frame_labels.begin(), r.frame_labels.end());
      all_truth.insert(all_truth.end(), truth.begin(), truth.end());
      const Prf seg = score_segments(r.frame_labels, truth);
      tp += seg.true_positives;
      fp += seg.false_positives;
      fn += seg.false_negatives;
    }
    d.frames = score_detection(all_pred, all_truth);
    d.segments.true_positives = tp;
    d.segments.false_positives = fp;
    d.segments.false_negatives = fn;
    d.segments.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    d.segments.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    d.segments.f1 = d.segments.precision + d.segments.recall > 0
                        ? 2 * d.segments.precision * d.segments.recall / (d.segments.precision + d.segments.recall)
                        : 0.0;
    d.streams = static_cast<long>(seqs.size());
    d.frame_count = static_cast<long>(all_truth.size());
    report.detection = d;
  } else {
    throw Error("unknown evaluation mode '" + mode + "'");
  }
  const std::string table = report_to_table(report);
  detail::write_file(report_path, report_to_json(report));
  if (!table_path.empty()) detail::write_file(table_path, table);
  out << table;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skeletal action recognition and detection"};
  app.name("skelact");
  app.require_subcommand(1);

  std::string input_dir, layout, output_dir, topology_ref, naming = "msr";
  int fixed_label = 0, fixed_subject = 0;
  bool no_exclusions = false;
  auto* ingest = app.add_subcommand("ingest", "Convert joint text files to canonical sequences and a manifest");
  ingest->add_option("--input", input_dir, "Directory of joint text files")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--layout", layout, "Loader layout file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--output", output_dir, "Output directory")->required();
  ingest->add_option("--topology", topology_ref, "kinect20 or a topology file (default: the layout's topology)");
  ingest->add_option("--naming", naming, "msr (aXX_sYY_eZZ names) or fixed")->check(CLI::IsMember({"msr", "fixed"}));
  ingest->add_option("--label", fixed_label, "Label for --naming fixed");
  ingest->add_option("--subject", fixed_subject, "Subject for --naming fixed");
  ingest->add_flag("--no-exclusions", no_exclusions, "Keep files on the corrupted-recording list");

  int actions = 3, instances = 10, streams = 0, stream_length = 5;
  std::vector<int> synth_subjects{1, 2, 3, 4, 5};
  std::uint64_t synth_seed = 0;
  double noise = 0.005;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  synth->add_option("--output", output_dir, "Output directory")->required();
  synth->add_option("--actions", actions, "Number of motion generators (1-5)");
  synth->add_option("--subjects", synth_subjects, "Subject ids")->delimiter(',');
  synth->add_option("--instances", instances, "Instances per subject and action");
  synth->add_option("--streams", streams, "Concatenated detection streams");
  synth->add_option("--stream-length", stream_length, "Instances per stream");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--noise", noise, "Sensor noise sigma in metres");

  ConfigFlags train_flags;
  std::string manifest, split, bundle, log, purpose = "recognition";
  std::vector<int> train_subjects, test_subjects;
  auto* train_cmd = app.add_subcommand("train", "Fit a model bundle on the training split");
  train_flags.add_pipeline(train_cmd);
  train_cmd->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--split", split, "Split file")->check(CLI::ExistingFile);
  train_cmd->add_option("--train-subjects", train_subjects, "Training subject ids")->delimiter(',');
  train_cmd->add_option("--test-subjects", test_subjects, "Test subject ids")->delimiter(',');
  train_cmd->add_option("--purpose", purpose, "recognition or detection");
  train_cmd->add_option("--bundle", bundle, "Output bundle file")->required();
  train_cmd->add_option("--log", log, "Training log file (default <bundle>.log.json)");

  std::vector<std::string> inputs;
  auto* recognize_cmd = app.add_subcommand("recognize", "Label canonical sequence files");
  recognize_cmd->add_option("--bundle", bundle, "Model bundle")->required()->check(CLI::ExistingFile);
  recognize_cmd->add_option("inputs", inputs, "Canonical sequence files")->required()->check(CLI::ExistingFile);

  ConfigFlags detect_flags;
  std::string detect_input, detect_output;
  auto* detect_cmd = app.add_subcommand("detect", "Per-frame action labels for a canonical stream");
  detect_cmd->add_option("--bundle", bundle, "Model bundle")->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("--input", detect_input, "Canonical stream file")->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("--output", detect_output, "TSV output (stdout when omitted)");
  detect_flags.add_detection(detect_cmd);

  ConfigFlags eval_flags;
  std::string mode = "recognition", report, table;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a bundle on the test split");
  evaluate_cmd->add_option("--bundle", bundle, "Model bundle")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--split", split, "Split file")->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--test-subjects", test_subjects, "Test subject ids")->delimiter(',');
  evaluate_cmd->add_option("--mode", mode, "recognition or detection")
      ->check(CLI::IsMember({"recognition", "detection"}));
  evaluate_cmd->add_option("--report", report, "Report file (JSON)")->required();
  evaluate_cmd->add_option("--table", table, "Also write the rendered table here");
  eval_flags.add_detection(evaluate_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (ingest->parsed())
      return cmd_ingest(input_dir, layout, output_dir, topology_ref, naming, fixed_label, fixed_subject,
                        !no_exclusions, out, err);
    if (synth->parsed())
      return cmd_synth(output_dir, actions, synth_subjects, instances, streams, stream_length, synth_seed, noise, out);
    if (train_cmd->parsed())
      return cmd_train(train_flags, manifest, split, train_subjects, test_subjects, purpose, bundle, log, out);
    if (recognize_cmd->parsed()) return cmd_recognize(bundle, inputs, out);
    if (detect_cmd->parsed()) return cmd_detect(detect_flags, bundle, detect_input, detect_output, out);
    if (evaluate_cmd->parsed())
      return cmd_evaluate(eval_flags, bundle, manifest, split, test_subjects, mode, report, table, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace skelact
