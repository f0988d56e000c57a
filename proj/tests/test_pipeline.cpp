#include <doctest.h>

#include "skelact/pipeline.hpp"
#include "skelact/synthetic.hpp"
#include "support.hpp"

using namespace skelact;
using namespace skelact::test;

namespace {

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.ap.max_rows = 600;
  cfg.hmm.restarts = 2;
  cfg.seed = 11;
  return cfg;
}

const std::vector<ActionSequence>& two_label_set() {
  static const std::vector<ActionSequence> set = [] {
    const std::vector<int> subjects{1, 2, 3, 4};
    return synthesize_set(2, subjects, 5, 42);
  }();
  return set;
}

const TrainingResult& two_label_model() {
  static const TrainingResult r = [] {
    const auto cfg = small_config();
    return train(two_label_set(), cfg, resolve_angle_table(cfg, *kinect20_topology()));
  }();
  return r;
}

}  // namespace

TEST_CASE("config round trip and defaults") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.descriptor.family = DescriptorFamily::RelaCentroDctAmdf;
  cfg.ap.preference = -3.5;
  cfg.hmm.topology = HmmTopology::LeftToRight;
  cfg.detection.mode = DetectionMode::PerWindow;
  cfg.normalization_source = NormalizationSource::All;
  cfg.seed = 0xffffffffffffull;
  CHECK(parse_config(config_to_json(cfg)) == cfg);
  CHECK(load_config(std::filesystem::path(SKELACT_DATA_DIR) / "../configs/default.json") == PipelineConfig{});
}

TEST_CASE("config errors name the missing key") {
  auto j = config_to_json(PipelineConfig{});
  const auto pos = j.find("\"states\"");
  REQUIRE(pos != std::string::npos);
  j.replace(pos, 8, "\"stateZ\"");
  try {
    parse_config(j);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("'states'") != std::string::npos);
  }
  PipelineConfig bad;
  bad.hmm.states = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.detection.exit_prob = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.variance_fraction = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("angle tables are only resolved for angular families") {
  PipelineConfig cfg;
  const auto topo = kinect20_topology();
  CHECK(resolve_angle_table(cfg, *topo).triples.empty());
  cfg.descriptor.family = DescriptorFamily::Mixed;
  CHECK(resolve_angle_table(cfg, *topo).triples.size() == 35);
  cfg.angle_table = "angles/default35.json";
  CHECK(resolve_angle_table(cfg, *topo, SKELACT_DATA_DIR).triples.size() == 35);
  cfg.topology = "topology/msr20.json";
  CHECK(resolve_topology(cfg, SKELACT_DATA_DIR)->joint_count() == 20);
}

TEST_CASE("training builds a consistent bundle") {
  const auto& r = two_label_model();
  const auto& b = r.bundle;
  CHECK(b.hmms.size() == 2);
  CHECK(b.labels() == std::vector<Label>{0, 1});
  CHECK_NOTHROW(b.validate());
  CHECK(b.pca.output_dimension() == b.codebook.dimension());
  for (const auto& h : b.hmms) {
    CHECK(h.symbols() == b.codebook.size());
    CHECK(h.states() == 3);
  }
  CHECK(r.log.descriptor_dimension == 480);
  CHECK(r.log.codebook_size == b.codebook.size());
  CHECK(r.log.training_frames >= r.log.clustered_rows);
  REQUIRE(r.log.hmms.size() == 2);
  for (const auto& l : r.log.hmms) {
    CHECK(l.sequences == 20);
    CHECK(l.restarts.size() == 2);
  }
}

TEST_CASE("training sequences are recognized as their own label") {
  const auto& b = two_label_model().bundle;
  int correct = 0;
  for (const auto& s : two_label_set()) correct += recognize(b, s).label == s.label;
  CHECK(correct >= 38);
}

TEST_CASE("recognition edge cases") {
  const auto& b = two_label_model().bundle;
  auto one = two_label_set()[0];
  one.frames.resize(1);
  const auto r = recognize(b, one);
  CHECK(r.label.has_value());
  CHECK(r.labels == std::vector<Label>{0, 1});
  CHECK(r.log_likelihoods.size() == 2);

  Rng rng(1);
  CHECK_THROWS_AS(recognize(b, random_sequence(rng, chain_topology(20), 5)), Error);
  auto empty = one;
  empty.frames.clear();
  CHECK_THROWS_AS(recognize(b, empty), Error);
}

TEST_CASE("training is deterministic and the bundle round trips") {
  const auto cfg = small_config();
  const auto again = train(two_label_set(), cfg, {});
  const std::string text = serialize_bundle(two_label_model().bundle);
  CHECK(serialize_bundle(again.bundle) == text);
  CHECK(text.rfind("skelact-bundle 1\n", 0) == 0);
  const auto back = deserialize_bundle(text);
  CHECK(serialize_bundle(back) == text);
  for (std::size_t i = 0; i < two_label_set().size(); i += 3) {
    const auto a = recognize(two_label_model().bundle, two_label_set()[i]);
    const auto c = recognize(back, two_label_set()[i]);
    CHECK(a.label == c.label);
    CHECK(a.log_likelihoods == c.log_likelihoods);
  }
  TempDir dir("bundle");
  save_bundle(back, dir / "m.bundle");
  CHECK(serialize_bundle(load_bundle(dir / "m.bundle")) == text);
}

TEST_CASE("bundle format version is checked") {
  std::string text = serialize_bundle(two_label_model().bundle);
  text.replace(0, 16, "skelact-bundle 9");
  try {
    deserialize_bundle(text);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("unsupported format version") != std::string::npos);
  }
  CHECK_THROWS_AS(deserialize_bundle("not a bundle"), Error);
}

TEST_CASE("training preconditions") {
  const auto cfg = small_config();
  std::vector<ActionSequence> one_label;
  for (const auto& s : two_label_set())
    if (s.label == 0) one_label.push_back(s);
  try {
    train(one_label, cfg, {});
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "input");
  }
  CHECK_NOTHROW(train(one_label, cfg, {}, Purpose::Detection));
  auto unlabelled = two_label_set();
  unlabelled[0].label.reset();
  CHECK_THROWS_AS(train(unlabelled, cfg, {}), StageError);
  CHECK_THROWS_AS(train(std::span<const ActionSequence>(), cfg, {}), StageError);
}

TEST_CASE("a bone profile override is stored in the bundle") {
  const auto cfg = small_config();
  BoneLengthProfile p{Eigen::VectorXd::Constant(19, 0.3)};
  const auto r = train(two_label_set(), cfg, {}, Purpose::Recognition, &p);
  CHECK(r.bundle.bones.lengths == p.lengths);
}

TEST_CASE("detection on concatenated instances") {
  const auto& b = two_label_model().bundle;
  const std::vector<SyntheticMotion> order{SyntheticMotion::KickLeft, SyntheticMotion::WaveRight};
  const auto stream = synthesize_stream(order, 9, 0, 42);
  const auto r = detect(b, stream);
  REQUIRE(r.frame_labels.size() == stream.frame_labels.size());
  std::vector<Label> seen;
  for (const auto& s : r.segments)
    if (s.end - s.start >= 5) seen.push_back(s.label);
  CHECK(seen == std::vector<Label>{1, 0});
  CHECK(score_detection(r.frame_labels, stream.frame_labels).micro.f1 >= 0.8);

  auto empty = stream;
  empty.frames.clear();
  empty.frame_labels.clear();
  CHECK_THROWS_AS(detect(b, empty), Error);
}

TEST_CASE("a single training instance detects as its recognized label") {
  const auto& b = two_label_model().bundle;
  for (std::size_t i : {0u, 25u}) {
    const auto& s = two_label_set()[i];
    const auto r = detect(b, s);
    const auto want = recognize(b, s).label;
    const long agree = std::count(r.frame_labels.begin(), r.frame_labels.end(), *want);
    CHECK(agree >= static_cast<long>(r.frame_labels.size()) * 9 / 10);
  }
}

TEST_CASE("training log serializes every restart") {
  const auto text = training_log_to_json(two_label_model().log);
  CHECK(text.find("\"log_likelihoods\"") != std::string::npos);
  CHECK(text.find("\"codebook_size\"") != std::string::npos);
}
