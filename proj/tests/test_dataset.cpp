#include <doctest.h>

#include <fstream>
#include <set>

#include "skelact/dataset.hpp"
#include "support.hpp"

using namespace skelact;
using namespace skelact::test;

namespace {

LoaderLayout msr_layout(int header_lines) {
  LoaderLayout l;
  l.name = "msr";
  l.topology = "kinect20";
  l.header_lines = header_lines;
  return l;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string msr_frame(double base) {
  std::string s;
  for (int j = 0; j < 20; ++j)
    s += std::to_string(base + j) + " " + std::to_string(base - j) + " " + std::to_string(2 * j) + " 1\n";
  return s;
}

}  // namespace

TEST_CASE("joint text: minimal file with one header line") {
  TempDir dir("io");
  std::string text = "1\n";
  for (int j = 0; j < 20; ++j) text += j == 3 ? "0.5 1.25 -0.75 1.0\n" : "0 0 0 1\n";
  write(dir / "a.txt", text);
  const auto seq = load_joint_text(dir / "a.txt", msr_layout(1), kinect20_topology());
  REQUIRE(seq.frame_count() == 1);
  CHECK(seq.frames[0].positions.cols() == 20);
  CHECK(seq.frames[0].positions.col(3) == Eigen::Vector3d(0.5, 1.25, -0.75));
}

TEST_CASE("joint text: frames keep file order and blank lines are ignored") {
  TempDir dir("io");
  write(dir / "a.txt", msr_frame(0) + "\n" + msr_frame(100) + msr_frame(200) + "\n\n");
  const auto seq = load_joint_text(dir / "a.txt", msr_layout(0), kinect20_topology());
  REQUIRE(seq.frame_count() == 3);
  CHECK(seq.frames[0].positions(0, 0) == 0);
  CHECK(seq.frames[1].positions(0, 0) == 100);
  CHECK(seq.frames[2].positions(0, 5) == 205);
  CHECK(seq.frames[2].timestamp_index == 2);
}

TEST_CASE("joint text: one row per frame with a leading index column") {
  TempDir dir("io");
  const auto layout = load_layout(std::filesystem::path(SKELACT_DATA_DIR) / "layouts/utkinect.json");
  std::string row = "7";
  for (int j = 0; j < 20; ++j) row += " " + std::to_string(j) + " " + std::to_string(-j) + " 2.5";
  write(dir / "u.txt", row + "\n" + row + "\n");
  const auto seq = load_joint_text(dir / "u.txt", layout, kinect20_topology());
  REQUIRE(seq.frame_count() == 2);
  CHECK(seq.frames[1].positions.col(4) == Eigen::Vector3d(4, -4, 2.5));
}

TEST_CASE("joint text: malformed input names the line") {
  TempDir dir("io");
  std::string text = msr_frame(0);
  text.replace(text.find('\n') + 1, 1, "x");
  write(dir / "bad.txt", text);
  try {
    load_joint_text(dir / "bad.txt", msr_layout(0), kinect20_topology());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  write(dir / "short.txt", msr_frame(0).substr(0, 40));
  CHECK_THROWS_AS(load_joint_text(dir / "short.txt", msr_layout(0), kinect20_topology()), Error);
  write(dir / "empty.txt", "");
  CHECK_THROWS_AS(load_joint_text(dir / "empty.txt", msr_layout(0), kinect20_topology()), Error);
}

TEST_CASE("shipped layouts parse") {
  const std::filesystem::path dir = std::filesystem::path(SKELACT_DATA_DIR) / "layouts";
  CHECK(load_layout(dir / "msr_action3d.json").rows_per_frame == 20);
  CHECK(load_layout(dir / "utkinect.json").joints_per_row() == 20);
  CHECK_THROWS_AS(parse_layout(R"({"name": "x"})"), Error);
}

TEST_CASE("msr file names") {
  CHECK(parse_msr_filename("a02_s03_e02_skeleton3D.txt") == MsrName{2, 3, 2});
  CHECK(parse_msr_filename("a20_s10_e03_skeleton3D.txt") == MsrName{20, 10, 3});
  CHECK_THROWS_AS(parse_msr_filename("readme.txt"), Error);
  CHECK(default_msr_exclusions().size() == 10);
  CHECK(default_msr_exclusions().count("a02_s03_e02_skeleton3D"));
}

TEST_CASE("canonical format header fields") {
  Rng rng(1);
  auto seq = random_sequence(rng, kinect20_topology(), 2);
  const std::string plain = format_canonical(seq);
  CHECK(plain.find("\nlabel") == std::string::npos);
  CHECK(plain.find("frames 2\n") != std::string::npos);
  seq.label = 5;
  CHECK(format_canonical(seq).find("label 5\n") != std::string::npos);
}

TEST_CASE("canonical format round trips bit-identically") {
  Rng rng(9);
  TempDir dir("canon");
  for (int trial = 0; trial < 30; ++trial) {
    const auto topo = trial % 2 ? kinect20_topology() : random_topology(rng, uniform_int(rng, 2, 12));
    auto seq = random_sequence(rng, topo, uniform_int(rng, 1, 12), std::pow(10.0, uniform(rng, -8, 8)));
    if (trial % 3 == 0) seq.label = uniform_int(rng, 0, 20);
    if (trial % 4 == 0) seq.subject = uniform_int(rng, 0, 10);
    if (trial % 5 == 0) seq.instance = uniform_int(rng, 0, 3);
    if (trial % 6 == 0) {
      for (auto& f : seq.frames) f.timestamp_index = f.timestamp_index * 3 + 7;
      for (int f = 0; f < seq.frame_count(); ++f) seq.frame_labels.push_back(uniform_int(rng, -1, 3));
    }
    const auto path = dir / ("s" + std::to_string(trial) + ".seq");
    save_canonical(seq, path);
    CHECK(load_canonical(path, topo) == seq);
  }
}

TEST_CASE("canonical format rejects mismatches") {
  Rng rng(2);
  const auto seq = random_sequence(rng, kinect20_topology(), 2);
  const std::string text = format_canonical(seq);
  CHECK_THROWS_AS(parse_canonical(text, chain_topology(20)), Error);
  CHECK_THROWS_AS(parse_canonical("skelact-sequence 2\n", kinect20_topology()), Error);
  CHECK_THROWS_AS(parse_canonical(text.substr(0, text.rfind('\n', text.size() - 2) + 1), kinect20_topology()), Error);
  std::string short_row = text;
  short_row.erase(short_row.rfind(' '), short_row.size() - short_row.rfind(' ') - 1);
  CHECK_THROWS_AS(parse_canonical(short_row, kinect20_topology()), Error);
}

TEST_CASE("manifest round trip and validation") {
  DatasetManifest m{"kinect20", {{"a.seq", 1, 2, 3}, {"b.seq", 4, 5, 6}}};
  const auto back = parse_manifest(manifest_to_json(m));
  CHECK(back.topology == "kinect20");
  CHECK(back.entries == m.entries);
  m.entries.push_back({"a.seq", 1, 1, 1});
  CHECK_THROWS_AS(m.validate(), Error);
  try {
    parse_manifest(R"({"version": 1, "entries": []})");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("'topology'") != std::string::npos);
  }
}

TEST_CASE("split examples") {
  DatasetManifest m{"kinect20", {{"a01_s03_e01.seq", 1, 3, 1}, {"a01_s07_e01.seq", 1, 7, 1}, {"a02_s03_e02_skeleton3D.txt", 2, 3, 2}}};
  SplitSpec spec{{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}};
  const auto s = make_split(m, spec, default_msr_exclusions());
  REQUIRE(s.train.size() == 1);
  CHECK(s.train[0].subject == 3);
  REQUIRE(s.test.size() == 1);
  CHECK(s.test[0].subject == 7);
  CHECK(s.dropped.empty());
  CHECK_THROWS_AS(make_split(m, SplitSpec{{1, 2}, {2, 3}}), Error);
  CHECK(parse_split(R"({"train_subjects": [1, 3], "test_subjects": [2]})").test_subjects == std::set<int>{2});
}

TEST_CASE("split partitions the manifest") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    DatasetManifest m{"kinect20", {}};
    std::set<std::string> exclusions;
    for (int i = 0; i < 100; ++i) {
      const std::string name = "e" + std::to_string(i) + ".seq";
      m.entries.push_back({name, uniform_int(rng, 0, 5), uniform_int(rng, 1, 10), i});
      if (uniform(rng, 0, 1) < 0.1) exclusions.insert("e" + std::to_string(i));
    }
    const auto s = make_split(m, SplitSpec{{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}}, exclusions);
    CHECK(s.train.size() + s.test.size() + s.dropped.size() + exclusions.size() == 100);
    std::set<std::string> seen;
    for (const auto* list : {&s.train, &s.test, &s.dropped})
      for (const auto& e : *list) CHECK(seen.insert(e.path).second);
    for (const auto& e : s.train) CHECK(e.subject <= 5);
    for (const auto& e : s.test) CHECK(e.subject >= 6);
  }
}

TEST_CASE("load_entries attaches manifest metadata") {
  TempDir dir("entries");
  Rng rng(3);
  save_canonical(random_sequence(rng, kinect20_topology(), 4), dir / "x.seq");
  const auto seqs = load_entries({{"x.seq", 3, 4, 5}}, dir.path(), kinect20_topology());
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].label == 3);
  CHECK(seqs[0].subject == 4);
  CHECK(seqs[0].instance == 5);
  CHECK_THROWS_AS(load_entries({{"missing.seq", 0, 0, 0}}, dir.path(), kinect20_topology()), Error);
}
