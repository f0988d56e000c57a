#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skelact/commands.hpp"
#include "support.hpp"

using namespace skelact;
using namespace skelact::test;
using Json = nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string msr_file(double base) {
  std::string s;
  for (int f = 0; f < 3; ++f)
    for (int j = 0; j < 20; ++j)
      s += std::to_string(base + j * 0.1 + f) + " " + std::to_string(base - j * 0.05) + " " +
           std::to_string(2 + 0.01 * j) + " 1\n";
  return s;
}

const std::string kLayout = std::string(SKELACT_DATA_DIR) + "/layouts/msr_action3d.json";

/// Small synthetic dataset plus detection streams, written once.
const TempDir& synthetic_dir() {
  static const TempDir dir("cli_synth");
  static const bool written = [] {
    const auto r = cli({"synth", "--output", dir.path().string(), "--actions", "2", "--subjects", "1,2,3,4",
                        "--instances", "3", "--streams", "2", "--stream-length", "3", "--seed", "5"});
    REQUIRE(r.code == 0);
    return true;
  }();
  (void)written;
  return dir;
}

std::vector<std::string> train_args(const std::filesystem::path& bundle) {
  return {"train", "--manifest", (synthetic_dir() / "manifest.json").string(), "--train-subjects", "1,2",
          "--bundle", bundle.string(), "--max-rows", "400", "--restarts", "2", "--seed", "3"};
}

}  // namespace

TEST_CASE("ingest converts every valid file") {
  TempDir in("ingest_in"), out("ingest_out");
  for (const char* name : {"a01_s01_e01_skeleton3D.txt", "a02_s01_e01_skeleton3D.txt", "a01_s06_e02_skeleton3D.txt"})
    std::ofstream(in / name) << msr_file(name[2] - '0');
  const auto r = cli({"ingest", "--input", in.path().string(), "--layout", kLayout, "--output", out.path().string()});
  CHECK(r.code == 0);
  const auto m = Json::parse(slurp(out / "manifest.json"));
  CHECK(m["entries"].size() == 3);
  CHECK(m["failures"].empty());
  CHECK(std::filesystem::exists(out / "a01_s06_e02_skeleton3D.seq"));
}

TEST_CASE("ingest skips excluded recordings and lists failures") {
  TempDir in("ingest_in"), out("ingest_out");
  std::ofstream(in / "a01_s01_e01_skeleton3D.txt") << msr_file(0);
  std::ofstream(in / "a02_s03_e02_skeleton3D.txt") << msr_file(1);
  std::ofstream(in / "a03_s01_e01_skeleton3D.txt") << "garbage\n";
  const auto r = cli({"ingest", "--input", in.path().string(), "--layout", kLayout, "--output", out.path().string()});
  CHECK(r.code == 0);
  const auto m = Json::parse(slurp(out / "manifest.json"));
  REQUIRE(m["entries"].size() == 1);
  CHECK(m["entries"][0]["path"] == "a01_s01_e01_skeleton3D.seq");
  CHECK(m["excluded"] == Json::array({"a02_s03_e02_skeleton3D.txt"}));
  CHECK(m["failures"].size() == 1);
  CHECK(r.err.find("a03_s01_e01") != std::string::npos);
}

TEST_CASE("ingest of an empty directory fails") {
  TempDir in("ingest_in"), out("ingest_out");
  const auto r = cli({"ingest", "--input", in.path().string(), "--layout", kLayout, "--output", out.path().string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("train writes a bundle and a monotone log") {
  TempDir work("train");
  const auto r = cli(train_args(work / "m.bundle"));
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(work / "m.bundle"));
  const auto log = Json::parse(slurp(work / "m.bundle.log.json"));
  REQUIRE(log["hmms"].size() == 2);
  for (const auto& h : log["hmms"])
    for (const auto& restart : h["restarts"]) {
      const auto ll = restart["log_likelihoods"].get<std::vector<double>>();
      REQUIRE(!ll.empty());
      // Emission smoothing perturbs each M-step by at most a few 1e-6 nats per symbol.
      for (std::size_t k = 1; k < ll.size(); ++k) CHECK(ll[k] >= ll[k - 1] - 1e-3);
    }

  const auto again = cli(train_args(work / "n.bundle"));
  REQUIRE(again.code == 0);
  CHECK(slurp(work / "m.bundle") == slurp(work / "n.bundle"));
}

TEST_CASE("train log is exactly monotone without smoothing") {
  TempDir work("train");
  auto args = train_args(work / "m.bundle");
  args.insert(args.end(), {"--smoothing", "0"});
  REQUIRE(cli(args).code == 0);
  const auto log = Json::parse(slurp(work / "m.bundle.log.json"));
  for (const auto& h : log["hmms"])
    for (const auto& restart : h["restarts"]) {
      const auto ll = restart["log_likelihoods"].get<std::vector<double>>();
      for (std::size_t k = 1; k < ll.size(); ++k) CHECK(ll[k] >= ll[k - 1] - 1e-8);
    }
}

TEST_CASE("train reports a missing config key") {
  TempDir work("train");
  auto j = Json::parse(slurp(std::filesystem::path(SKELACT_DATA_DIR) / "../configs/default.json"));
  j["hmm"].erase("restarts");
  std::ofstream(work / "cfg.json") << j.dump(2);
  auto args = train_args(work / "m.bundle");
  args.insert(args.end(), {"--config", (work / "cfg.json").string()});
  const auto r = cli(args);
  CHECK(r.code == 1);
  CHECK(r.err.find("'restarts'") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(work / "m.bundle"));
}

TEST_CASE("train rejects a topology mismatch") {
  TempDir work("train");
  auto args = train_args(work / "m.bundle");
  args.insert(args.end(), {"--topology", std::string(SKELACT_DATA_DIR) + "/topology/msr20.json"});
  const auto r = cli(args);
  CHECK(r.code == 1);
  CHECK(r.err.find("topology") != std::string::npos);
}

TEST_CASE("evaluate recognition") {
  TempDir work("eval");
  REQUIRE(cli(train_args(work / "m.bundle")).code == 0);
  const auto r = cli({"evaluate", "--bundle", (work / "m.bundle").string(), "--manifest",
                      (synthetic_dir() / "manifest.json").string(), "--test-subjects", "3,4", "--mode", "recognition",
                      "--report", (work / "r.json").string(), "--table", (work / "r.txt").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == slurp(work / "r.txt"));
  const auto rep = Json::parse(slurp(work / "r.json"))["recognition"];
  CHECK(rep["total"] == 12);
  CHECK(rep["overall_accuracy"].get<double>() == 1.0);
  long trace = 0, sum = 0;
  const auto confusion = rep["confusion"];
  for (std::size_t i = 0; i < confusion.size(); ++i) {
    long row = 0;
    for (std::size_t k = 0; k < confusion[i].size(); ++k) row += confusion[i][k].get<long>();
    CHECK(row == rep["per_class"][i]["count"].get<long>());
    trace += confusion[i][i].get<long>();
    sum += row;
  }
  CHECK(double(trace) / double(sum) == rep["overall_accuracy"].get<double>());
  const auto meta = Json::parse(slurp(work / "r.json"))["metadata"];
  CHECK(meta["seed"] == 3);
  CHECK(meta["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("detect and evaluate detection") {
  TempDir work("detect");
  auto args = train_args(work / "m.bundle");
  args.insert(args.end(), {"--purpose", "detection"});
  REQUIRE(cli(args).code == 0);
  const auto d = cli({"detect", "--bundle", (work / "m.bundle").string(), "--input",
                      (synthetic_dir() / "stream_0.seq").string(), "--window", "3"});
  REQUIRE(d.code == 0);
  CHECK(d.out.rfind("# frames\n0\t", 0) == 0);
  CHECK(d.out.find("# segments\n") != std::string::npos);

  const auto r = cli({"evaluate", "--bundle", (work / "m.bundle").string(), "--manifest",
                      (synthetic_dir() / "streams.json").string(), "--mode", "detection", "--report",
                      (work / "d.json").string()});
  REQUIRE(r.code == 0);
  const auto rep = Json::parse(slurp(work / "d.json"))["detection"];
  CHECK(rep.contains("micro_f1"));
  CHECK(rep["streams"] == 2);
  CHECK(rep["micro_f1"].get<double>() >= 0.0);
}

TEST_CASE("recognize prints one line per file") {
  TempDir work("recognize");
  REQUIRE(cli(train_args(work / "m.bundle")).code == 0);
  const auto r = cli({"recognize", "--bundle", (work / "m.bundle").string(),
                      (synthetic_dir() / "a0_s3_e1.seq").string(), (synthetic_dir() / "a1_s4_e2.seq").string()});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
  CHECK(r.out.find("a0_s3_e1.seq\t0\t") != std::string::npos);
  CHECK(r.out.find("a1_s4_e2.seq\t1\t") != std::string::npos);
}

TEST_CASE("usage errors exit nonzero") {
  CHECK(cli({}).code != 0);
  CHECK(cli({"frobnicate"}).code != 0);
  CHECK(cli({"train", "--bundle", "x"}).code != 0);
  CHECK(cli({"--help"}).code == 0);
}
