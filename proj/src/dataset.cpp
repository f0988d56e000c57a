#include "skelact/dataset.hpp"

#include <charconv>
#include <regex>
#include <sstream>

#include "io_util.hpp"
#include "skelact/error.hpp"

namespace skelact {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

bool blank(std::string_view line) { return split_ws(line).empty(); }

double to_double(std::string_view tok, std::string_view where) {
  double v = 0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error(std::string(where) + ": not a number: '" + std::string(tok) + "'");
  return v;
}

template <typename Int>
Int to_int(std::string_view tok, std::string_view where) {
  Int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error(std::string(where) + ": not an integer: '" + std::string(tok) + "'");
  return v;
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  out.append(buf, res.ptr);
}

}  // namespace

void LoaderLayout::validate() const {
  auto bad = [&](const std::string& msg) { throw Error("layout '" + name + "': " + msg); };
  if (header_lines < 0) bad("header_lines < 0");
  if (joints < 1) bad("joints < 1");
  if (rows_per_frame < 1) bad("rows_per_frame < 1");
  if (values_per_joint < 3) bad("values_per_joint < 3");
  if (leading_columns < 0 || leading_columns >= columns) bad("leading_columns out of range");
  if ((columns - leading_columns) % values_per_joint != 0)
    bad("columns - leading_columns is not a multiple of values_per_joint");
  if (joints_per_row() * rows_per_frame != joints)
    bad("rows_per_frame * joints per row != joints");
  for (int c : {x_column, y_column, z_column})
    if (c < 0 || c >= values_per_joint) bad("coordinate column outside the joint group");
}

LoaderLayout parse_layout(std::string_view json_text) {
  using detail::need_as;
  const auto j = detail::parse_json(json_text, "layout");
  LoaderLayout l;
  l.name = need_as<std::string>(j, "name", "layout");
  l.topology = need_as<std::string>(j, "topology", "layout");
  l.header_lines = need_as<int>(j, "header_lines", "layout");
  l.joints = need_as<int>(j, "joints", "layout");
  l.rows_per_frame = need_as<int>(j, "rows_per_frame", "layout");
  l.columns = need_as<int>(j, "columns", "layout");
  l.leading_columns = need_as<int>(j, "leading_columns", "layout");
  l.values_per_joint = need_as<int>(j, "values_per_joint", "layout");
  l.x_column = need_as<int>(j, "x_column", "layout");
  l.y_column = need_as<int>(j, "y_column", "layout");
  l.z_column = need_as<int>(j, "z_column", "layout");
  l.validate();
  return l;
}

LoaderLayout load_layout(const std::filesystem::path& path) {
  return parse_layout(detail::read_file(path));
}

ActionSequence load_joint_text(const std::filesystem::path& path, const LoaderLayout& layout,
                               TopologyPtr topology) {
  layout.validate();
  if (!topology) throw Error("load_joint_text: no topology");
  if (topology->joint_count() != layout.joints)
    throw Error("load_joint_text: layout '" + layout.name + "' has " +
                std::to_string(layout.joints) + " joints, topology '" + topology->name() +
                "' has " + std::to_string(topology->joint_count()));

  const std::string text = detail::read_file(path);
  const auto lines = split_lines(text);
  const std::string where = path.filename().string();

  ActionSequence seq;
  seq.topology = std::move(topology);
  Eigen::Matrix3Xd current(3, layout.joints);
  int row_in_frame = 0;
  const int per_row = layout.joints_per_row();

  for (std::size_t ln = static_cast<std::size_t>(layout.header_lines); ln < lines.size(); ++ln) {
    const auto toks = split_ws(lines[ln]);
    if (toks.empty()) continue;
    const std::string at = where + " line " + std::to_string(ln + 1);
    if (static_cast<int>(toks.size()) != layout.columns)
      throw Error(at + ": expected " + std::to_string(layout.columns) + " columns, got " +
                  std::to_string(toks.size()));
    for (int k = 0; k < per_row; ++k) {
      const int joint = row_in_frame * per_row + k;
      const int base = layout.leading_columns + k * layout.values_per_joint;
      current(0, joint) = to_double(toks[base + layout.x_column], at);
      current(1, joint) = to_double(toks[base + layout.y_column], at);
      current(2, joint) = to_double(toks[base + layout.z_column], at);
    }
    if (++row_in_frame == layout.rows_per_frame) {
      seq.frames.push_back({current, static_cast<std::int64_t>(seq.frames.size())});
      row_in_frame = 0;
    }
  }
  if (row_in_frame != 0)
    throw Error(where + ": " + std::to_string(row_in_frame) +
                " trailing rows do not complete a frame of " +
                std::to_string(layout.rows_per_frame) + " rows");
  if (seq.frames.empty()) throw Error(where + ": no frames");
  seq.validate();
  return seq;
}

MsrName parse_msr_filename(std::string_view name) {
  static const std::regex kPattern(R"(^a(\d+)_s(\d+)_e(\d+).*$)");
  std::string s(name);
  if (auto slash = s.find_last_of("/\\"); slash != std::string::npos) s = s.substr(slash + 1);
  std::smatch m;
  if (!std::regex_match(s, m, kPattern))
    throw Error("'" + std::string(name) + "' does not match a<AA>_s<SS>_e<EE>");
  return {std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
}

const std::set<std::string>& default_msr_exclusions() {
  static const std::set<std::string> kList{
      "a02_s03_e02_skeleton3D", "a04_s03_e01_skeleton3D", "a07_s04_e01_skeleton3D",
      "a13_s09_e01_skeleton3D", "a13_s09_e02_skeleton3D", "a13_s09_e03_skeleton3D",
      "a14_s03_e01_skeleton3D", "a20_s07_e01_skeleton3D", "a20_s07_e03_skeleton3D",
      "a20_s10_e03_skeleton3D"};
  return kList;
}

std::string format_canonical(const ActionSequence& seq) {
  seq.validate();
  std::string out;
  out += "skelact-sequence 1\n";
  out += "topology " + seq.topology->name() + "\n";
  out += "joints " + std::to_string(seq.topology->joint_count()) + "\n";
  out += "frames " + std::to_string(seq.frames.size()) + "\n";
  if (seq.label) out += "label " + std::to_string(*seq.label) + "\n";
  if (seq.subject) out += "subject " + std::to_string(*seq.subject) + "\n";
  if (seq.instance) out += "instance " + std::to_string(*seq.instance) + "\n";
  bool contiguous = true;
  for (std::size_t f = 0; f < seq.frames.size(); ++f)
    contiguous = contiguous && seq.frames[f].timestamp_index == static_cast<std::int64_t>(f);
  if (!contiguous) {
    out += "timestamps";
    for (const Frame& fr : seq.frames) out += " " + std::to_string(fr.timestamp_index);
    out += "\n";
  }
  if (!seq.frame_labels.empty()) {
    out += "frame_labels";
    for (Label l : seq.frame_labels) out += " " + std::to_string(l);
    out += "\n";
  }
  out += "data\n";
  for (const Frame& fr : seq.frames) {
    for (int j = 0; j < fr.positions.cols(); ++j)
      for (int c = 0; c < 3; ++c) {
        if (j > 0 || c > 0) out += ' ';
        append_double(out, fr.positions(c, j));
      }
    out += '\n';
  }
  return out;
}

ActionSequence parse_canonical(std::string_view text, TopologyPtr topology) {
  if (!topology) throw Error("canonical: no topology");
  const auto lines = split_lines(text);
  std::size_t ln = 0;
  auto next_tokens = [&]() {
    while (ln < lines.size() && blank(lines[ln])) ++ln;
    if (ln >= lines.size()) throw Error("canonical: unexpected end of file");
    return split_ws(lines[ln++]);
  };
  auto where = [&]() { return "canonical:" + std::to_string(ln); };

  auto magic = next_tokens();
  if (magic.size() != 2 || magic[0] != "skelact-sequence")
    throw Error("canonical: not a skelact sequence file");
  if (magic[1] != "1")
    throw Error("canonical: unsupported format version " + std::string(magic[1]));

  ActionSequence seq;
  seq.topology = topology;
  long long joints = -1, frames = -1;
  std::vector<std::int64_t> stamps;
  std::string topo_name;
  for (;;) {
    auto toks = next_tokens();
    const auto key = toks[0];
    if (key == "data") break;
    if (toks.size() < 2 && key != "timestamps" && key != "frame_labels")
      throw Error(where() + ": header '" + std::string(key) + "' has no value");
    if (key == "topology") {
      topo_name = std::string(toks[1]);
    } else if (key == "joints") {
      joints = to_int<long long>(toks[1], where());
    } else if (key == "frames") {
      frames = to_int<long long>(toks[1], where());
    } else if (key == "label") {
      seq.label = to_int<int>(toks[1], where());
    } else if (key == "subject") {
      seq.subject = to_int<int>(toks[1], where());
    } else if (key == "instance") {
      seq.instance = to_int<int>(toks[1], where());
    } else if (key == "timestamps") {
      for (std::size_t i = 1; i < toks.size(); ++i)
        stamps.push_back(to_int<std::int64_t>(toks[i], where()));
    } else if (key == "frame_labels") {
      for (std::size_t i = 1; i < toks.size(); ++i)
        seq.frame_labels.push_back(to_int<int>(toks[i], where()));
    } else {
      throw Error(where() + ": unknown header '" + std::string(key) + "'");
    }
  }
  if (joints < 0 || frames < 0) throw Error("canonical: header lacks joints or frames");
  if (topo_name != topology->name())
    throw Error("canonical: file topology '" + topo_name + "' differs from '" + topology->name() +
                "'");
  if (joints != topology->joint_count())
    throw Error("canonical: joint count " + std::to_string(joints) + " differs from topology");
  if (!stamps.empty() && static_cast<long long>(stamps.size()) != frames)
    throw Error("canonical: timestamps count differs from frames");

  for (long long f = 0; f < frames; ++f) {
    auto toks = next_tokens();
    if (static_cast<long long>(toks.size()) != 3 * joints)
      throw Error(where() + ": expected " + std::to_string(3 * joints) + " values, got " +
                  std::to_string(toks.size()));
    Frame fr;
    fr.positions.resize(3, joints);
    for (long long j = 0; j < joints; ++j)
      for (int c = 0; c < 3; ++c) fr.positions(c, j) = to_double(toks[3 * j + c], where());
    fr.timestamp_index = stamps.empty() ? f : stamps[static_cast<std::size_t>(f)];
    seq.frames.push_back(std::move(fr));
  }
  while (ln < lines.size())
    if (!blank(lines[ln++])) throw Error(where() + ": trailing data after declared frames");
  seq.validate();
  return seq;
}

void save_canonical(const ActionSequence& seq, const std::filesystem::path& path) {
  detail::write_file(path, format_canonical(seq));
}

ActionSequence load_canonical(const std::filesystem::path& path, TopologyPtr topology) {
  try {
    return parse_canonical(detail::read_file(path), std::move(topology));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void DatasetManifest::validate() const {
  std::set<std::string> paths;
  for (const auto& e : entries) {
    if (!paths.insert(e.path).second) throw Error("manifest: duplicate path " + e.path);
    if (e.label < 0 || e.subject < 0 || e.instance < 0)
      throw Error("manifest: negative identifier in entry " + e.path);
  }
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  detail::Json j;
  j["format"] = "skelact-manifest";
  j["version"] = 1;
  j["topology"] = manifest.topology;
  auto arr = detail::Json::array();
  for (const auto& e : manifest.entries)
    arr.push_back({{"path", e.path}, {"label", e.label}, {"subject", e.subject},
                   {"instance", e.instance}});
  j["entries"] = arr;
  return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(std::string_view json_text) {
  using detail::need_as;
  const auto j = detail::parse_json(json_text, "manifest");
  if (need_as<int>(j, "version", "manifest") != 1) throw Error("manifest: unsupported version");
  DatasetManifest m;
  m.topology = need_as<std::string>(j, "topology", "manifest");
  for (const auto& e : detail::need(j, "entries", "manifest"))
    m.entries.push_back({need_as<std::string>(e, "path", "manifest entry"),
                         need_as<int>(e, "label", "manifest entry"),
                         need_as<int>(e, "subject", "manifest entry"),
                         need_as<int>(e, "instance", "manifest entry")});
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(detail::read_file(path));
}

void SplitSpec::validate() const {
  if (train_subjects.empty() || test_subjects.empty())
    throw Error("split: train and test subject sets must both be nonempty");
  for (int s : train_subjects)
    if (test_subjects.count(s))
      throw Error("split: subject " + std::to_string(s) + " is in both train and test");
}

SplitSpec parse_split(std::string_view json_text) {
  using detail::need_as;
  const auto j = detail::parse_json(json_text, "split");
  SplitSpec s;
  for (int v : need_as<std::vector<int>>(j, "train_subjects", "split")) s.train_subjects.insert(v);
  for (int v : need_as<std::vector<int>>(j, "test_subjects", "split")) s.test_subjects.insert(v);
  s.validate();
  return s;
}

Split make_split(const DatasetManifest& manifest, const SplitSpec& spec,
                 const std::set<std::string>& exclusions) {
  spec.validate();
  Split out;
  for (const auto& e : manifest.entries) {
    const std::filesystem::path p(e.path);
    if (exclusions.count(p.stem().string()) || exclusions.count(p.filename().string())) continue;
    if (spec.train_subjects.count(e.subject))
      out.train.push_back(e);
    else if (spec.test_subjects.count(e.subject))
      out.test.push_back(e);
    else
      out.dropped.push_back(e);
  }
  return out;
}

std::vector<ActionSequence> load_entries(const std::vector<ManifestEntry>& entries,
                                         const std::filesystem::path& base_dir,
                                         TopologyPtr topology) {
  std::vector<ActionSequence> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = base_dir / p;
    ActionSequence seq = load_canonical(p, topology);
    seq.label = e.label;
    seq.subject = e.subject;
    seq.instance = e.instance;
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace skelact
