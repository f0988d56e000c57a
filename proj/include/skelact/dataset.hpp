#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "skelact/skeleton.hpp"

namespace skelact {

/// Describes a whitespace-separated joint text file. Each frame spans
/// `rows_per_frame` rows; each row holds `columns` values, the first
/// `leading_columns` of which are skipped, followed by consecutive groups of
/// `values_per_joint` values with x/y/z at the given offsets in each group.
struct LoaderLayout {
  std::string name;
  std::string topology;  // topology name the joint order refers to
  int header_lines = 0;
  int joints = 20;
  int rows_per_frame = 20;
  int columns = 4;
  int leading_columns = 0;
  int values_per_joint = 4;
  int x_column = 0;
  int y_column = 1;
  int z_column = 2;

  int joints_per_row() const { return (columns - leading_columns) / values_per_joint; }
  void validate() const;
};

LoaderLayout parse_layout(std::string_view json_text);
LoaderLayout load_layout(const std::filesystem::path& path);

/// Reads a joint text file; frames come back in file order with timestamps
/// 0..F-1. Blank lines are ignored.
ActionSequence load_joint_text(const std::filesystem::path& path, const LoaderLayout& layout,
                               TopologyPtr topology);

struct MsrName {
  int action = 0;
  int subject = 0;
  int instance = 0;
  friend bool operator==(const MsrName&, const MsrName&) = default;
};

/// Parses names of the form a<AA>_s<SS>_e<EE>..., e.g. a02_s03_e02_skeleton3D.txt.
MsrName parse_msr_filename(std::string_view name);

/// The MSR-Action3D recordings known to be corrupted (file stems).
const std::set<std::string>& default_msr_exclusions();

/// Canonical interchange format, version 1:
///
///   skelact-sequence 1
///   topology <name>
///   joints <J>
///   frames <F>
///   [label <int>] [subject <int>] [instance <int>]
///   [timestamps <t0> ... <tF-1>]      (only when not 0..F-1)
///   [frame_labels <l0> ... <lF-1>]
///   data
///   <x y z> * J                        (one line per frame)
///
/// Coordinates are written in scientific form with 17 significant digits, so
/// a load of a saved file reproduces every double exactly.
std::string format_canonical(const ActionSequence& seq);
ActionSequence parse_canonical(std::string_view text, TopologyPtr topology);
void save_canonical(const ActionSequence& seq, const std::filesystem::path& path);
ActionSequence load_canonical(const std::filesystem::path& path, TopologyPtr topology);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory, or absolute
  Label label = 0;
  int subject = 0;
  int instance = 0;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::string topology;
  std::vector<ManifestEntry> entries;

  void validate() const;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view json_text);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct SplitSpec {
  std::set<int> train_subjects;
  std::set<int> test_subjects;

  void validate() const;
};

SplitSpec parse_split(std::string_view json_text);

struct Split {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
  std::vector<ManifestEntry> dropped;  // subject in neither set
};

/// Partitions entries by subject. Entries whose file stem is in `exclusions`
/// appear nowhere; entries of unlisted subjects land in `dropped`.
Split make_split(const DatasetManifest& manifest, const SplitSpec& spec,
                 const std::set<std::string>& exclusions = {});

/// Loads every entry of `entries` (paths resolved against `base_dir`) as a
/// canonical sequence with the manifest's label/subject/instance attached.
std::vector<ActionSequence> load_entries(const std::vector<ManifestEntry>& entries,
                                         const std::filesystem::path& base_dir,
                                         TopologyPtr topology);

}  // namespace skelact
