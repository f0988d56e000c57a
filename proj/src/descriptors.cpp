#include "skelact/descriptors.hpp"

#include <algorithm>
#include <array>

#include "io_util.hpp"
#include "skelact/calculus.hpp"
#include "skelact/transforms.hpp"

namespace skelact {

namespace {

constexpr std::string_view kCameraName = "CAMERA";

constexpr std::array<std::pair<DescriptorFamily, std::string_view>, 7> kFamilyNames{{
    {DescriptorFamily::Cartesian, "cartesian"},
    {DescriptorFamily::Angular, "angular"},
    {DescriptorFamily::Mixed, "mixed"},
    {DescriptorFamily::Centro, "centro"},
    {DescriptorFamily::RelaCentro, "rela_centro"},
    {DescriptorFamily::RelaCentroDct, "rela_centro_dct"},
    {DescriptorFamily::RelaCentroDctAmdf, "rela_centro_dct_amdf"},
}};

// Default angle table, grouped as arm, leg, symmetric, big-symmetric,
// hand-foot and camera-facing angles.
constexpr std::array<std::array<std::string_view, 3>, 35> kDefaultAngles{{
    {"ShoulderCenter", "ShoulderRight", "ElbowRight"},
    {"ShoulderRight", "ElbowRight", "WristRight"},
    {"ElbowRight", "WristRight", "HandRight"},
    {"ShoulderCenter", "ShoulderLeft", "ElbowLeft"},
    {"ShoulderLeft", "ElbowLeft", "WristLeft"},
    {"ElbowLeft", "WristLeft", "HandLeft"},
    {"HipCenter", "HipRight", "KneeRight"},
    {"HipRight", "KneeRight", "AnkleRight"},
    {"KneeRight", "AnkleRight", "FootRight"},
    {"HipCenter", "HipLeft", "KneeLeft"},
    {"HipLeft", "KneeLeft", "AnkleLeft"},
    {"KneeLeft", "AnkleLeft", "FootLeft"},
    {"ShoulderLeft", "ShoulderCenter", "ShoulderRight"},
    {"Head", "ShoulderCenter", "Spine"},
    {"ShoulderCenter", "Spine", "HipCenter"},
    {"ElbowLeft", "ShoulderCenter", "ElbowRight"},
    {"WristLeft", "ShoulderCenter", "WristRight"},
    {"KneeLeft", "HipCenter", "KneeRight"},
    {"AnkleLeft", "HipCenter", "AnkleRight"},
    {"WristLeft", "HipCenter", "AnkleLeft"},
    {"WristRight", "HipCenter", "AnkleRight"},
    {"WristLeft", "HipCenter", "AnkleRight"},
    {"WristRight", "HipCenter", "AnkleLeft"},
    {"WristLeft", "CAMERA", "ShoulderCenter"},
    {"ElbowLeft", "CAMERA", "ShoulderCenter"},
    {"ShoulderLeft", "CAMERA", "ShoulderCenter"},
    {"AnkleLeft", "CAMERA", "HipCenter"},
    {"KneeLeft", "CAMERA", "HipCenter"},
    {"HipLeft", "CAMERA", "HipCenter"},
    {"WristRight", "CAMERA", "ShoulderCenter"},
    {"ElbowRight", "CAMERA", "ShoulderCenter"},
    {"ShoulderRight", "CAMERA", "ShoulderCenter"},
    {"AnkleRight", "CAMERA", "HipCenter"},
    {"KneeRight", "CAMERA", "HipCenter"},
    {"HipRight", "CAMERA", "HipCenter"},
}};

int resolve(std::string_view name, const SkeletonTopology& topology) {
  if (name == kCameraName) return kCamera;
  return topology.require(name);
}

std::string name_of(int joint, const SkeletonTopology& topology) {
  return joint == kCamera ? std::string(kCameraName) : topology.joint_names().at(joint);
}

Eigen::Vector3d point(const Eigen::Matrix3Xd& pos, int joint) {
  return joint == kCamera ? Eigen::Vector3d::Zero() : Eigen::Vector3d(pos.col(joint));
}

void require_frames(const ActionSequence& seq) {
  if (seq.frames.empty()) throw Error("descriptor extraction: sequence has no frames");
}

}  // namespace

void DescriptorKind::validate() const {
  if (dct_keep < 1) throw Error("descriptor: dct_keep must be >= 1");
  if (amdf_n < 1) throw Error("descriptor: amdf_n must be >= 1");
  if (amdf_n >= dct_keep) throw Error("descriptor: amdf_n must be < dct_keep");
}

std::string_view to_string(DescriptorFamily f) {
  for (const auto& [fam, name] : kFamilyNames)
    if (fam == f) return name;
  return "?";
}

DescriptorFamily parse_descriptor_family(std::string_view name) {
  for (const auto& [fam, n] : kFamilyNames)
    if (n == name) return fam;
  throw Error("unknown descriptor kind '" + std::string(name) + "'");
}

std::string_view to_string(CentroidMode m) {
  return m == CentroidMode::PerFrame ? "per_frame" : "whole_sequence";
}

CentroidMode parse_centroid_mode(std::string_view name) {
  if (name == "per_frame") return CentroidMode::PerFrame;
  if (name == "whole_sequence") return CentroidMode::WholeSequence;
  throw Error("unknown centroid mode '" + std::string(name) + "'");
}

void AngleTable::validate(const SkeletonTopology& topology) const {
  for (const AngleTriple& t : triples) {
    for (int j : {t.a, t.vertex, t.b})
      if (j != kCamera && (j < 0 || j >= topology.joint_count()))
        throw Error("angle table: joint index out of range");
    if (t.a == t.vertex || t.b == t.vertex)
      throw Error("angle table: triple (" + name_of(t.a, topology) + ", " +
                  name_of(t.vertex, topology) + ", " + name_of(t.b, topology) +
                  ") repeats its vertex");
  }
}

AngleTable AngleTable::without_camera() const {
  AngleTable out;
  for (const AngleTriple& t : triples)
    if (t.a != kCamera && t.vertex != kCamera && t.b != kCamera) out.triples.push_back(t);
  return out;
}

AngleTable default_angle_table(const SkeletonTopology& topology) {
  AngleTable table;
  for (const auto& [a, v, b] : kDefaultAngles)
    table.triples.push_back({resolve(a, topology), resolve(v, topology), resolve(b, topology)});
  table.validate(topology);
  return table;
}

AngleTable parse_angle_table(std::string_view json_text, const SkeletonTopology& topology) {
  const auto j = detail::parse_json(json_text, "angle table");
  const auto& list = detail::need(j, "angles", "angle table");
  AngleTable table;
  for (const auto& t : list) {
    if (!t.is_array() || t.size() != 3)
      throw Error("angle table: each entry must be [joint, vertex, joint]");
    table.triples.push_back({resolve(t[0].get<std::string>(), topology),
                             resolve(t[1].get<std::string>(), topology),
                             resolve(t[2].get<std::string>(), topology)});
  }
  table.validate(topology);
  return table;
}

AngleTable load_angle_table(const std::filesystem::path& path, const SkeletonTopology& topology) {
  return parse_angle_table(detail::read_file(path), topology);
}

std::string angle_table_to_json(const AngleTable& table, const SkeletonTopology& topology) {
  auto list = detail::Json::array();
  for (const AngleTriple& t : table.triples)
    list.push_back({name_of(t.a, topology), name_of(t.vertex, topology), name_of(t.b, topology)});
  detail::Json j;
  j["angles"] = list;
  return j.dump(2) + "\n";
}

Eigen::Matrix3Xd per_frame_centroid(const ActionSequence& seq) {
  require_frames(seq);
  Eigen::Matrix3Xd out(3, seq.frame_count());
  for (int f = 0; f < seq.frame_count(); ++f) out.col(f) = seq.frames[f].positions.rowwise().mean();
  return out;
}

Eigen::Vector3d sequence_centroid(const ActionSequence& seq) {
  require_frames(seq);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Index n = 0;
  for (const Frame& fr : seq.frames) {
    sum += fr.positions.rowwise().sum();
    n += fr.positions.cols();
  }
  return sum / static_cast<double>(n);
}

Eigen::MatrixXd cartesian_base(const ActionSequence& seq) {
  require_frames(seq);
  const int joints = seq.topology->joint_count();
  Eigen::MatrixXd out(3 * joints, seq.frame_count());
  for (int f = 0; f < seq.frame_count(); ++f)
    out.col(f) = seq.frames[f].positions.reshaped();
  return out;
}

Eigen::MatrixXd angular_base(const ActionSequence& seq, const AngleTable& angles) {
  require_frames(seq);
  const SkeletonTopology& topo = *seq.topology;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(angles.triples.size()), seq.frame_count());
  for (int f = 0; f < seq.frame_count(); ++f) {
    const auto& pos = seq.frames[f].positions;
    for (std::size_t i = 0; i < angles.triples.size(); ++i) {
      const AngleTriple& t = angles.triples[i];
      try {
        out(static_cast<Eigen::Index>(i), f) =
            vertex_angle(point(pos, t.a), point(pos, t.vertex), point(pos, t.b));
      } catch (const Error& e) {
        throw Error("frame " + std::to_string(f) + ", angle (" + name_of(t.a, topo) + ", " +
                    name_of(t.vertex, topo) + ", " + name_of(t.b, topo) + "): " + e.what());
      }
    }
  }
  return out;
}

Eigen::MatrixXd stats_calculus(const Eigen::MatrixXd& base) {
  const Eigen::Index d = base.rows(), frames = base.cols();
  Eigen::MatrixXd out(frames, 8 * d);
  Window5<double> w(d, 5);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int k = 0; k < 5; ++k)
      w.col(k) = base.col(std::clamp<Eigen::Index>(t + k - 2, 0, frames - 1));
    const auto m = window_stats(w);
    const auto c = window_calculus(w);
    auto row = out.row(t);
    row.segment(0 * d, d) = base.col(t).transpose();
    row.segment(1 * d, d) = m.mean.transpose();
    row.segment(2 * d, d) = m.variance.transpose();
    row.segment(3 * d, d) = m.skewness.transpose();
    row.segment(4 * d, d) = m.kurtosis.transpose();
    row.segment(5 * d, d) = c.velocity.transpose();
    row.segment(6 * d, d) = c.acceleration.transpose();
    row.segment(7 * d, d) = c.jerk.transpose();
  }
  return out;
}

namespace {

Eigen::MatrixXd centro_block(const ActionSequence& seq, CentroidMode mode) {
  if (mode == CentroidMode::PerFrame) return stats_calculus(per_frame_centroid(seq));
  const Eigen::Vector3d c = sequence_centroid(seq);
  return stats_calculus(c.replicate(1, seq.frame_count()));
}

Eigen::MatrixXd rela_centro(const ActionSequence& seq, CentroidMode mode) {
  const Eigen::MatrixXd centro = centro_block(seq, mode);
  const Eigen::MatrixXd cart = stats_calculus(cartesian_base(seq));
  Eigen::MatrixXd out(centro.rows(), centro.cols() + cart.cols());
  out << centro, cart;
  return out;
}

}  // namespace

DescriptorSequence extract(const ActionSequence& seq, const DescriptorKind& kind,
                           const AngleTable& angles) {
  kind.validate();
  require_frames(seq);
  if (!seq.topology) throw Error("descriptor extraction: sequence has no topology");

  DescriptorSequence out;
  out.kind = kind;
  switch (kind.family) {
    case DescriptorFamily::Cartesian:
      out.vectors = stats_calculus(cartesian_base(seq));
      break;
    case DescriptorFamily::Angular:
      out.vectors = stats_calculus(angular_base(seq, angles));
      break;
    case DescriptorFamily::Mixed: {
      const Eigen::MatrixXd cart = cartesian_base(seq);
      const Eigen::MatrixXd ang = angular_base(seq, angles);
      Eigen::MatrixXd mixed(cart.rows() + ang.rows(), cart.cols());
      mixed << cart, ang;
      out.vectors = stats_calculus(mixed);
      break;
    }
    case DescriptorFamily::Centro:
      out.vectors = centro_block(seq, kind.centroid);
      break;
    case DescriptorFamily::RelaCentro:
      out.vectors = rela_centro(seq, kind.centroid);
      break;
    case DescriptorFamily::RelaCentroDct:
    case DescriptorFamily::RelaCentroDctAmdf: {
      const Eigen::MatrixXd rc = rela_centro(seq, kind.centroid);
      const Eigen::Index keep = std::min<Eigen::Index>(kind.dct_keep, rc.cols());
      Eigen::MatrixXd dct(rc.rows(), keep);
      for (Eigen::Index t = 0; t < rc.rows(); ++t)
        dct.row(t) = dct_truncate(rc.row(t).transpose(), kind.dct_keep).transpose();
      if (kind.family == DescriptorFamily::RelaCentroDct) {
        out.vectors = std::move(dct);
        break;
      }
      if (keep < kind.amdf_n + 1)
        throw Error("descriptor: DCT vector of length " + std::to_string(keep) +
                    " is too short for AMDF at n = " + std::to_string(kind.amdf_n));
      out.vectors.resize(rc.rows(), keep - kind.amdf_n);
      for (Eigen::Index t = 0; t < dct.rows(); ++t)
        out.vectors.row(t) = amdf(dct.row(t).transpose(), kind.amdf_n).transpose();
      break;
    }
  }
  return out;
}

int descriptor_dimension(const DescriptorKind& kind, int joints, int angles) {
  const int rc = 8 * 3 + 8 * 3 * joints;
  switch (kind.family) {
    case DescriptorFamily::Cartesian: return 8 * 3 * joints;
    case DescriptorFamily::Angular: return 8 * angles;
    case DescriptorFamily::Mixed: return 8 * (3 * joints + angles);
    case DescriptorFamily::Centro: return 8 * 3;
    case DescriptorFamily::RelaCentro: return rc;
    case DescriptorFamily::RelaCentroDct: return std::min(kind.dct_keep, rc);
    case DescriptorFamily::RelaCentroDctAmdf: return std::min(kind.dct_keep, rc) - kind.amdf_n;
  }
  return 0;
}

}  // namespace skelact
