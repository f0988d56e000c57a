#include "skelact/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "io_util.hpp"

namespace skelact {

using detail::Json;

std::string hash_hex(std::string_view bytes) { return detail::hex64(detail::fnv1a(bytes)); }

RecognitionReport score_recognition(std::span<const Label> model_labels, std::span<const Label> truth,
                                    std::span<const std::optional<Label>> predicted) {
  if (truth.size() != predicted.size())
    throw Error("score_recognition: " + std::to_string(truth.size()) + " truth vs " +
                std::to_string(predicted.size()) + " predictions");
  std::set<Label> classes(model_labels.begin(), model_labels.end());
  classes.insert(truth.begin(), truth.end());
  for (const auto& p : predicted)
    if (p) classes.insert(*p);
  RecognitionReport r;
  r.classes.assign(classes.begin(), classes.end());
  const std::size_t k = r.classes.size();
  auto index = [&](Label l) {
    return static_cast<std::size_t>(std::lower_bound(r.classes.begin(), r.classes.end(), l) - r.classes.begin());
  };
  r.confusion.assign(k, std::vector<long>(k + 1, 0));
  r.class_counts.assign(k, 0);
  for (std::size_t n = 0; n < truth.size(); ++n) {
    const std::size_t row = index(truth[n]);
    ++r.class_counts[row];
    ++r.confusion[row][predicted[n] ? index(*predicted[n]) : k];
    if (predicted[n] && *predicted[n] == truth[n]) ++r.correct;
  }
  r.total = static_cast<long>(truth.size());
  for (std::size_t i = 0; i < k; ++i)
    r.class_accuracy.push_back(r.class_counts[i] > 0 ? std::optional<double>(static_cast<double>(r.confusion[i][i]) /
                                                                             static_cast<double>(r.class_counts[i]))
                                                     : std::nullopt);
  r.overall_accuracy = r.total > 0 ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
  return r;
}

namespace {

Json prf_json(const Prf& p) {
  return {{"precision", p.precision},
          {"recall", p.recall},
          {"f1", p.f1},
          {"true_positives", p.true_positives},
          {"false_positives", p.false_positives},
          {"false_negatives", p.false_negatives}};
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) line += (c ? "  " : "") + pad(row[c], width[c]);
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
  Json j;
  const RunMetadata& m = report.metadata;
  j["metadata"] = {{"mode", m.mode},
                   {"config_hash", m.config_hash},
                   {"seed", m.seed},
                   {"manifest_hash", m.manifest_hash},
                   {"bundle_hash", m.bundle_hash}};
  if (report.recognition) {
    const RecognitionReport& r = *report.recognition;
    Json per = Json::array();
    for (std::size_t i = 0; i < r.classes.size(); ++i)
      per.push_back({{"label", r.classes[i]},
                     {"count", r.class_counts[i]},
                     {"accuracy", r.class_accuracy[i] ? Json(*r.class_accuracy[i]) : Json(nullptr)}});
    j["recognition"] = {{"overall_accuracy", r.overall_accuracy},
                        {"correct", r.correct},
                        {"total", r.total},
                        {"classes", r.classes},
                        {"per_class", per},
                        {"confusion", r.confusion},
                        {"confusion_columns", "classes then rejected"}};
  }
  if (report.detection) {
    const DetectionReport& d = *report.detection;
    Json per = Json::array();
    for (const auto& [label, p] : d.frames.per_class) {
      Json e = prf_json(p);
      e["label"] = label;
      per.push_back(e);
    }
    j["detection"] = {{"streams", d.streams},
                      {"frames", d.frame_count},
                      {"micro", prf_json(d.frames.micro)},
                      {"micro_f1", d.frames.micro.f1},
                      {"per_class", per},
                      {"segments", prf_json(d.segments)}};
  }
  return j.dump(2) + "\n";
}

std::string report_to_table(const EvaluationReport& report) {
  const RunMetadata& m = report.metadata;
  std::string out = "mode " + m.mode + "  seed " + std::to_string(m.seed) + "  config " + m.config_hash +
                    "  manifest " + m.manifest_hash + "\n\n";
  if (report.recognition) {
    const RecognitionReport& r = *report.recognition;
    std::vector<std::vector<std::string>> rows{{"class", "count", "accuracy"}};
    for (std::size_t i = 0; i < r.classes.size(); ++i)
      rows.push_back({std::to_string(r.classes[i]), std::to_string(r.class_counts[i]),
                      r.class_accuracy[i] ? fixed(*r.class_accuracy[i]) : "-"});
    rows.push_back({"overall", std::to_string(r.total), fixed(r.overall_accuracy)});
    out += render(rows) + "\nconfusion (rows truth, columns predicted)\n";
    std::vector<std::vector<std::string>> conf{{""}};
    for (Label l : r.classes) conf[0].push_back(std::to_string(l));
    conf[0].push_back("rejected");
    for (std::size_t i = 0; i < r.classes.size(); ++i) {
      std::vector<std::string> row{std::to_string(r.classes[i])};
      for (long c : r.confusion[i]) row.push_back(std::to_string(c));
      conf.push_back(row);
    }
    out += render(conf);
  }
  if (report.detection) {
    const DetectionReport& d = *report.detection;
    std::vector<std::vector<std::string>> rows{{"class", "precision", "recall", "f1"}};
    for (const auto& [label, p] : d.frames.per_class)
      rows.push_back({std::to_string(label), fixed(p.precision), fixed(p.recall), fixed(p.f1)});
    const Prf& mi = d.frames.micro;
    rows.push_back({"micro", fixed(mi.precision), fixed(mi.recall), fixed(mi.f1)});
    rows.push_back({"segments", fixed(d.segments.precision), fixed(d.segments.recall), fixed(d.segments.f1)});
    out += "streams " + std::to_string(d.streams) + "  frames " + std::to_string(d.frame_count) + "\n" + render(rows);
  }
  return out;
}

}  // namespace skelact
