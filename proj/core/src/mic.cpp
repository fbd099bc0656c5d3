#include "miceval/mic.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "miceval/errors.hpp"
#include "miceval/stats.hpp"

namespace miceval::mic {

using nlohmann::ordered_json;

MicTable build_mic_table(
    std::span<const annotate::SentenceAnnotation> annotations,
    std::size_t threshold, std::string model_id, std::string dataset_id,
    corpus::Split split) {
  MicTable table;
  table.model_id = std::move(model_id);
  table.dataset_id = std::move(dataset_id);
  table.split = split;
  table.threshold = threshold;

  std::map<std::string, std::vector<double>> confidences;
  for (const auto& a : annotations) {
    if (a.state == annotate::MarkerState::multi_discarded)
      throw ValidationError("build_mic_table: multi_discarded sentence present");
    if (!a.confidence)
      throw ValidationError("build_mic_table: sentence without confidence");
    confidences[a.marker].push_back(*a.confidence);
  }
  if (confidences.empty())
    spdlog::warn("build_mic_table: no annotations for {}/{}", table.model_id,
                 table.dataset_id);

  for (const auto& [marker, values] : confidences) {
    if (values.size() < threshold) continue;
    MicEntry e;
    e.marker = marker;
    e.mic = stats::mean(values);
    e.support = values.size();
    e.std_dev = stats::population_std(values);
    table.entries.emplace(marker, std::move(e));
  }
  return table;
}

std::set<std::string> shared_markers(std::span<const MicTable> tables) {
  if (tables.size() < 2)
    throw ValidationError("shared_markers requires >= 2 tables");
  std::set<std::string> shared;
  for (const auto& [marker, _] : tables.front().entries) shared.insert(marker);
  for (std::size_t i = 1; i < tables.size(); ++i) {
    std::set<std::string> keep;
    for (const auto& m : shared)
      if (tables[i].contains(m)) keep.insert(m);
    shared = std::move(keep);
  }
  return shared;
}

MicTable exclude_no_hedge(const MicTable& table) {
  MicTable out = table;
  out.entries.erase(std::string(annotate::kNoHedge));
  return out;
}

namespace {

ordered_json entry_json(const MicTable& t, const MicEntry& e) {
  ordered_json j;
  j["model_id"] = t.model_id;
  j["dataset_id"] = t.dataset_id;
  j["split"] = corpus::to_string(t.split);
  j["T"] = t.threshold;
  j["marker"] = e.marker;
  j["mic"] = e.mic;
  j["support"] = e.support;
  j["std"] = e.std_dev;
  return j;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

}  // namespace

void save_tables_jsonl(std::span<const MicTable> tables,
                       const std::filesystem::path& path,
                       std::string_view meta_line) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write MIC table file: " + path.string());
  if (!meta_line.empty()) out << meta_line << '\n';
  for (const auto& t : tables)
    for (const auto& [_, e] : t.entries) out << entry_json(t, e).dump() << '\n';
}

void save_tables_csv(std::span<const MicTable> tables,
                     const std::filesystem::path& path,
                     std::string_view comment_line) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write MIC table file: " + path.string());
  if (!comment_line.empty()) out << comment_line << '\n';
  out << "model_id,dataset_id,split,T,marker,mic,support,std\n";
  for (const auto& t : tables) {
    for (const auto& [_, e] : t.entries) {
      out << csv_escape(t.model_id) << ',' << csv_escape(t.dataset_id) << ','
          << corpus::to_string(t.split) << ',' << t.threshold << ','
          << csv_escape(e.marker) << ',' << format_double(e.mic) << ','
          << e.support << ',' << format_double(e.std_dev) << '\n';
    }
  }
}

std::vector<MicTable> load_tables_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open MIC table file: " + path.string());
  std::map<std::tuple<std::string, std::string, std::string>, MicTable> tables;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " +
                       e.what());
    }
    if (j.value("kind", "") == "meta") continue;
    const auto key = std::make_tuple(j.at("model_id").get<std::string>(),
                                     j.at("dataset_id").get<std::string>(),
                                     j.at("split").get<std::string>());
    auto& t = tables[key];
    t.model_id = std::get<0>(key);
    t.dataset_id = std::get<1>(key);
    t.split = corpus::split_from_string(std::get<2>(key));
    t.threshold = j.at("T").get<std::size_t>();
    MicEntry e;
    e.marker = j.at("marker").get<std::string>();
    e.mic = j.at("mic").get<double>();
    e.support = j.at("support").get<std::size_t>();
    e.std_dev = j.at("std").get<double>();
    t.entries.emplace(e.marker, std::move(e));
  }
  std::vector<MicTable> out;
  out.reserve(tables.size());
  for (auto& [_, t] : tables) out.push_back(std::move(t));
  return out;
}

}  // namespace miceval::mic
