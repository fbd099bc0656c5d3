#include "miceval/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "miceval/errors.hpp"

namespace miceval::corpus {

using nlohmann::ordered_json;

std::string_view to_string(Split s) {
  return s == Split::train ? "train" : "test";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ParseError("unknown split: " + std::string(s));
}

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::qa: return "qa";
    case TaskKind::qa_unanswerable: return "qa_unanswerable";
    case TaskKind::qa_context: return "qa_context";
    case TaskKind::multiple_choice: return "multiple_choice";
    case TaskKind::nli: return "nli";
    case TaskKind::hallucination_detection: return "hallucination_detection";
  }
  return "qa";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "qa") return TaskKind::qa;
  if (s == "qa_unanswerable") return TaskKind::qa_unanswerable;
  if (s == "qa_context") return TaskKind::qa_context;
  if (s == "multiple_choice") return TaskKind::multiple_choice;
  if (s == "nli") return TaskKind::nli;
  if (s == "hallucination_detection") return TaskKind::hallucination_detection;
  throw ParseError("unknown task_kind: " + std::string(s));
}

void Corpus::build_index() const {
  if (!index_.empty() || queries.empty()) return;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    index_.emplace(QueryKey{q.dataset_id, q.split, q.query_id}, i);
  }
}

const QueryRecord* Corpus::find_query(const QueryKey& key) const {
  build_index();
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &queries[it->second];
}

const QueryRecord* Corpus::find_query(const ResponseRecord& r) const {
  return find_query(QueryKey{r.dataset_id, r.split, r.query_id});
}

void Corpus::validate(std::optional<std::size_t> expected_k) const {
  std::set<QueryKey> seen;
  for (const auto& q : queries) {
    if (q.prompt_text.empty())
      throw ValidationError("query " + q.dataset_id + "/" + q.query_id +
                            ": empty prompt_text");
    QueryKey key{q.dataset_id, q.split, q.query_id};
    if (!seen.insert(key).second)
      throw ValidationError("duplicate query_id " + q.query_id + " in " +
                            q.dataset_id + "/" + std::string(to_string(q.split)));
  }
  std::optional<std::size_t> k = expected_k;
  for (const auto& r : responses) {
    if (r.response_text.empty())
      throw ValidationError("response " + r.dataset_id + "/" + r.query_id +
                            " (" + r.model_id + "): empty response_text");
    if (!k) k = r.samples.size();
    if (r.samples.size() != *k)
      throw ValidationError("response " + r.dataset_id + "/" + r.query_id +
                            " (" + r.model_id + "): expected " +
                            std::to_string(*k) + " samples, got " +
                            std::to_string(r.samples.size()));
    if (!find_query(r))
      throw ReferenceError("response " + r.dataset_id + "/" + r.query_id +
                           " (" + r.model_id + "): no matching query record");
  }
}

std::vector<SplitSpec> split_specs(const Corpus& c) {
  std::map<std::string, SplitSpec> by_dataset;
  for (const auto& q : c.queries) {
    auto& spec = by_dataset[q.dataset_id];
    spec.dataset_id = q.dataset_id;
    if (q.split == Split::test) spec.has_test = true;
  }
  std::vector<SplitSpec> out;
  out.reserve(by_dataset.size());
  for (auto& [_, spec] : by_dataset) out.push_back(std::move(spec));
  return out;
}

namespace {

// Field order is the wire contract; extras keep their original order at
// the tail.
const char* const kQueryFields[] = {"kind",        "dataset_id", "split",
                                    "query_id",    "prompt_text", "gold_answers",
                                    "task_kind"};
const char* const kResponseFields[] = {"kind",          "model_id",
                                       "dataset_id",    "split",
                                       "query_id",      "response_text",
                                       "samples",       "system_prompt_id",
                                       "punt"};

template <std::size_t N>
bool is_known(const std::string& key, const char* const (&fields)[N]) {
  for (const char* f : fields)
    if (key == f) return true;
  return false;
}

std::string require_string(const ordered_json& j, const char* field,
                           std::string_view where) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string())
    throw ParseError(std::string(where) + ": missing string field '" + field + "'");
  return it->get<std::string>();
}

QueryRecord query_from_json(const ordered_json& j, std::string_view where) {
  QueryRecord q;
  q.dataset_id = require_string(j, "dataset_id", where);
  q.split = split_from_string(require_string(j, "split", where));
  q.query_id = require_string(j, "query_id", where);
  q.prompt_text = require_string(j, "prompt_text", where);
  if (auto it = j.find("gold_answers"); it != j.end()) {
    if (!it->is_array())
      throw ParseError(std::string(where) + ": gold_answers must be an array");
    for (const auto& g : *it) q.gold_answers.push_back(g.get<std::string>());
  }
  q.task_kind = task_kind_from_string(require_string(j, "task_kind", where));
  for (const auto& [key, value] : j.items()) {
    if (!is_known(key, kQueryFields)) q.extra[key] = value;
  }
  return q;
}

ResponseRecord response_from_json(const ordered_json& j, std::string_view where) {
  ResponseRecord r;
  r.model_id = require_string(j, "model_id", where);
  r.dataset_id = require_string(j, "dataset_id", where);
  r.split = split_from_string(require_string(j, "split", where));
  r.query_id = require_string(j, "query_id", where);
  r.response_text = require_string(j, "response_text", where);
  auto it = j.find("samples");
  if (it == j.end() || !it->is_array())
    throw ParseError(std::string(where) + ": missing array field 'samples'");
  for (const auto& s : *it) r.samples.push_back(s.get<std::string>());
  r.system_prompt_id = j.value("system_prompt_id", std::string{});
  r.punt = j.value("punt", false);
  for (const auto& [key, value] : j.items()) {
    if (!is_known(key, kResponseFields)) r.extra[key] = value;
  }
  return r;
}

}  // namespace

ordered_json to_json(const QueryRecord& q) {
  ordered_json j;
  j["kind"] = "query";
  j["dataset_id"] = q.dataset_id;
  j["split"] = to_string(q.split);
  j["query_id"] = q.query_id;
  j["prompt_text"] = q.prompt_text;
  j["gold_answers"] = q.gold_answers;
  j["task_kind"] = to_string(q.task_kind);
  for (const auto& [key, value] : q.extra.items()) j[key] = value;
  return j;
}

ordered_json to_json(const ResponseRecord& r) {
  ordered_json j;
  j["kind"] = "response";
  j["model_id"] = r.model_id;
  j["dataset_id"] = r.dataset_id;
  j["split"] = to_string(r.split);
  j["query_id"] = r.query_id;
  j["response_text"] = r.response_text;
  j["samples"] = r.samples;
  j["system_prompt_id"] = r.system_prompt_id;
  j["punt"] = r.punt;
  for (const auto& [key, value] : r.extra.items()) j[key] = value;
  return j;
}

Corpus parse_corpus(std::istream& in, std::string_view origin,
                    std::optional<std::size_t> expected_k) {
  Corpus c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where =
        std::string(origin) + ":" + std::to_string(lineno);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": record is not an object");
    const std::string kind = j.value("kind", "");
    if (kind == "meta") continue;  // pipeline metadata line
    if (kind == "query") {
      c.queries.push_back(query_from_json(j, where));
    } else if (kind == "response") {
      c.responses.push_back(response_from_json(j, where));
    } else {
      throw ParseError(where + ": unknown record kind '" + kind + "'");
    }
  }
  c.validate(expected_k);
  return c;
}

Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<std::size_t> expected_k) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path.string());
  return parse_corpus(in, path.string(), expected_k);
}

std::string serialize_corpus(const Corpus& c) {
  std::string out;
  for (const auto& q : c.queries) {
    out += to_json(q).dump();
    out += '\n';
  }
  for (const auto& r : c.responses) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& c, const std::filesystem::path& path) {
  c.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write corpus file: " + path.string());
  out << serialize_corpus(c);
  if (!out) throw IoError("write failed: " + path.string());
}

Corpus subsample(const Corpus& c, std::size_t max_per_split,
                 std::uint64_t seed) {
  if (max_per_split == 0) return c;
  // Group query indices per (dataset, split).
  std::map<std::pair<std::string, Split>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < c.queries.size(); ++i) {
    const auto& q = c.queries[i];
    groups[{q.dataset_id, q.split}].push_back(i);
  }
  std::set<std::size_t> keep;
  for (auto& [key, indices] : groups) {
    if (indices.size() <= max_per_split) {
      keep.insert(indices.begin(), indices.end());
      continue;
    }
    // Group-local generator so sampling is stable under corpus concatenation.
    std::seed_seq seq{seed, static_cast<std::uint64_t>(std::hash<std::string>{}(
                                key.first + "/" + std::string(to_string(key.second))))};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> shuffled = indices;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.resize(max_per_split);
    keep.insert(shuffled.begin(), shuffled.end());
  }
  Corpus out;
  for (std::size_t i = 0; i < c.queries.size(); ++i)
    if (keep.contains(i)) out.queries.push_back(c.queries[i]);
  for (const auto& r : c.responses)
    if (out.find_query(r)) out.responses.push_back(r);
  return out;
}

}  // namespace miceval::corpus
