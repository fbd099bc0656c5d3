#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace miceval::corpus {

enum class Split { train, test };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

enum class TaskKind {
  qa,
  qa_unanswerable,
  qa_context,
  multiple_choice,
  nli,
  hallucination_detection,
};

std::string_view to_string(TaskKind k);
TaskKind task_kind_from_string(std::string_view s);

/// One question posed to the task model.
struct QueryRecord {
  std::string dataset_id;
  Split split = Split::train;
  std::string query_id;
  std::string prompt_text;
  std::vector<std::string> gold_answers;  // may be empty
  TaskKind task_kind = TaskKind::qa;
  // Unknown fields, kept verbatim for round-trip (e.g. multiple-choice
  // "choices", NLI "text_1"/"text_2").
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

/// One model answer plus its K resampled sibling responses.
struct ResponseRecord {
  std::string model_id;
  std::string dataset_id;
  Split split = Split::train;
  std::string query_id;
  std::string response_text;
  std::vector<std::string> samples;  // exactly K entries
  std::string system_prompt_id;
  bool punt = false;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

struct SplitSpec {
  std::string dataset_id;
  bool has_test = false;
  std::size_t max_examples = 0;  // 0 = unlimited
};

struct QueryKey {
  std::string dataset_id;
  Split split;
  std::string query_id;
  auto operator<=>(const QueryKey&) const = default;
};

struct Corpus {
  std::vector<QueryRecord> queries;
  std::vector<ResponseRecord> responses;

  const QueryRecord* find_query(const QueryKey& key) const;
  const QueryRecord* find_query(const ResponseRecord& r) const;

  /// Validates type invariants and cross references; throws
  /// ValidationError / ReferenceError on the first offending record.
  /// expected_k pins the sample count; without it the first response's
  /// count is enforced corpus-wide.
  void validate(std::optional<std::size_t> expected_k = std::nullopt) const;

 private:
  mutable std::map<QueryKey, std::size_t> index_;  // lazy
  void build_index() const;
};

/// Dataset ids present in the corpus along with whether both splits occur.
std::vector<SplitSpec> split_specs(const Corpus& c);

/// Line-delimited corpus file: one JSON object per line with
/// "kind": "query" | "response". Lines with kind "meta" are skipped.
/// Errors carry 1-based line numbers.
Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<std::size_t> expected_k = std::nullopt);
Corpus parse_corpus(std::istream& in, std::string_view origin,
                    std::optional<std::size_t> expected_k = std::nullopt);

/// Deterministic serialization: fixed field order, extras last, one record
/// per line, queries before responses in input order.
void save_corpus(const Corpus& c, const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& c);

nlohmann::ordered_json to_json(const QueryRecord& q);
nlohmann::ordered_json to_json(const ResponseRecord& r);

/// Caps every (dataset, split) group at max_per_split records, sampled
/// without replacement under the given seed. Queries are sampled; responses
/// to dropped queries are dropped too. Query order is preserved.
Corpus subsample(const Corpus& c, std::size_t max_per_split, std::uint64_t seed);

}  // namespace miceval::corpus
