#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "miceval/llm.hpp"
#include "miceval/prompts.hpp"

namespace miceval::judge {

enum class TaskKind {
  consistency,
  decisiveness,
  accuracy,
  extract_markers,
  standardize_markers,
};

std::string_view to_string(TaskKind k);

struct JudgeTask {
  TaskKind kind = TaskKind::consistency;
  std::string template_id;
  std::string rendered_prompt;
  llm::DecodeParams decode;
};

enum class TriState { yes, na, no };

std::string_view to_string(TriState t);

/// Inconsistency score for the intrinsic-confidence formula:
/// yes -> 0.0, na -> 0.5, no -> 1.0.
double inconsistency_score(TriState t);

/// Content-addressed cache key over everything that determines a reply.
std::string cache_key(const JudgeTask& task, std::string_view judge_model_id);

/// Append-only on-disk store of raw judge replies, one JSONL file per
/// two-hex-digit key prefix. First write per key wins; writes are
/// serialized, reads come from an in-memory index.
class VerdictCache {
 public:
  explicit VerdictCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string_view raw);
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
};

// --- Reply parsers (exposed for fuzz tests) -------------------------------

/// First word "yes"/"no" (case-insensitive, optional "Answer:" prefix);
/// anything else is na.
TriState parse_consistency(std::string_view raw);

/// Leading float, optional "Rating:" prefix; out-of-range values clamp to
/// [0, 1] with a warning. Throws JudgeParseError when no float parses.
double parse_decisiveness(std::string_view raw);

/// "True"/"False" ignoring case and surrounding punctuation.
bool parse_accuracy(std::string_view raw);

/// Semicolon-separated hedges up to the "####" terminator, normalized.
std::vector<std::string> parse_extraction(std::string_view raw);

/// JSON object mapping each input marker to its canonical form. Restores a
/// final '}' eaten by the stop sequence; keys must cover the inputs
/// exactly (JudgeParseError otherwise).
std::map<std::string, std::string> parse_standardization(
    std::string_view raw, std::span<const std::string> inputs);

/// Trim, collapse runs of whitespace, lowercase except the pronoun "I"
/// ("I think" stays "I think").
std::string normalize_marker(std::string_view s);

// --- Mock backend ----------------------------------------------------------

/// Deterministic judge stand-in. Scripted replies (keyed by the exact
/// rendered prompt) take precedence; otherwise rule mode answers from the
/// prompt content: lexicon extraction, substring consistency, threshold
/// decisiveness, gold-containment accuracy.
class MockJudgeBackend : public llm::ChatClient {
 public:
  MockJudgeBackend();  // loads resources/mock_lexicon.tsv
  explicit MockJudgeBackend(
      std::vector<std::pair<std::string, std::string>> lexicon);

  void script_reply(std::string_view rendered_prompt, std::string reply);
  /// Throw TransportError whenever the rendered prompt contains marker.
  void fail_when(std::string_view marker);
  /// Rule-mode decisiveness for sentences that carry a lexicon hedge
  /// (unhedged sentences score 1.0).
  void set_hedged_decisiveness(double v) { hedged_decisiveness_ = v; }

  std::string complete(const llm::ChatRequest& req) override;
  std::string id() const override { return "mock-judge"; }

  std::size_t call_count() const;

  /// Marker in the rule-mode mock that forces an "n/a" consistency verdict
  /// when present in the context.
  static constexpr std::string_view kNaToken = "[NA]";

 private:
  std::string rule_reply(const std::string& prompt) const;
  std::vector<std::pair<std::string, std::string>> lexicon_;  // surface, canonical
  double hedged_decisiveness_ = 0.4;
  std::map<std::string, std::string, std::less<>> scripted_;
  std::vector<std::string> fail_markers_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

// --- Judge client ----------------------------------------------------------

struct JudgeConfig {
  int transport_attempts = 3;
  std::chrono::milliseconds backoff{250};
  // Greedy decoding throughout; extraction and standardization carry the
  // designated stop sequences.
  llm::DecodeParams consistency_decode{0.0, 16, {}};
  llm::DecodeParams decisiveness_decode{0.0, 16, {}};
  llm::DecodeParams accuracy_decode{0.0, 16, {}};
  llm::DecodeParams extract_decode{0.0, 256, {"Answer:"}};
  llm::DecodeParams standardize_decode{0.0, 4096, {"}"}};
};

/// Uniform front door for all judge calls. Caching and retries live here
/// so call sites are backend-agnostic.
class Judge {
 public:
  Judge(std::shared_ptr<llm::ChatClient> client, prompts::TemplateStore templates,
        std::shared_ptr<VerdictCache> cache = nullptr, JudgeConfig cfg = {});

  TriState judge_consistency(std::string_view assertion,
                             std::string_view context);
  double judge_decisiveness(std::string_view sentence);
  bool judge_accuracy(std::string_view prediction,
                      std::span<const std::string> gold_answers);
  std::vector<std::string> extract_markers(std::string_view sentence);
  std::map<std::string, std::string> standardize_markers(
      std::span<const std::string> markers);

  const JudgeConfig& config() const { return cfg_; }
  llm::ChatClient& client() { return *client_; }

 private:
  std::string complete_raw(TaskKind kind, std::string_view template_id,
                           std::string rendered, const llm::DecodeParams& decode,
                           bool cache_reply, bool bypass_cache_read = false);

  std::shared_ptr<llm::ChatClient> client_;
  prompts::TemplateStore templates_;
  std::shared_ptr<VerdictCache> cache_;
  JudgeConfig cfg_;
};

}  // namespace miceval::judge
