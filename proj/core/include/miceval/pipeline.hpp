#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miceval/annotate.hpp"
#include "miceval/corpus.hpp"
#include "miceval/judge.hpp"
#include "miceval/llm.hpp"
#include "miceval/metrics.hpp"
#include "miceval/prompts.hpp"
#include "miceval/segmenter.hpp"

namespace miceval::pipeline {

struct BackendConfig {
  std::string kind = "mock";  // "mock" | "http"
  llm::HttpClientConfig http;
  double temperature = 0.0;
  int max_output_tokens = 256;
};

/// Mirrors the CLI config file; flags override individual fields.
struct RunConfig {
  std::vector<std::string> corpus;  // input corpus files
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t k = 20;       // samples per response
  std::size_t threshold = 10;
  std::vector<std::size_t> sweep;  // ascending; empty = single threshold
  std::string system_prompt_id = "generic";  // generic | metacognitive
  metrics::Aggregation aggregation = metrics::Aggregation::marker;
  bool exclude_no_hedge = false;
  int parallelism = 1;
  std::size_t max_examples_per_split = 0;  // generation cap; 0 = unlimited

  bool score_decisiveness = true;
  bool score_accuracy = true;
  bool detect_punts = false;
  double failure_ceiling = 0.01;

  metrics::CmaeConvention cmae_convention = metrics::CmaeConvention::directed_mean;
  metrics::ConfReduction conf_reduction = metrics::ConfReduction::mean;
  std::size_t mac_min_shared_datasets = 0;

  BackendConfig judge_backend;                    // temperature 0, greedy
  BackendConfig task_model{.temperature = 1.0};   // generation decode
  std::string cache_dir;        // default <out>/cache
  std::string resources_dir;    // default resolution when empty
  std::string annotations_file; // default <out>/annotations.jsonl

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json to_json() const;

  /// SHA-256 over the config (out_dir excluded so identical runs into
  /// different directories stay byte-identical).
  std::string config_hash() const;

  void validate() const;

  std::filesystem::path out() const { return out_dir; }
  std::filesystem::path annotations_path() const;
  std::filesystem::path cache_path() const;
};

/// Clients, templates, cache, and segmenter assembled from the config.
struct Runtime {
  std::shared_ptr<llm::ChatClient> judge_client;
  std::shared_ptr<llm::ChatClient> task_client;
  std::shared_ptr<judge::VerdictCache> cache;
  prompts::TemplateStore templates;
  std::shared_ptr<segmenter::SentenceSegmenter> seg;

  judge::Judge make_judge() const;
};

Runtime make_runtime(const RunConfig& cfg);

/// Renders the task prompt for a query: the template is keyed by
/// task_kind, extra fields supply context/choices/NLI texts, and
/// multiple-choice answer order is shuffled under the run seed.
std::string render_task_prompt(const corpus::QueryRecord& q,
                               const prompts::TemplateStore& templates,
                               std::uint64_t seed);

// Pipeline stages (file handoffs under cfg.out()):
//   generate -> generated_responses.jsonl + generate_manifest.jsonl
//   annotate -> annotations.jsonl + diagnostics.json
//   mic      -> mic_tables.jsonl + mic_tables.csv
//   metrics  -> metric_report.json + metrics_table.csv
//   report   -> kde.csv, violin_*.csv, mf_scatter.csv, mic_heatmap.csv
void cmd_generate(const RunConfig& cfg, Runtime& rt);
void cmd_annotate(const RunConfig& cfg, Runtime& rt);
void cmd_mic(const RunConfig& cfg);
void cmd_metrics(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);

}  // namespace miceval::pipeline
