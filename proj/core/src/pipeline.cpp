#include "miceval/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "miceval/errors.hpp"
#include "miceval/hash.hpp"
#include "miceval/mic.hpp"
#include "miceval/stats.hpp"

namespace miceval::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

BackendConfig backend_from_json(const ordered_json& j) {
  BackendConfig b;
  b.kind = j.value("kind", b.kind);
  b.http.base_url = j.value("base_url", b.http.base_url);
  b.http.path = j.value("path", b.http.path);
  b.http.model = j.value("model", b.http.model);
  b.http.api_token_env = j.value("api_token_env", b.http.api_token_env);
  b.http.timeout_seconds = j.value("timeout_seconds", b.http.timeout_seconds);
  b.temperature = j.value("temperature", b.temperature);
  b.max_output_tokens = j.value("max_output_tokens", b.max_output_tokens);
  return b;
}

ordered_json backend_to_json(const BackendConfig& b) {
  ordered_json j;
  j["kind"] = b.kind;
  j["base_url"] = b.http.base_url;
  j["path"] = b.http.path;
  j["model"] = b.http.model;
  j["api_token_env"] = b.http.api_token_env;
  j["timeout_seconds"] = b.http.timeout_seconds;
  j["temperature"] = b.temperature;
  j["max_output_tokens"] = b.max_output_tokens;
  return j;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
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

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

RunConfig RunConfig::from_json(const ordered_json& j) {
  RunConfig c;
  if (j.contains("corpus"))
    c.corpus = j.at("corpus").get<std::vector<std::string>>();
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.k = j.value("k", c.k);
  c.threshold = j.value("threshold", c.threshold);
  if (j.contains("sweep"))
    c.sweep = j.at("sweep").get<std::vector<std::size_t>>();
  c.system_prompt_id = j.value("system_prompt_id", c.system_prompt_id);
  if (j.contains("aggregation"))
    c.aggregation =
        metrics::aggregation_from_string(j.at("aggregation").get<std::string>());
  c.exclude_no_hedge = j.value("exclude_no_hedge", c.exclude_no_hedge);
  c.parallelism = j.value("parallelism", c.parallelism);
  c.max_examples_per_split =
      j.value("max_examples_per_split", c.max_examples_per_split);
  c.score_decisiveness = j.value("score_decisiveness", c.score_decisiveness);
  c.score_accuracy = j.value("score_accuracy", c.score_accuracy);
  c.detect_punts = j.value("detect_punts", c.detect_punts);
  c.failure_ceiling = j.value("failure_ceiling", c.failure_ceiling);
  if (j.contains("cmae_convention")) {
    const auto s = j.at("cmae_convention").get<std::string>();
    if (s == "directed_mean")
      c.cmae_convention = metrics::CmaeConvention::directed_mean;
    else if (s == "paper_literal")
      c.cmae_convention = metrics::CmaeConvention::paper_literal;
    else
      throw ConfigError("unknown cmae_convention: " + s);
  }
  if (j.contains("conf_reduction"))
    c.conf_reduction = metrics::conf_reduction_from_string(
        j.at("conf_reduction").get<std::string>());
  c.mac_min_shared_datasets =
      j.value("mac_min_shared_datasets", c.mac_min_shared_datasets);
  if (j.contains("judge")) c.judge_backend = backend_from_json(j.at("judge"));
  if (j.contains("task_model")) {
    c.task_model = backend_from_json(j.at("task_model"));
  }
  c.cache_dir = j.value("cache_dir", c.cache_dir);
  c.resources_dir = j.value("resources_dir", c.resources_dir);
  c.annotations_file = j.value("annotations_file", c.annotations_file);
  return c;
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["corpus"] = corpus;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["k"] = k;
  j["threshold"] = threshold;
  j["sweep"] = sweep;
  j["system_prompt_id"] = system_prompt_id;
  j["aggregation"] = metrics::to_string(aggregation);
  j["exclude_no_hedge"] = exclude_no_hedge;
  j["parallelism"] = parallelism;
  j["max_examples_per_split"] = max_examples_per_split;
  j["score_decisiveness"] = score_decisiveness;
  j["score_accuracy"] = score_accuracy;
  j["detect_punts"] = detect_punts;
  j["failure_ceiling"] = failure_ceiling;
  j["cmae_convention"] = metrics::to_string(cmae_convention);
  j["conf_reduction"] = metrics::to_string(conf_reduction);
  j["mac_min_shared_datasets"] = mac_min_shared_datasets;
  j["judge"] = backend_to_json(judge_backend);
  j["task_model"] = backend_to_json(task_model);
  j["cache_dir"] = cache_dir;
  j["resources_dir"] = resources_dir;
  j["annotations_file"] = annotations_file;
  return j;
}

std::string RunConfig::config_hash() const {
  ordered_json j = to_json();
  j.erase("out_dir");
  return hash::sha256_hex(j.dump());
}

void RunConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (threshold < 1) throw ConfigError("threshold must be >= 1");
  if (!std::is_sorted(sweep.begin(), sweep.end()))
    throw ConfigError("sweep list must be sorted ascending");
  if (system_prompt_id != "generic" && system_prompt_id != "metacognitive")
    throw ConfigError("system_prompt_id must be generic or metacognitive");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (failure_ceiling < 0.0 || failure_ceiling > 1.0)
    throw ConfigError("failure_ceiling must lie in [0, 1]");
  for (const auto& b : {judge_backend, task_model}) {
    if (b.kind != "mock" && b.kind != "http")
      throw ConfigError("backend kind must be mock or http");
    if (b.kind == "http" && b.http.base_url.empty())
      throw ConfigError("http backend requires base_url");
  }
}

fs::path RunConfig::annotations_path() const {
  return annotations_file.empty() ? out() / "annotations.jsonl"
                                  : fs::path(annotations_file);
}

fs::path RunConfig::cache_path() const {
  return cache_dir.empty() ? out() / "cache" : fs::path(cache_dir);
}

judge::Judge Runtime::make_judge() const {
  return judge::Judge(judge_client, templates, cache);
}

Runtime make_runtime(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.resources_dir.empty())
    ::setenv("MICEVAL_RESOURCES", cfg.resources_dir.c_str(), 1);
  fs::create_directories(cfg.out());

  Runtime rt{
      .judge_client = nullptr,
      .task_client = nullptr,
      .cache = std::make_shared<judge::VerdictCache>(cfg.cache_path()),
      .templates = prompts::TemplateStore::load_default(),
      .seg = std::make_shared<segmenter::RuleSegmenter>(
          segmenter::RuleSegmenter::with_default_abbreviations()),
  };
  if (cfg.judge_backend.kind == "http")
    rt.judge_client = llm::make_http_client(cfg.judge_backend.http);
  else
    rt.judge_client = std::make_shared<judge::MockJudgeBackend>();
  if (cfg.task_model.kind == "http")
    rt.task_client = llm::make_http_client(cfg.task_model.http);
  else
    rt.task_client = std::make_shared<llm::ScriptedChatClient>();
  return rt;
}

// --- generate ---------------------------------------------------------------

std::string render_task_prompt(const corpus::QueryRecord& q,
                               const prompts::TemplateStore& templates,
                               std::uint64_t seed) {
  std::map<std::string, std::string, std::less<>> vars;
  vars["question"] = q.prompt_text;
  auto extra_string = [&](const char* field) -> std::string {
    auto it = q.extra.find(field);
    if (it == q.extra.end() || !it->is_string())
      throw ValidationError("query " + q.dataset_id + "/" + q.query_id +
                            ": task kind " +
                            std::string(corpus::to_string(q.task_kind)) +
                            " needs extra field '" + field + "'");
    return it->get<std::string>();
  };
  std::string template_id = "task_qa";
  switch (q.task_kind) {
    case corpus::TaskKind::qa:
      template_id = "task_qa";
      break;
    case corpus::TaskKind::qa_unanswerable:
      template_id = "task_qa_unanswerable";
      break;
    case corpus::TaskKind::qa_context:
      template_id = "task_qa_context";
      vars["context"] = extra_string("context");
      break;
    case corpus::TaskKind::multiple_choice: {
      template_id = "task_multiple_choice";
      auto it = q.extra.find("choices");
      if (it == q.extra.end() || !it->is_array())
        throw ValidationError("query " + q.dataset_id + "/" + q.query_id +
                              ": multiple_choice needs extra array 'choices'");
      std::vector<std::string> choices = it->get<std::vector<std::string>>();
      std::seed_seq seq{seed, static_cast<std::uint64_t>(std::hash<std::string>{}(
                                  q.dataset_id + "/" + q.query_id))};
      std::mt19937_64 rng(seq);
      std::shuffle(choices.begin(), choices.end(), rng);
      std::string joined;
      for (const auto& ch : choices) {
        if (!joined.empty()) joined += ", ";
        joined += ch;
      }
      vars["choices_list"] = joined;
      break;
    }
    case corpus::TaskKind::nli:
      template_id = "task_nli";
      vars["text_1"] = extra_string("text_1");
      vars["text_2"] = extra_string("text_2");
      break;
    case corpus::TaskKind::hallucination_detection:
      template_id = "task_hallucination_detection";
      vars["question"] = q.prompt_text;
      vars["response"] = extra_string("response");
      break;
  }
  return templates.render(template_id, vars);
}

void cmd_generate(const RunConfig& cfg, Runtime& rt) {
  cfg.validate();
  if (cfg.corpus.empty()) throw ConfigError("generate: no corpus files given");
  fs::create_directories(cfg.out());

  corpus::Corpus merged;
  for (const auto& path : cfg.corpus) {
    corpus::Corpus c = corpus::load_corpus(path);
    for (auto& q : c.queries) merged.queries.push_back(std::move(q));
    // existing responses in the inputs are ignored by generate
  }
  if (cfg.max_examples_per_split > 0)
    merged = corpus::subsample(merged, cfg.max_examples_per_split, cfg.seed);

  // Stable generation order.
  std::stable_sort(merged.queries.begin(), merged.queries.end(),
                   [](const auto& a, const auto& b) {
                     return std::tie(a.dataset_id, a.split, a.query_id) <
                            std::tie(b.dataset_id, b.split, b.query_id);
                   });

  const fs::path out_file = cfg.out() / "generated_responses.jsonl";
  const fs::path manifest_file = cfg.out() / "generate_manifest.jsonl";

  std::set<std::string> done;
  if (fs::exists(manifest_file)) {
    std::ifstream in(manifest_file, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = ordered_json::parse(line);
      if (j.value("done", false)) done.insert(j.at("query").get<std::string>());
    }
  }

  const bool fresh = !fs::exists(out_file);
  std::ofstream out(out_file, std::ios::binary | std::ios::app);
  std::ofstream manifest(manifest_file, std::ios::binary | std::ios::app);
  if (!out || !manifest)
    throw IoError("cannot open generate outputs under " + cfg.out().string());
  if (fresh) {
    ordered_json meta;
    meta["kind"] = "meta";
    meta["config_hash"] = cfg.config_hash();
    meta["seed"] = cfg.seed;
    out << meta.dump() << '\n';
  }

  const std::string system_template = cfg.system_prompt_id == "metacognitive"
                                          ? "system_metacognitive"
                                          : "system_generic";
  const std::string system_prompt = rt.templates.raw(system_template);

  std::size_t generated = 0, skipped = 0;
  for (const auto& q : merged.queries) {
    const std::string key = q.dataset_id + "/" +
                            std::string(corpus::to_string(q.split)) + "/" +
                            q.query_id;
    if (done.contains(key)) {
      ++skipped;
      continue;
    }
    llm::ChatRequest req;
    req.system = system_prompt;
    req.user = render_task_prompt(q, rt.templates, cfg.seed);
    req.decode.temperature = cfg.task_model.temperature;
    req.decode.max_output_tokens = cfg.task_model.max_output_tokens;

    corpus::ResponseRecord r;
    r.model_id = rt.task_client->id();
    r.dataset_id = q.dataset_id;
    r.split = q.split;
    r.query_id = q.query_id;
    r.system_prompt_id = cfg.system_prompt_id;
    r.response_text =
        llm::complete_with_retries(*rt.task_client, req, 3,
                                   std::chrono::milliseconds(250));
    for (std::size_t s = 0; s < cfg.k; ++s) {
      r.samples.push_back(llm::complete_with_retries(
          *rt.task_client, req, 3, std::chrono::milliseconds(250)));
    }
    out << corpus::to_json(r).dump() << '\n';
    out.flush();
    ordered_json m;
    m["query"] = key;
    m["done"] = true;
    manifest << m.dump() << '\n';
    manifest.flush();
    ++generated;
  }
  spdlog::info("generate: {} response(s) written, {} already present",
               generated, skipped);
}

// --- annotate ---------------------------------------------------------------

void cmd_annotate(const RunConfig& cfg, Runtime& rt) {
  cfg.validate();
  if (cfg.corpus.empty()) throw ConfigError("annotate: no corpus files given");
  fs::create_directories(cfg.out());

  corpus::Corpus merged;
  for (const auto& path : cfg.corpus) {
    corpus::Corpus c = corpus::load_corpus(path);
    for (auto& q : c.queries) merged.queries.push_back(std::move(q));
    for (auto& r : c.responses) merged.responses.push_back(std::move(r));
  }
  merged.validate(cfg.k);

  judge::Judge j = rt.make_judge();
  annotate::AnnotateOptions opts;
  opts.score_decisiveness = cfg.score_decisiveness;
  opts.score_accuracy = cfg.score_accuracy;
  opts.detect_punts = cfg.detect_punts;
  opts.failure_ceiling = cfg.failure_ceiling;
  opts.parallelism = cfg.parallelism;

  annotate::AnnotatedCorpus ac;
  try {
    ac = annotate::annotate_corpus(merged, j, *rt.seg, opts);
  } catch (const AnnotationError&) {
    // Ceiling exceeded: still leave diagnostics behind for inspection.
    ordered_json diag;
    diag["config_hash"] = cfg.config_hash();
    diag["seed"] = cfg.seed;
    diag["failed"] = true;
    write_file(cfg.out() / "diagnostics.json", diag.dump(2) + "\n");
    throw;
  }

  ordered_json meta;
  meta["kind"] = "meta";
  meta["config_hash"] = cfg.config_hash();
  meta["seed"] = cfg.seed;
  annotate::save_annotations(ac, cfg.annotations_path(), meta.dump());

  ordered_json diag;
  diag["config_hash"] = cfg.config_hash();
  diag["seed"] = cfg.seed;
  diag["model_id"] = ac.model_id;
  diag["k"] = ac.k;
  diag["diagnostics"] = annotate::to_json(ac.diagnostics);
  write_file(cfg.out() / "diagnostics.json", diag.dump(2) + "\n");
  if (ac.annotations.empty())
    spdlog::warn("annotate: corpus produced no annotations");
}

// --- shared loading ---------------------------------------------------------

namespace {

annotate::AnnotatedCorpus load_annotations_checked(const RunConfig& cfg) {
  const fs::path path = cfg.annotations_path();
  if (!fs::exists(path))
    throw IoError("annotations not found: " + path.string() +
                  " (run the annotate stage first)");
  return annotate::load_annotations(path);
}

std::vector<annotate::SentenceAnnotation> eligible_train(
    const annotate::AnnotatedCorpus& ac, const std::string& dataset_id) {
  std::vector<annotate::SentenceAnnotation> out;
  for (const auto& a : ac.annotations) {
    if (a.dataset_id != dataset_id || a.split != corpus::Split::train) continue;
    if (a.state == annotate::MarkerState::multi_discarded || !a.confidence)
      continue;
    out.push_back(a);
  }
  return out;
}

std::vector<std::string> dataset_ids(const annotate::AnnotatedCorpus& ac) {
  std::set<std::string> ids;
  for (const auto& a : ac.annotations) ids.insert(a.dataset_id);
  return {ids.begin(), ids.end()};
}

std::vector<mic::MicTable> build_train_tables(
    const annotate::AnnotatedCorpus& ac, std::size_t threshold,
    bool exclude_no_hedge) {
  std::vector<mic::MicTable> tables;
  for (const auto& id : dataset_ids(ac)) {
    auto anns = eligible_train(ac, id);
    auto t = mic::build_mic_table(anns, threshold, ac.model_id, id,
                                  corpus::Split::train);
    tables.push_back(exclude_no_hedge ? mic::exclude_no_hedge(t) : t);
  }
  return tables;
}

std::string csv_comment(const RunConfig& cfg) {
  return "# config_hash=" + cfg.config_hash() +
         " seed=" + std::to_string(cfg.seed);
}

std::string meta_line(const RunConfig& cfg) {
  ordered_json meta;
  meta["kind"] = "meta";
  meta["config_hash"] = cfg.config_hash();
  meta["seed"] = cfg.seed;
  return meta.dump();
}

}  // namespace

// --- mic ---------------------------------------------------------------------

void cmd_mic(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out());
  const auto ac = load_annotations_checked(cfg);
  auto tables = build_train_tables(ac, cfg.threshold, cfg.exclude_no_hedge);
  mic::save_tables_jsonl(tables, cfg.out() / "mic_tables.jsonl", meta_line(cfg));
  mic::save_tables_csv(tables, cfg.out() / "mic_tables.csv", csv_comment(cfg));
}

// --- metrics -------------------------------------------------------------------

void cmd_metrics(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out());
  const auto ac = load_annotations_checked(cfg);

  std::vector<std::size_t> thresholds =
      cfg.sweep.empty() ? std::vector<std::size_t>{cfg.threshold} : cfg.sweep;

  std::vector<metrics::MetricReport> reports;
  for (std::size_t t : thresholds) {
    metrics::ReportOptions opts;
    opts.threshold = t;
    opts.exclude_no_hedge = cfg.exclude_no_hedge;
    opts.aggregation = cfg.aggregation;
    opts.cmae_convention = cfg.cmae_convention;
    opts.conf_reduction = cfg.conf_reduction;
    opts.mac_min_shared_datasets = cfg.mac_min_shared_datasets;
    reports.push_back(metrics::compute_report(ac.annotations, opts));
  }

  ordered_json doc;
  doc["config_hash"] = cfg.config_hash();
  doc["seed"] = cfg.seed;
  doc["reports"] = ordered_json::array();
  for (const auto& r : reports) doc["reports"].push_back(metrics::to_json(r));
  write_file(cfg.out() / "metric_report.json", doc.dump(2) + "\n");
  write_file(cfg.out() / "metrics_table.csv",
             metrics::reports_to_csv(reports, csv_comment(cfg)));
}

// --- report ---------------------------------------------------------------------

void cmd_report(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out());
  const auto ac = load_annotations_checked(cfg);
  auto tables = build_train_tables(ac, cfg.threshold, cfg.exclude_no_hedge);
  const std::string comment = csv_comment(cfg);

  // KDE of MIC values per (model, dataset).
  {
    std::string out = comment + "\nmodel_id,dataset_id,x,density\n";
    for (const auto& t : tables) {
      if (t.entries.empty()) continue;
      std::vector<double> mics;
      for (const auto& [_, e] : t.entries) mics.push_back(e.mic);
      const auto kde = stats::kde(mics, 0.0, 1.0, 256);
      for (std::size_t i = 0; i < kde.grid.size(); ++i) {
        out += csv_escape(t.model_id) + ',' + csv_escape(t.dataset_id) + ',' +
               format_double(kde.grid[i]) + ',' + format_double(kde.density[i]) +
               '\n';
      }
    }
    write_file(cfg.out() / "kde.csv", out);
  }

  std::map<std::string, const mic::MicTable*> table_by_dataset;
  for (const auto& t : tables) table_by_dataset[t.dataset_id] = &t;

  const char* violin_header =
      "model_id,dataset_id,query_id,sent_idx,marker,mic,confidence\n";
  auto violin_row = [&](const annotate::SentenceAnnotation& a,
                        const mic::MicEntry& e) {
    return csv_escape(a.model_id) + ',' + csv_escape(a.dataset_id) + ',' +
           csv_escape(a.query_id) + ',' + std::to_string(a.sent_idx) + ',' +
           csv_escape(a.marker) + ',' + format_double(e.mic) + ',' +
           format_double(*a.confidence) + '\n';
  };

  // MIC stratified by response correctness.
  {
    std::string correct_rows, incorrect_rows;
    for (const auto& a : ac.annotations) {
      if (a.split != corpus::Split::train) continue;
      if (a.state == annotate::MarkerState::multi_discarded || !a.confidence)
        continue;
      if (!a.correct) continue;
      auto it = table_by_dataset.find(a.dataset_id);
      if (it == table_by_dataset.end() || !it->second->contains(a.marker))
        continue;
      const auto& e = it->second->entries.at(a.marker);
      (*a.correct ? correct_rows : incorrect_rows) += violin_row(a, e);
    }
    write_file(cfg.out() / "violin_correct.csv",
               comment + "\n" + violin_header + correct_rows);
    write_file(cfg.out() / "violin_incorrect.csv",
               comment + "\n" + violin_header + incorrect_rows);
  }

  // MIC stratified by response faithfulness (F >= 0.75 vs < 0.75).
  {
    bool any_decisiveness = false;
    for (const auto& a : ac.annotations)
      if (a.decisiveness) any_decisiveness = true;
    if (!any_decisiveness) {
      spdlog::warn(
          "report: no decisiveness scores; skipping faithfulness "
          "stratification files");
    } else {
      std::map<std::tuple<std::string, std::string, std::string>, double> f_by_response;
      std::map<std::string, std::vector<annotate::SentenceAnnotation>> by_dataset;
      for (const auto& a : ac.annotations)
        if (a.split == corpus::Split::train) by_dataset[a.dataset_id].push_back(a);
      for (const auto& [dataset, anns] : by_dataset) {
        std::map<std::string, std::vector<annotate::SentenceAnnotation>> by_query;
        for (const auto& a : anns) by_query[a.query_id].push_back(a);
        for (const auto& [query, sentences] : by_query) {
          const auto f = metrics::faithfulness(sentences);
          if (f)
            f_by_response[{sentences.front().model_id, dataset, query}] = f->f;
        }
      }
      std::string faithful_rows, unfaithful_rows;
      for (const auto& a : ac.annotations) {
        if (a.split != corpus::Split::train) continue;
        if (a.state == annotate::MarkerState::multi_discarded || !a.confidence)
          continue;
        auto fit = f_by_response.find({a.model_id, a.dataset_id, a.query_id});
        if (fit == f_by_response.end()) continue;
        auto it = table_by_dataset.find(a.dataset_id);
        if (it == table_by_dataset.end() || !it->second->contains(a.marker))
          continue;
        const auto& e = it->second->entries.at(a.marker);
        (fit->second >= 0.75 ? faithful_rows : unfaithful_rows) +=
            violin_row(a, e);
      }
      write_file(cfg.out() / "violin_faithful.csv",
                 comment + "\n" + violin_header + faithful_rows);
      write_file(cfg.out() / "violin_unfaithful.csv",
                 comment + "\n" + violin_header + unfaithful_rows);
    }
  }

  // Per-marker MIC vs mean |dec - conf| divergence.
  {
    std::string out = comment + "\nmodel_id,dataset_id,marker,mic,mf\n";
    for (const auto& id : dataset_ids(ac)) {
      auto it = table_by_dataset.find(id);
      if (it == table_by_dataset.end()) continue;
      std::vector<annotate::SentenceAnnotation> anns;
      for (const auto& a : ac.annotations)
        if (a.dataset_id == id && a.split == corpus::Split::train)
          anns.push_back(a);
      const auto mf = metrics::mf_divergence(anns);
      for (const auto& [marker, e] : it->second->entries) {
        auto mit = mf.find(marker);
        if (mit == mf.end()) continue;
        out += csv_escape(ac.model_id) + ',' + csv_escape(id) + ',' +
               csv_escape(marker) + ',' + format_double(e.mic) + ',' +
               format_double(mit->second) + '\n';
      }
    }
    write_file(cfg.out() / "mf_scatter.csv", out);
  }

  // (marker x dataset) MIC matrix, long form.
  {
    std::string out = comment + "\nmodel_id,dataset_id,marker,mic,std,support\n";
    for (const auto& t : tables) {
      for (const auto& [_, e] : t.entries) {
        out += csv_escape(t.model_id) + ',' + csv_escape(t.dataset_id) + ',' +
               csv_escape(e.marker) + ',' + format_double(e.mic) + ',' +
               format_double(e.std_dev) + ',' + std::to_string(e.support) + '\n';
      }
    }
    write_file(cfg.out() / "mic_heatmap.csv", out);
  }
}

}  // namespace miceval::pipeline
