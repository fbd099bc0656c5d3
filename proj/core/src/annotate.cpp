#include "miceval/annotate.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <thread>
#include <tuple>

#include <spdlog/spdlog.h>

#include "miceval/errors.hpp"
#include "miceval/resources.hpp"
#include "miceval/stats.hpp"

namespace miceval::annotate {

using nlohmann::ordered_json;

std::string_view to_string(MarkerState s) {
  switch (s) {
    case MarkerState::no_hedge: return "no_hedge";
    case MarkerState::single: return "single";
    case MarkerState::multi_discarded: return "multi_discarded";
  }
  return "no_hedge";
}

MarkerState marker_state_from_string(std::string_view s) {
  if (s == "no_hedge") return MarkerState::no_hedge;
  if (s == "single") return MarkerState::single;
  if (s == "multi_discarded") return MarkerState::multi_discarded;
  throw ParseError("unknown marker_state: " + std::string(s));
}

double intrinsic_confidence(std::string_view sentence,
                            std::span<const std::string> samples,
                            judge::Judge& j) {
  if (samples.empty())
    throw ValidationError("intrinsic_confidence requires samples");
  double inconsistency = 0.0;
  for (const auto& sample : samples)
    inconsistency += judge::inconsistency_score(j.judge_consistency(sentence, sample));
  return 1.0 - inconsistency / static_cast<double>(samples.size());
}

MarkerOutcome annotate_sentence(std::string_view text, judge::Judge& j) {
  MarkerOutcome out;
  std::vector<std::string> extracted = j.extract_markers(text);
  out.raw_count = static_cast<int>(extracted.size());
  if (extracted.empty()) {
    out.state = MarkerState::no_hedge;
    return out;
  }
  // Deduplicate (standardization precondition), keeping first occurrence.
  std::vector<std::string> unique;
  for (auto& m : extracted) {
    if (std::find(unique.begin(), unique.end(), m) == unique.end())
      unique.push_back(std::move(m));
  }
  const auto mapping = j.standardize_markers(unique);
  std::set<std::string> canonicals;
  for (const auto& [_, canon] : mapping) canonicals.insert(canon);
  if (canonicals.size() == 1) {
    out.state = MarkerState::single;
    out.canonical = *canonicals.begin();
  } else {
    out.state = MarkerState::multi_discarded;
  }
  return out;
}

namespace {

bool matches_refusal(const std::string& response,
                     const std::vector<std::string>& patterns) {
  std::string lc(response);
  std::transform(lc.begin(), lc.end(), lc.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  for (const auto& p : patterns)
    if (lc.find(p) != std::string::npos) return true;
  return false;
}

void parallel_for(std::size_t n, int parallelism,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
        fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct SentenceTask {
  const corpus::ResponseRecord* response = nullptr;
  int sent_idx = 0;
  std::string text;
  bool punt = false;
};

struct SentenceResult {
  bool failed = false;
  std::string reason;
  MarkerOutcome marker;
  double confidence = 0.0;
  std::optional<double> decisiveness;
  bool decisiveness_failed = false;
};

}  // namespace

AnnotatedCorpus annotate_corpus(const corpus::Corpus& c, judge::Judge& j,
                                const segmenter::SentenceSegmenter& seg,
                                const AnnotateOptions& opts) {
  AnnotatedCorpus out;
  if (c.responses.empty()) {
    spdlog::warn("annotate_corpus: empty corpus");
    return out;
  }
  out.model_id = c.responses.front().model_id;
  out.k = c.responses.front().samples.size();

  std::vector<std::string> refusal_patterns;
  if (opts.detect_punts)
    refusal_patterns = resources::load_lines("refusal_patterns.txt");

  // Stable processing order regardless of input file order.
  std::vector<const corpus::ResponseRecord*> responses;
  responses.reserve(c.responses.size());
  for (const auto& r : c.responses) responses.push_back(&r);
  std::stable_sort(responses.begin(), responses.end(),
                   [](const auto* a, const auto* b) {
                     return std::tie(a->dataset_id, a->split, a->query_id,
                                     a->model_id) <
                            std::tie(b->dataset_id, b->split, b->query_id,
                                     b->model_id);
                   });

  std::vector<SentenceTask> tasks;
  for (const auto* r : responses) {
    const bool punt =
        r->punt || (opts.detect_punts &&
                    matches_refusal(r->response_text, refusal_patterns));
    int idx = 0;
    for (const auto& sentence : seg.sentences(r->response_text)) {
      tasks.push_back({r, idx++, sentence, punt});
    }
  }
  out.diagnostics.sentences_total = tasks.size();

  std::vector<SentenceResult> results(tasks.size());
  parallel_for(tasks.size(), opts.parallelism, [&](std::size_t i) {
    const auto& task = tasks[i];
    auto& res = results[i];
    try {
      res.marker = annotate_sentence(task.text, j);
      if (res.marker.state != MarkerState::multi_discarded) {
        res.confidence =
            intrinsic_confidence(task.text, task.response->samples, j);
      }
      if (opts.score_decisiveness) {
        try {
          res.decisiveness = j.judge_decisiveness(task.text);
        } catch (const JudgeParseError& e) {
          res.decisiveness_failed = true;
          spdlog::warn("decisiveness unavailable for sentence: {}", e.what());
        }
      }
    } catch (const JudgeError& e) {
      res.failed = true;
      res.reason = e.what();
    }
  });

  // Response-level accuracy, stamped onto each of its sentences.
  std::map<const corpus::ResponseRecord*, std::optional<bool>> correct;
  if (opts.score_accuracy) {
    for (const auto* r : responses) {
      const auto* q = c.find_query(*r);
      if (!q || q->gold_answers.empty()) {
        correct[r] = std::nullopt;  // no gold: accuracy not defined
        continue;
      }
      try {
        correct[r] = j.judge_accuracy(r->response_text, q->gold_answers);
      } catch (const JudgeError& e) {
        correct[r] = std::nullopt;
        ++out.diagnostics.accuracy_failures;
        spdlog::warn("accuracy unavailable for {}/{}: {}", r->dataset_id,
                     r->query_id, e.what());
      }
    }
  }

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    auto& res = results[i];
    if (res.failed) {
      ++out.diagnostics.excluded_error;
      if (out.diagnostics.error_reasons.size() < 100)
        out.diagnostics.error_reasons.push_back(res.reason);
      continue;
    }
    out.diagnostics.raw_marker_counts.push_back(res.marker.raw_count);
    if (res.decisiveness_failed) ++out.diagnostics.decisiveness_failures;

    SentenceAnnotation a;
    a.model_id = task.response->model_id;
    a.dataset_id = task.response->dataset_id;
    a.split = task.response->split;
    a.query_id = task.response->query_id;
    a.sent_idx = task.sent_idx;
    a.text = task.text;
    a.state = res.marker.state;
    a.punt = task.punt;
    switch (res.marker.state) {
      case MarkerState::no_hedge:
        ++out.diagnostics.no_hedge;
        a.marker = std::string(kNoHedge);
        a.confidence = res.confidence;
        break;
      case MarkerState::single:
        ++out.diagnostics.single;
        a.marker = res.marker.canonical;
        a.confidence = res.confidence;
        break;
      case MarkerState::multi_discarded:
        ++out.diagnostics.multi_discarded;
        break;
    }
    a.decisiveness = res.decisiveness;
    if (opts.score_accuracy) a.correct = correct[task.response];
    out.annotations.push_back(std::move(a));
  }

  if (out.diagnostics.sentences_total > 0) {
    const double rate =
        static_cast<double>(out.diagnostics.excluded_error) /
        static_cast<double>(out.diagnostics.sentences_total);
    if (rate > opts.failure_ceiling) {
      throw AnnotationError(
          "judge failure rate " + std::to_string(rate) + " exceeds ceiling " +
          std::to_string(opts.failure_ceiling) + " (" +
          std::to_string(out.diagnostics.excluded_error) + "/" +
          std::to_string(out.diagnostics.sentences_total) + " sentences)");
    }
  }
  return out;
}

std::pair<double, double> hedges_per_sentence(std::span<const int> counts) {
  if (counts.empty()) {
    spdlog::warn("hedges_per_sentence: no sentences");
    return {0.0, 0.0};
  }
  std::vector<double> xs(counts.begin(), counts.end());
  return {stats::mean(xs), stats::population_std(xs)};
}

ordered_json to_json(const SentenceAnnotation& a) {
  ordered_json j;
  j["model_id"] = a.model_id;
  j["dataset_id"] = a.dataset_id;
  j["split"] = corpus::to_string(a.split);
  j["query_id"] = a.query_id;
  j["sent_idx"] = a.sent_idx;
  j["text"] = a.text;
  j["marker_state"] = to_string(a.state);
  j["marker"] = a.marker;
  if (a.confidence)
    j["confidence"] = *a.confidence;
  else
    j["confidence"] = nullptr;
  if (a.decisiveness) j["decisiveness"] = *a.decisiveness;
  if (a.correct) j["correct"] = *a.correct;
  j["punt"] = a.punt;
  return j;
}

ordered_json to_json(const Diagnostics& d) {
  ordered_json j;
  j["sentences_total"] = d.sentences_total;
  j["no_hedge"] = d.no_hedge;
  j["single"] = d.single;
  j["multi_discarded"] = d.multi_discarded;
  j["excluded_error"] = d.excluded_error;
  j["decisiveness_failures"] = d.decisiveness_failures;
  j["accuracy_failures"] = d.accuracy_failures;
  const auto [mean, sd] = hedges_per_sentence(d.raw_marker_counts);
  j["hedges_per_sentence_mean"] = mean;
  j["hedges_per_sentence_std"] = sd;
  j["error_reasons"] = d.error_reasons;
  return j;
}

void save_annotations(const AnnotatedCorpus& ac,
                      const std::filesystem::path& path,
                      std::string_view meta_line) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write annotation file: " + path.string());
  if (!meta_line.empty()) out << meta_line << '\n';
  for (const auto& a : ac.annotations) out << to_json(a).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

AnnotatedCorpus load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open annotation file: " + path.string());
  AnnotatedCorpus ac;
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
    SentenceAnnotation a;
    a.model_id = j.at("model_id").get<std::string>();
    a.dataset_id = j.at("dataset_id").get<std::string>();
    a.split = corpus::split_from_string(j.at("split").get<std::string>());
    a.query_id = j.at("query_id").get<std::string>();
    a.sent_idx = j.at("sent_idx").get<int>();
    a.text = j.at("text").get<std::string>();
    a.state = marker_state_from_string(j.at("marker_state").get<std::string>());
    a.marker = j.value("marker", std::string{});
    if (j.contains("confidence") && !j["confidence"].is_null())
      a.confidence = j["confidence"].get<double>();
    if (j.contains("decisiveness") && !j["decisiveness"].is_null())
      a.decisiveness = j["decisiveness"].get<double>();
    if (j.contains("correct") && !j["correct"].is_null())
      a.correct = j["correct"].get<bool>();
    a.punt = j.value("punt", false);
    if (ac.model_id.empty()) ac.model_id = a.model_id;
    ac.annotations.push_back(std::move(a));
  }
  return ac;
}

}  // namespace miceval::annotate
