#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "miceval/corpus.hpp"
#include "miceval/judge.hpp"
#include "miceval/segmenter.hpp"

namespace miceval::annotate {

/// Reserved pseudo-marker for sentences with no epistemic marker.
inline constexpr std::string_view kNoHedge = "<no_hedge>";

enum class MarkerState { no_hedge, single, multi_discarded };

std::string_view to_string(MarkerState s);
MarkerState marker_state_from_string(std::string_view s);

struct SentenceAnnotation {
  std::string model_id;
  std::string dataset_id;
  corpus::Split split = corpus::Split::train;
  std::string query_id;
  int sent_idx = 0;
  std::string text;
  MarkerState state = MarkerState::no_hedge;
  // Canonical marker; kNoHedge for unhedged sentences, empty when the
  // sentence was discarded for carrying several markers.
  std::string marker;
  std::optional<double> confidence;
  std::optional<double> decisiveness;
  std::optional<bool> correct;
  bool punt = false;
};

struct Diagnostics {
  std::size_t sentences_total = 0;
  std::size_t no_hedge = 0;
  std::size_t single = 0;
  std::size_t multi_discarded = 0;
  std::size_t excluded_error = 0;
  std::size_t decisiveness_failures = 0;
  std::size_t accuracy_failures = 0;
  // Extraction counts per sentence before the multi-marker discard; feeds
  // hedges_per_sentence.
  std::vector<int> raw_marker_counts;
  std::vector<std::string> error_reasons;  // capped at 100 entries
};

struct AnnotatedCorpus {
  std::string model_id;
  std::size_t k = 0;  // samples per response used for confidence
  std::vector<SentenceAnnotation> annotations;  // stably ordered
  Diagnostics diagnostics;
};

struct AnnotateOptions {
  bool score_decisiveness = true;
  bool score_accuracy = true;
  // Optional heuristic pre-pass: mark responses matching the refusal
  // pattern list as punts (ORed with the stored flag).
  bool detect_punts = false;
  double failure_ceiling = 0.01;  // excluded-sentence rate that fails the run
  int parallelism = 1;
};

/// conf = 1 - mean inconsistency over the K samples (yes/na/no -> 0/0.5/1).
/// Order of samples does not matter. Throws JudgeError when any sample's
/// verdict is unavailable after retries.
double intrinsic_confidence(std::string_view sentence,
                            std::span<const std::string> samples,
                            judge::Judge& j);

struct MarkerOutcome {
  MarkerState state = MarkerState::no_hedge;
  std::string canonical;  // set iff state == single
  int raw_count = 0;      // extracted markers before discard
};

/// extract -> standardize -> count distinct canonical forms:
/// 0 -> no_hedge, 1 -> single, >= 2 -> multi_discarded.
MarkerOutcome annotate_sentence(std::string_view text, judge::Judge& j);

AnnotatedCorpus annotate_corpus(const corpus::Corpus& c, judge::Judge& j,
                                const segmenter::SentenceSegmenter& seg,
                                const AnnotateOptions& opts = {});

/// Mean and population std of the pre-discard marker count per sentence.
/// Empty input yields (0, 0) with a warning.
std::pair<double, double> hedges_per_sentence(std::span<const int> counts);

/// Line-delimited annotation file. meta_line, when non-empty, is written
/// first and skipped on load.
void save_annotations(const AnnotatedCorpus& ac, const std::filesystem::path& path,
                      std::string_view meta_line = {});
AnnotatedCorpus load_annotations(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const SentenceAnnotation& a);
nlohmann::ordered_json to_json(const Diagnostics& d);

}  // namespace miceval::annotate
