#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miceval/annotate.hpp"
#include "miceval/mic.hpp"

namespace miceval::metrics {

enum class Aggregation { marker, sentence, response };
std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

/// The cross-domain MAE sums directed (D, D') evaluations; the paper
/// normalizes that sum by C(N_d, 2). directed_mean divides by the number
/// of evaluated directed pairs instead, which keeps cmae == imae when
/// every dataset behaves identically. paper_literal keeps the C(N_d, 2)
/// denominator.
enum class CmaeConvention { directed_mean, paper_literal };
std::string_view to_string(CmaeConvention c);

enum class CorrelationKind { pearson, spearman };

/// How a response-level confidence is reduced from its sentences'
/// confidences for CMFG binning.
enum class ConfReduction { mean, min, last_sentence };
std::string_view to_string(ConfReduction r);
ConfReduction conf_reduction_from_string(std::string_view s);

// --- Metric inputs ---------------------------------------------------------

struct EvalSentence {
  std::string marker;  // canonical (or <no_hedge>)
  double confidence = 0.0;
};

struct EvalResponse {
  std::vector<EvalSentence> sentences;
};

/// One dataset's train-side MIC table and test-side annotated responses.
struct DatasetEval {
  std::string dataset_id;
  mic::MicTable train_table;
  std::vector<EvalResponse> test_responses;
};

// --- MAE family ------------------------------------------------------------

struct MaeResult {
  double value = 0.0;
  std::optional<double> pooled_std;  // absent when no group has n >= 2
  std::size_t groups_used = 0;       // datasets (imae) or directed pairs (cmae)
  std::size_t groups_skipped = 0;
  std::size_t sentences_skipped = 0;  // marker unseen in the train table
};

MaeResult imae(std::span<const DatasetEval> datasets, Aggregation agg);
MaeResult cmae(std::span<const DatasetEval> datasets, Aggregation agg,
               CmaeConvention convention = CmaeConvention::directed_mean);

// --- CV family -------------------------------------------------------------

struct CvResult {
  double value = 0.0;
  std::size_t used = 0;     // markers (mcv) or datasets (dcv)
  std::size_t skipped = 0;  // degenerate contributions
};

/// Mean over shared markers of the CV of per-dataset MICs.
CvResult mcv(std::span<const mic::MicTable> tables);

/// Mean over datasets of the CV of all MICs within the dataset.
CvResult dcv(std::span<const mic::MicTable> tables);

// --- Rank family -----------------------------------------------------------

struct RankResult {
  double value = 0.0;
  std::size_t used = 0;     // dataset pairs (mrc) or markers (mac/mcc)
  std::size_t skipped = 0;
};

/// Fisher mean over dataset pairs of the Spearman correlation of
/// shared-marker MICs. Pairs with fewer than 3 shared markers or with
/// all-tied MICs are skipped and counted.
RankResult mrc(std::span<const mic::MicTable> tables);

/// Fisher mean over shared markers of the correlation between per-dataset
/// MICs and a per-dataset score vector (accuracy for MAC, CMFG for MCC).
/// min_shared_datasets == 0 demands markers shared by every table; a
/// positive value relaxes to markers present in at least that many tables
/// (correlated over the tables carrying them).
RankResult mac(std::span<const mic::MicTable> tables,
               std::span<const double> accuracies, CorrelationKind kind,
               std::size_t min_shared_datasets = 0);
RankResult mcc(std::span<const mic::MicTable> tables,
               std::span<const double> cmfg_values, CorrelationKind kind,
               std::size_t min_shared_datasets = 0);

// --- Faithfulness & CMFG ---------------------------------------------------

struct FaithfulnessScore {
  double f = 0.0;
  std::size_t sentences_used = 0;
};

/// F = 1 - mean |dec - conf| over the response's sentences carrying both
/// values; nullopt when no sentence qualifies.
std::optional<FaithfulnessScore> faithfulness(
    std::span<const annotate::SentenceAnnotation> response_sentences);

struct ResponseFaith {
  double response_conf = 0.0;
  double f = 0.0;
  bool punt = false;
};

/// Group annotations by response and derive (response confidence, F, punt)
/// triples. Responses without a usable F or confidence are dropped.
std::vector<ResponseFaith> response_faithfulness(
    std::span<const annotate::SentenceAnnotation> annotations,
    ConfReduction reduction = ConfReduction::mean);

/// Mean over non-empty bins of the bin's mean F; 10 equal-width confidence
/// bins on [0, 1], right-closed at 1.0. Punted responses are excluded;
/// all-punted input is an InsufficientDataError.
double cmfg(std::span<const ResponseFaith> responses);

/// Per-marker mean |dec - conf| over sentences carrying both values.
/// Markers with fewer than min_support usable sentences are omitted.
std::map<std::string, double> mf_divergence(
    std::span<const annotate::SentenceAnnotation> annotations,
    std::size_t min_support = 1);

// --- Assembled report ------------------------------------------------------

struct Cell {
  std::optional<double> value;
  std::optional<double> pooled_std;
  std::string note;  // absence reason or skip summary
};

struct MetricReport {
  std::string model_id;
  std::size_t threshold = 10;
  bool no_hedge_excluded = false;
  Aggregation primary_aggregation = Aggregation::marker;
  CmaeConvention cmae_convention = CmaeConvention::directed_mean;
  ConfReduction conf_reduction = ConfReduction::mean;

  Cell imae_marker, imae_sentence, imae_response;
  Cell cmae_marker, cmae_sentence, cmae_response;
  Cell mcv, dcv, mrc;
  Cell mac_pearson, mac_spearman, mcc_pearson, mcc_spearman;
  std::optional<double> delta_mrc;  // mrc(excluded) - mrc(baseline)

  std::map<std::string, double> accuracy_per_dataset;
  std::map<std::string, double> cmfg_per_dataset;
  std::map<std::string, std::size_t> skip_counts;
  std::vector<std::string> notes;

  const Cell& imae_cell() const;
  const Cell& cmae_cell() const;
};

struct ReportOptions {
  std::size_t threshold = 10;
  bool exclude_no_hedge = false;
  Aggregation aggregation = Aggregation::marker;
  CmaeConvention cmae_convention = CmaeConvention::directed_mean;
  ConfReduction conf_reduction = ConfReduction::mean;
  std::size_t mac_min_shared_datasets = 0;
};

/// Builds train MIC tables at the requested threshold and computes every
/// metric. Metrics that cannot be computed come back as absent cells with
/// a reason; the call itself only throws on structurally bad input.
MetricReport compute_report(
    std::span<const annotate::SentenceAnnotation> annotations,
    const ReportOptions& opts);

nlohmann::ordered_json to_json(const MetricReport& r);

/// Tabular export mirroring the main results layout: one row per report,
/// columns iMAE, cMAE, mCV, dCV, MRC (+ delta when present), MAC, MCC.
std::string reports_to_csv(std::span<const MetricReport> reports,
                           std::string_view comment_line = {});

}  // namespace miceval::metrics
