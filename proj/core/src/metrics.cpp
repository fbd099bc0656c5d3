#include "miceval/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <tuple>

#include <spdlog/spdlog.h>

#include "miceval/errors.hpp"
#include "miceval/stats.hpp"

namespace miceval::metrics {

using nlohmann::ordered_json;

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::marker: return "marker";
    case Aggregation::sentence: return "sentence";
    case Aggregation::response: return "response";
  }
  return "marker";
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "marker") return Aggregation::marker;
  if (s == "sentence") return Aggregation::sentence;
  if (s == "response") return Aggregation::response;
  throw ConfigError("unknown aggregation: " + std::string(s));
}

std::string_view to_string(CmaeConvention c) {
  return c == CmaeConvention::directed_mean ? "directed_mean" : "paper_literal";
}

std::string_view to_string(ConfReduction r) {
  switch (r) {
    case ConfReduction::mean: return "mean";
    case ConfReduction::min: return "min";
    case ConfReduction::last_sentence: return "last_sentence";
  }
  return "mean";
}

ConfReduction conf_reduction_from_string(std::string_view s) {
  if (s == "mean") return ConfReduction::mean;
  if (s == "min") return ConfReduction::min;
  if (s == "last_sentence") return ConfReduction::last_sentence;
  throw ConfigError("unknown conf reduction: " + std::string(s));
}

// --- MAE family ------------------------------------------------------------

namespace {

// Unit-level absolute errors for scoring `responses` against `table`:
// per-marker means, per-sentence errors, or per-response means depending
// on the aggregation. Sentences whose marker has no table entry are
// skipped and counted.
std::vector<double> mae_units(const mic::MicTable& table,
                              std::span<const EvalResponse> responses,
                              Aggregation agg,
                              std::size_t& sentences_skipped) {
  std::vector<double> units;
  std::map<std::string, std::vector<double>> by_marker;
  for (const auto& response : responses) {
    std::vector<double> response_errors;
    for (const auto& s : response.sentences) {
      auto it = table.entries.find(s.marker);
      if (it == table.entries.end()) {
        ++sentences_skipped;
        continue;
      }
      const double err = std::abs(it->second.mic - s.confidence);
      switch (agg) {
        case Aggregation::marker:
          by_marker[s.marker].push_back(err);
          break;
        case Aggregation::sentence:
          units.push_back(err);
          break;
        case Aggregation::response:
          response_errors.push_back(err);
          break;
      }
    }
    if (agg == Aggregation::response && !response_errors.empty())
      units.push_back(stats::mean(response_errors));
  }
  if (agg == Aggregation::marker) {
    for (const auto& [_, errors] : by_marker)
      units.push_back(stats::mean(errors));
  }
  return units;
}

struct GroupAccumulator {
  std::vector<double> group_means;
  std::vector<stats::GroupStd> pooled_groups;
  std::size_t skipped = 0;

  void add(const std::vector<double>& units) {
    if (units.empty()) {
      ++skipped;
      return;
    }
    group_means.push_back(stats::mean(units));
    if (units.size() >= 2)
      pooled_groups.push_back({units.size(), stats::sample_std(units)});
  }

  std::optional<double> pooled() const {
    if (pooled_groups.empty()) return std::nullopt;
    return stats::pooled_std(pooled_groups);
  }
};

}  // namespace

MaeResult imae(std::span<const DatasetEval> datasets, Aggregation agg) {
  if (datasets.empty())
    throw InsufficientDataError("imae: no dataset with both splits");
  MaeResult out;
  GroupAccumulator acc;
  for (const auto& d : datasets)
    acc.add(mae_units(d.train_table, d.test_responses, agg,
                      out.sentences_skipped));
  if (acc.group_means.empty())
    throw InsufficientDataError("imae: no dataset produced a scoreable unit");
  out.value = stats::mean(acc.group_means);
  out.pooled_std = acc.pooled();
  out.groups_used = acc.group_means.size();
  out.groups_skipped = acc.skipped;
  return out;
}

MaeResult cmae(std::span<const DatasetEval> datasets, Aggregation agg,
               CmaeConvention convention) {
  if (datasets.size() < 2)
    throw InsufficientDataError("cmae: needs >= 2 eligible datasets");
  MaeResult out;
  GroupAccumulator acc;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    for (std::size_t j = 0; j < datasets.size(); ++j) {
      if (i == j) continue;
      acc.add(mae_units(datasets[i].train_table, datasets[j].test_responses,
                        agg, out.sentences_skipped));
    }
  }
  if (acc.group_means.empty())
    throw InsufficientDataError("cmae: no dataset pair produced a unit");
  double total = 0.0;
  for (double m : acc.group_means) total += m;
  if (convention == CmaeConvention::directed_mean) {
    out.value = total / static_cast<double>(acc.group_means.size());
  } else {
    const double n = static_cast<double>(datasets.size());
    out.value = total / (n * (n - 1.0) / 2.0);
  }
  out.pooled_std = acc.pooled();
  out.groups_used = acc.group_means.size();
  out.groups_skipped = acc.skipped;
  return out;
}

// --- CV family -------------------------------------------------------------

CvResult mcv(std::span<const mic::MicTable> tables) {
  if (tables.size() < 2)
    throw InsufficientDataError("mcv: needs >= 2 datasets");
  const auto shared = mic::shared_markers(tables);
  if (shared.empty())
    throw InsufficientDataError("mcv: no marker shared by all datasets");
  CvResult out;
  std::vector<double> cvs;
  for (const auto& marker : shared) {
    std::vector<double> mics;
    mics.reserve(tables.size());
    for (const auto& t : tables) mics.push_back(t.entries.at(marker).mic);
    try {
      cvs.push_back(stats::cv(mics));
    } catch (const UndefinedStatError&) {
      ++out.skipped;  // zero-mean MIC vector
    }
  }
  if (cvs.empty())
    throw InsufficientDataError("mcv: every shared marker was degenerate");
  out.value = stats::mean(cvs);
  out.used = cvs.size();
  return out;
}

CvResult dcv(std::span<const mic::MicTable> tables) {
  if (tables.empty()) throw InsufficientDataError("dcv: no datasets");
  CvResult out;
  std::vector<double> cvs;
  for (const auto& t : tables) {
    if (t.entries.size() < 2) {
      ++out.skipped;
      continue;
    }
    std::vector<double> mics;
    mics.reserve(t.entries.size());
    for (const auto& [_, e] : t.entries) mics.push_back(e.mic);
    try {
      cvs.push_back(stats::cv(mics));
    } catch (const UndefinedStatError&) {
      ++out.skipped;
    }
  }
  if (cvs.empty())
    throw InsufficientDataError("dcv: no dataset with >= 2 markers");
  out.value = stats::mean(cvs);
  out.used = cvs.size();
  return out;
}

// --- Rank family -----------------------------------------------------------

RankResult mrc(std::span<const mic::MicTable> tables) {
  if (tables.size() < 2)
    throw InsufficientDataError("mrc: needs >= 2 datasets");
  RankResult out;
  std::vector<double> correlations;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    for (std::size_t j = i + 1; j < tables.size(); ++j) {
      std::vector<std::string> shared;
      for (const auto& [marker, _] : tables[i].entries)
        if (tables[j].contains(marker)) shared.push_back(marker);
      if (shared.size() < 3) {
        ++out.skipped;
        continue;
      }
      std::vector<double> xs, ys;
      xs.reserve(shared.size());
      ys.reserve(shared.size());
      for (const auto& marker : shared) {
        xs.push_back(tables[i].entries.at(marker).mic);
        ys.push_back(tables[j].entries.at(marker).mic);
      }
      try {
        correlations.push_back(stats::spearman(xs, ys));
      } catch (const UndefinedStatError&) {
        ++out.skipped;  // all-tied MICs on one side
      }
    }
  }
  if (correlations.empty())
    throw InsufficientDataError("mrc: no dataset pair with >= 3 shared markers");
  out.value = stats::fisher_mean(correlations);
  out.used = correlations.size();
  return out;
}

namespace {

RankResult marker_score_correlation(std::span<const mic::MicTable> tables,
                                    std::span<const double> scores,
                                    CorrelationKind kind,
                                    std::size_t min_shared_datasets,
                                    std::string_view what) {
  if (tables.size() != scores.size())
    throw ValidationError(std::string(what) +
                          ": table/score vector length mismatch");
  if (tables.size() < 3)
    throw InsufficientDataError(std::string(what) + ": needs >= 3 datasets");

  const std::size_t required = min_shared_datasets == 0
                                   ? tables.size()
                                   : std::max<std::size_t>(min_shared_datasets, 3);
  std::map<std::string, std::vector<std::size_t>> presence;
  for (std::size_t i = 0; i < tables.size(); ++i)
    for (const auto& [marker, _] : tables[i].entries)
      presence[marker].push_back(i);

  RankResult out;
  std::vector<double> correlations;
  for (const auto& [marker, idxs] : presence) {
    if (idxs.size() < required) continue;
    std::vector<double> mics, ys;
    mics.reserve(idxs.size());
    ys.reserve(idxs.size());
    for (std::size_t i : idxs) {
      mics.push_back(tables[i].entries.at(marker).mic);
      ys.push_back(scores[i]);
    }
    try {
      correlations.push_back(kind == CorrelationKind::pearson
                                 ? stats::pearson(mics, ys)
                                 : stats::spearman(mics, ys));
    } catch (const UndefinedStatError&) {
      ++out.skipped;  // zero-variance MIC or score vector
    }
  }
  if (correlations.empty())
    throw InsufficientDataError(std::string(what) +
                                ": no shared marker with usable variance");
  out.value = stats::fisher_mean(correlations);
  out.used = correlations.size();
  return out;
}

}  // namespace

RankResult mac(std::span<const mic::MicTable> tables,
               std::span<const double> accuracies, CorrelationKind kind,
               std::size_t min_shared_datasets) {
  return marker_score_correlation(tables, accuracies, kind,
                                  min_shared_datasets, "mac");
}

RankResult mcc(std::span<const mic::MicTable> tables,
               std::span<const double> cmfg_values, CorrelationKind kind,
               std::size_t min_shared_datasets) {
  return marker_score_correlation(tables, cmfg_values, kind,
                                  min_shared_datasets, "mcc");
}

// --- Faithfulness & CMFG ---------------------------------------------------

std::optional<FaithfulnessScore> faithfulness(
    std::span<const annotate::SentenceAnnotation> response_sentences) {
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& s : response_sentences) {
    if (!s.confidence || !s.decisiveness) continue;
    total += std::abs(*s.decisiveness - *s.confidence);
    ++used;
  }
  if (used == 0) return std::nullopt;
  return FaithfulnessScore{1.0 - total / static_cast<double>(used), used};
}

std::vector<ResponseFaith> response_faithfulness(
    std::span<const annotate::SentenceAnnotation> annotations,
    ConfReduction reduction) {
  using Key = std::tuple<std::string, std::string, corpus::Split, std::string>;
  std::map<Key, std::vector<const annotate::SentenceAnnotation*>> groups;
  for (const auto& a : annotations)
    groups[{a.model_id, a.dataset_id, a.split, a.query_id}].push_back(&a);

  std::vector<ResponseFaith> out;
  for (const auto& [_, sentences] : groups) {
    std::vector<annotate::SentenceAnnotation> copy;
    copy.reserve(sentences.size());
    for (const auto* s : sentences) copy.push_back(*s);
    std::sort(copy.begin(), copy.end(),
              [](const auto& a, const auto& b) { return a.sent_idx < b.sent_idx; });

    std::vector<double> confs;
    bool punt = false;
    for (const auto& s : copy) {
      if (s.confidence) confs.push_back(*s.confidence);
      punt = punt || s.punt;
    }
    const auto f = faithfulness(copy);
    if (!f || confs.empty()) continue;

    ResponseFaith rf;
    rf.f = f->f;
    rf.punt = punt;
    switch (reduction) {
      case ConfReduction::mean:
        rf.response_conf = stats::mean(confs);
        break;
      case ConfReduction::min:
        rf.response_conf = *std::min_element(confs.begin(), confs.end());
        break;
      case ConfReduction::last_sentence:
        rf.response_conf = confs.back();
        break;
    }
    out.push_back(rf);
  }
  return out;
}

double cmfg(std::span<const ResponseFaith> responses) {
  std::array<double, 10> bin_sum{};
  std::array<std::size_t, 10> bin_count{};
  std::size_t usable = 0;
  for (const auto& r : responses) {
    if (r.punt) continue;
    const auto bin = std::min<std::size_t>(
        9, static_cast<std::size_t>(std::floor(r.response_conf * 10.0)));
    bin_sum[bin] += r.f;
    ++bin_count[bin];
    ++usable;
  }
  if (usable == 0)
    throw InsufficientDataError("cmfg: no non-punted response with F");
  double total = 0.0;
  std::size_t bins = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    if (bin_count[b] == 0) continue;
    total += bin_sum[b] / static_cast<double>(bin_count[b]);
    ++bins;
  }
  return total / static_cast<double>(bins);
}

std::map<std::string, double> mf_divergence(
    std::span<const annotate::SentenceAnnotation> annotations,
    std::size_t min_support) {
  std::map<std::string, std::vector<double>> diffs;
  for (const auto& a : annotations) {
    if (a.state == annotate::MarkerState::multi_discarded) continue;
    if (!a.confidence || !a.decisiveness) continue;
    diffs[a.marker].push_back(std::abs(*a.decisiveness - *a.confidence));
  }
  std::map<std::string, double> out;
  for (const auto& [marker, values] : diffs) {
    if (values.size() < std::max<std::size_t>(min_support, 1)) continue;
    out[marker] = stats::mean(values);
  }
  return out;
}

// --- Assembled report ------------------------------------------------------

const Cell& MetricReport::imae_cell() const {
  switch (primary_aggregation) {
    case Aggregation::marker: return imae_marker;
    case Aggregation::sentence: return imae_sentence;
    case Aggregation::response: return imae_response;
  }
  return imae_marker;
}

const Cell& MetricReport::cmae_cell() const {
  switch (primary_aggregation) {
    case Aggregation::marker: return cmae_marker;
    case Aggregation::sentence: return cmae_sentence;
    case Aggregation::response: return cmae_response;
  }
  return cmae_marker;
}

namespace {

bool eligible(const annotate::SentenceAnnotation& a) {
  return a.state != annotate::MarkerState::multi_discarded &&
         a.confidence.has_value();
}

}  // namespace

MetricReport compute_report(
    std::span<const annotate::SentenceAnnotation> annotations,
    const ReportOptions& opts) {
  MetricReport report;
  report.threshold = opts.threshold;
  report.no_hedge_excluded = opts.exclude_no_hedge;
  report.primary_aggregation = opts.aggregation;
  report.cmae_convention = opts.cmae_convention;
  report.conf_reduction = opts.conf_reduction;

  // Partition by dataset and split (lexicographic dataset order).
  std::map<std::string, std::vector<annotate::SentenceAnnotation>> train, test;
  for (const auto& a : annotations) {
    if (report.model_id.empty()) report.model_id = a.model_id;
    if (a.split == corpus::Split::train)
      train[a.dataset_id].push_back(a);
    else
      test[a.dataset_id].push_back(a);
  }

  // Train-side MIC tables.
  std::vector<mic::MicTable> baseline_tables;
  for (const auto& [dataset_id, anns] : train) {
    std::vector<annotate::SentenceAnnotation> usable;
    for (const auto& a : anns)
      if (eligible(a)) usable.push_back(a);
    baseline_tables.push_back(mic::build_mic_table(
        usable, opts.threshold, report.model_id, dataset_id,
        corpus::Split::train));
  }
  std::vector<mic::MicTable> tables;
  tables.reserve(baseline_tables.size());
  for (const auto& t : baseline_tables)
    tables.push_back(opts.exclude_no_hedge ? mic::exclude_no_hedge(t) : t);

  // Datasets with both splits feed the MAE metrics.
  std::vector<DatasetEval> evals;
  for (const auto& t : tables) {
    auto it = test.find(t.dataset_id);
    if (it == test.end()) continue;
    DatasetEval d;
    d.dataset_id = t.dataset_id;
    d.train_table = t;
    std::map<std::string, EvalResponse> by_query;
    for (const auto& a : it->second) {
      if (!eligible(a)) continue;
      by_query[a.query_id].sentences.push_back({a.marker, *a.confidence});
    }
    for (auto& [_, r] : by_query) d.test_responses.push_back(std::move(r));
    evals.push_back(std::move(d));
  }
  if (evals.size() < train.size())
    report.notes.push_back(
        std::to_string(train.size() - evals.size()) +
        " dataset(s) lack a test split and are excluded from MAE metrics");

  auto run_mae = [&](Cell& cell, auto&& fn) {
    try {
      MaeResult r = fn();
      cell.value = r.value;
      cell.pooled_std = r.pooled_std;
    } catch (const Error& e) {
      cell.note = e.what();
    }
  };
  std::size_t imae_skipped = 0, cmae_skipped = 0;
  run_mae(report.imae_marker, [&] {
    auto r = imae(evals, Aggregation::marker);
    imae_skipped = r.sentences_skipped;
    return r;
  });
  run_mae(report.imae_sentence, [&] { return imae(evals, Aggregation::sentence); });
  run_mae(report.imae_response, [&] { return imae(evals, Aggregation::response); });
  run_mae(report.cmae_marker, [&] {
    auto r = cmae(evals, Aggregation::marker, opts.cmae_convention);
    cmae_skipped = r.sentences_skipped;
    return r;
  });
  run_mae(report.cmae_sentence,
          [&] { return cmae(evals, Aggregation::sentence, opts.cmae_convention); });
  run_mae(report.cmae_response,
          [&] { return cmae(evals, Aggregation::response, opts.cmae_convention); });
  report.skip_counts["imae_test_sentences_without_train_mic"] = imae_skipped;
  report.skip_counts["cmae_test_sentences_without_train_mic"] = cmae_skipped;

  auto run_cell = [&](Cell& cell, auto&& fn, const char* skip_key) {
    try {
      auto r = fn();
      cell.value = r.value;
      report.skip_counts[skip_key] += r.skipped;
    } catch (const Error& e) {
      cell.note = e.what();
    }
  };
  run_cell(report.mcv, [&] { return mcv(tables); }, "mcv_markers_skipped");
  run_cell(report.dcv, [&] { return dcv(tables); }, "dcv_datasets_skipped");
  run_cell(report.mrc, [&] { return mrc(tables); }, "mrc_pairs_skipped");

  if (opts.exclude_no_hedge) {
    try {
      const double base = mrc(baseline_tables).value;
      if (report.mrc.value)
        report.delta_mrc = *report.mrc.value - base;
      else
        report.notes.push_back("delta_mrc unavailable: excluded MRC absent");
    } catch (const Error& e) {
      report.notes.push_back(std::string("delta_mrc unavailable: ") + e.what());
    }
  }

  // Per-dataset accuracy over train responses (first sentence carries the
  // response-level verdict).
  for (const auto& [dataset_id, anns] : train) {
    std::map<std::string, std::optional<bool>> per_query;
    for (const auto& a : anns) {
      if (!per_query.contains(a.query_id)) per_query[a.query_id] = a.correct;
    }
    double correct = 0.0;
    std::size_t n = 0;
    for (const auto& [_, c] : per_query) {
      if (!c) continue;
      correct += *c ? 1.0 : 0.0;
      ++n;
    }
    if (n > 0)
      report.accuracy_per_dataset[dataset_id] =
          correct / static_cast<double>(n);
  }

  // Per-dataset faithful-calibration level over train responses.
  for (const auto& [dataset_id, anns] : train) {
    try {
      const auto rf = response_faithfulness(anns, opts.conf_reduction);
      report.cmfg_per_dataset[dataset_id] = cmfg(rf);
    } catch (const Error& e) {
      report.notes.push_back("cmfg(" + dataset_id + ") unavailable: " + e.what());
    }
  }

  auto correlate = [&](Cell& cell, const std::map<std::string, double>& scores,
                       CorrelationKind kind, std::string_view what) {
    std::vector<mic::MicTable> subset;
    std::vector<double> values;
    for (const auto& t : tables) {
      auto it = scores.find(t.dataset_id);
      if (it == scores.end()) continue;
      subset.push_back(t);
      values.push_back(it->second);
    }
    try {
      RankResult r = what == "mac"
                         ? mac(subset, values, kind, opts.mac_min_shared_datasets)
                         : mcc(subset, values, kind, opts.mac_min_shared_datasets);
      cell.value = r.value;
      report.skip_counts[std::string(what) + "_markers_skipped"] += r.skipped;
    } catch (const Error& e) {
      cell.note = e.what();
    }
  };
  correlate(report.mac_pearson, report.accuracy_per_dataset,
            CorrelationKind::pearson, "mac");
  correlate(report.mac_spearman, report.accuracy_per_dataset,
            CorrelationKind::spearman, "mac");
  correlate(report.mcc_pearson, report.cmfg_per_dataset,
            CorrelationKind::pearson, "mcc");
  correlate(report.mcc_spearman, report.cmfg_per_dataset,
            CorrelationKind::spearman, "mcc");

  return report;
}

namespace {

ordered_json cell_json(const Cell& c) {
  ordered_json j;
  j["value"] = c.value ? ordered_json(*c.value) : ordered_json(nullptr);
  if (c.pooled_std) j["pooled_std"] = *c.pooled_std;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

std::string cell_csv(const Cell& c) {
  return c.value ? format_double(*c.value) : std::string{};
}

}  // namespace

ordered_json to_json(const MetricReport& r) {
  ordered_json j;
  j["model_id"] = r.model_id;
  j["T"] = r.threshold;
  j["no_hedge_excluded"] = r.no_hedge_excluded;
  j["aggregation"] = to_string(r.primary_aggregation);
  j["cmae_convention"] = to_string(r.cmae_convention);
  j["conf_reduction"] = to_string(r.conf_reduction);
  j["imae"] = cell_json(r.imae_marker);
  j["imae_sentence"] = cell_json(r.imae_sentence);
  j["imae_response"] = cell_json(r.imae_response);
  j["cmae"] = cell_json(r.cmae_marker);
  j["cmae_sentence"] = cell_json(r.cmae_sentence);
  j["cmae_response"] = cell_json(r.cmae_response);
  j["mcv"] = cell_json(r.mcv);
  j["dcv"] = cell_json(r.dcv);
  j["mrc"] = cell_json(r.mrc);
  if (r.delta_mrc) j["delta_mrc"] = *r.delta_mrc;
  j["mac"] = cell_json(r.mac_pearson);
  j["mac_spearman"] = cell_json(r.mac_spearman);
  j["mcc"] = cell_json(r.mcc_pearson);
  j["mcc_spearman"] = cell_json(r.mcc_spearman);
  j["accuracy_per_dataset"] = r.accuracy_per_dataset;
  j["cmfg_per_dataset"] = r.cmfg_per_dataset;
  j["skip_counts"] = r.skip_counts;
  j["notes"] = r.notes;
  return j;
}

std::string reports_to_csv(std::span<const MetricReport> reports,
                           std::string_view comment_line) {
  std::string out;
  if (!comment_line.empty()) {
    out += comment_line;
    out += '\n';
  }
  bool any_delta = false;
  for (const auto& r : reports) any_delta = any_delta || r.delta_mrc.has_value();
  out += "model,T,imae,cmae,mcv,dcv,mrc";
  if (any_delta) out += ",delta_mrc";
  out += ",mac,mcc\n";
  for (const auto& r : reports) {
    out += r.model_id;
    out += ',' + std::to_string(r.threshold);
    out += ',' + cell_csv(r.imae_cell());
    out += ',' + cell_csv(r.cmae_cell());
    out += ',' + cell_csv(r.mcv);
    out += ',' + cell_csv(r.dcv);
    out += ',' + cell_csv(r.mrc);
    if (any_delta)
      out += ',' + (r.delta_mrc ? format_double(*r.delta_mrc) : std::string{});
    out += ',' + cell_csv(r.mac_pearson);
    out += ',' + cell_csv(r.mcc_pearson);
    out += '\n';
  }
  return out;
}

}  // namespace miceval::metrics
