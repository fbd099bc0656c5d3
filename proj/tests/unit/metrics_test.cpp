#include "miceval/metrics.hpp"

#include <cmath>

#include <doctest.h>

#include "miceval/errors.hpp"
#include "miceval/stats.hpp"

using namespace miceval;
using metrics::Aggregation;

namespace {

mic::MicTable table_of(const std::string& dataset,
                       std::vector<std::pair<std::string, double>> entries,
                       std::size_t threshold = 1) {
  mic::MicTable t;
  t.model_id = "m";
  t.dataset_id = dataset;
  t.threshold = threshold;
  for (const auto& [marker, value] : entries)
    t.entries[marker] = {marker, value, 10, 0.0};
  return t;
}

metrics::DatasetEval eval_of(
    const std::string& dataset,
    std::vector<std::pair<std::string, double>> train_mics,
    std::vector<std::vector<std::pair<std::string, double>>> responses) {
  metrics::DatasetEval d;
  d.dataset_id = dataset;
  d.train_table = table_of(dataset, std::move(train_mics));
  for (const auto& response : responses) {
    metrics::EvalResponse r;
    for (const auto& [marker, conf] : response)
      r.sentences.push_back({marker, conf});
    d.test_responses.push_back(std::move(r));
  }
  return d;
}

annotate::SentenceAnnotation sent(const std::string& query, int idx,
                                  double conf, double dec, bool punt = false) {
  annotate::SentenceAnnotation a;
  a.model_id = "m";
  a.dataset_id = "ds";
  a.split = corpus::Split::train;
  a.query_id = query;
  a.sent_idx = idx;
  a.state = annotate::MarkerState::single;
  a.marker = "likely";
  a.confidence = conf;
  a.decisiveness = dec;
  a.punt = punt;
  return a;
}

}  // namespace

TEST_CASE("imae: one dataset, one marker, hand arithmetic") {
  std::vector<metrics::DatasetEval> evals{
      eval_of("d1", {{"E", 0.7}}, {{{"E", 0.6}}, {{"E", 0.8}}})};
  const auto r = metrics::imae(evals, Aggregation::marker);
  CHECK(r.value == doctest::Approx(0.1).epsilon(1e-12));

  // perfect transfer
  std::vector<metrics::DatasetEval> perfect{
      eval_of("d1", {{"E", 0.7}}, {{{"E", 0.7}}, {{"E", 0.7}}})};
  CHECK(metrics::imae(perfect, Aggregation::marker).value ==
        doctest::Approx(0.0));
}

TEST_CASE("imae: marker vs sentence aggregation frequency bias") {
  // marker A: one sentence, |err| 0.1; marker B: three sentences, |err| 0.3
  std::vector<metrics::DatasetEval> evals{eval_of(
      "d1", {{"A", 0.5}, {"B", 0.5}},
      {{{"A", 0.6}}, {{"B", 0.8}}, {{"B", 0.8}}, {{"B", 0.8}}})};
  CHECK(metrics::imae(evals, Aggregation::marker).value ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK(metrics::imae(evals, Aggregation::sentence).value ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("imae: duplicating a sentence moves sentence aggregation only") {
  // marker E errors [0.1, 0.1]; marker F error [0.3]
  auto base = eval_of("d1", {{"E", 0.5}, {"F", 0.5}},
                      {{{"E", 0.6}}, {{"E", 0.6}}, {{"F", 0.8}}});
  std::vector<metrics::DatasetEval> before{base};
  auto duplicated = base;
  duplicated.test_responses.push_back({{{"E", 0.6}}});
  std::vector<metrics::DatasetEval> after{duplicated};

  CHECK(metrics::imae(before, Aggregation::marker).value ==
        doctest::Approx(metrics::imae(after, Aggregation::marker).value));
  CHECK(metrics::imae(before, Aggregation::sentence).value >
        metrics::imae(after, Aggregation::sentence).value);
}

TEST_CASE("imae: unseen markers are skipped and counted") {
  std::vector<metrics::DatasetEval> evals{
      eval_of("d1", {{"E", 0.7}}, {{{"E", 0.6}, {"ghost", 0.2}}})};
  const auto r = metrics::imae(evals, Aggregation::marker);
  CHECK(r.value == doctest::Approx(0.1));
  CHECK(r.sentences_skipped == 1);

  std::vector<metrics::DatasetEval> none;
  CHECK_THROWS_AS(metrics::imae(none, Aggregation::marker),
                  InsufficientDataError);
}

TEST_CASE("cmae: identical datasets make cmae equal imae") {
  auto d1 = eval_of("d1", {{"E", 0.7}}, {{{"E", 0.6}}, {{"E", 0.8}}});
  auto d2 = eval_of("d2", {{"E", 0.7}}, {{{"E", 0.6}}, {{"E", 0.8}}});
  std::vector<metrics::DatasetEval> evals{d1, d2};
  const double i = metrics::imae(evals, Aggregation::marker).value;
  const double c = metrics::cmae(evals, Aggregation::marker,
                                 metrics::CmaeConvention::directed_mean)
                       .value;
  CHECK(c == doctest::Approx(i).epsilon(1e-12));

  // paper-literal normalization doubles the directed sum denominator gap
  const double literal = metrics::cmae(evals, Aggregation::marker,
                                       metrics::CmaeConvention::paper_literal)
                             .value;
  CHECK(literal == doctest::Approx(2.0 * c).epsilon(1e-12));
}

TEST_CASE("cmae: maximal error bound") {
  auto d1 = eval_of("d1", {{"E", 1.0}}, {{{"E", 1.0}}});
  auto d2 = eval_of("d2", {{"E", 0.0}}, {{{"E", 0.0}}});
  std::vector<metrics::DatasetEval> evals{d1, d2};
  // both directed pairs score |1 - 0| = 1
  CHECK(metrics::cmae(evals, Aggregation::marker).value ==
        doctest::Approx(1.0));
  std::vector<metrics::DatasetEval> one{d1};
  CHECK_THROWS_AS(metrics::cmae(one, Aggregation::marker),
                  InsufficientDataError);
}

TEST_CASE("mcv: constant marker contributes zero, hand value") {
  std::vector<mic::MicTable> constant{table_of("d1", {{"E", 0.5}}),
                                      table_of("d2", {{"E", 0.5}})};
  CHECK(metrics::mcv(constant).value == doctest::Approx(0.0));

  std::vector<mic::MicTable> pair{table_of("d1", {{"E", 0.4}}),
                                  table_of("d2", {{"E", 0.6}})};
  CHECK(metrics::mcv(pair).value == doctest::Approx(0.2).epsilon(1e-12));

  std::vector<mic::MicTable> disjoint{table_of("d1", {{"A", 0.4}}),
                                      table_of("d2", {{"B", 0.6}})};
  CHECK_THROWS_AS(metrics::mcv(disjoint), InsufficientDataError);
}

TEST_CASE("dcv: hand value and skip rule") {
  std::vector<mic::MicTable> one{
      table_of("d1", {{"A", 0.2}, {"B", 0.4}, {"C", 0.6}})};
  CHECK(metrics::dcv(one).value ==
        doctest::Approx(0.4082482904638631).epsilon(1e-9));

  std::vector<mic::MicTable> flat{table_of("d1", {{"A", 0.5}, {"B", 0.5}}),
                                  table_of("d2", {{"A", 0.7}, {"B", 0.7}})};
  CHECK(metrics::dcv(flat).value == doctest::Approx(0.0));

  std::vector<mic::MicTable> tiny{table_of("d1", {{"A", 0.5}})};
  CHECK_THROWS_AS(metrics::dcv(tiny), InsufficientDataError);

  std::vector<mic::MicTable> mixed{table_of("d1", {{"A", 0.5}}),
                                   table_of("d2", {{"A", 0.2}, {"B", 0.4}})};
  const auto r = metrics::dcv(mixed);
  CHECK(r.used == 1);
  CHECK(r.skipped == 1);
}

TEST_CASE("mrc: identical and reversed orderings hit the clamp") {
  std::vector<mic::MicTable> same{
      table_of("d1", {{"A", 0.1}, {"B", 0.2}, {"C", 0.3}}),
      table_of("d2", {{"A", 0.4}, {"B", 0.5}, {"C", 0.6}})};
  CHECK(metrics::mrc(same).value >= 0.999999);

  std::vector<mic::MicTable> reversed{
      table_of("d1", {{"A", 0.1}, {"B", 0.2}, {"C", 0.3}}),
      table_of("d2", {{"A", 0.6}, {"B", 0.5}, {"C", 0.4}})};
  CHECK(metrics::mrc(reversed).value <= -0.999999);
}

TEST_CASE("mrc: three-dataset fixture matches per-pair recomputation") {
  std::vector<mic::MicTable> tables{
      table_of("d1", {{"A", 0.10}, {"B", 0.30}, {"C", 0.20}, {"D", 0.40}}),
      table_of("d2", {{"A", 0.15}, {"B", 0.20}, {"C", 0.35}, {"D", 0.50}}),
      table_of("d3", {{"A", 0.50}, {"B", 0.10}, {"C", 0.40}, {"D", 0.30}})};
  std::vector<double> pairwise;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      std::vector<double> xs, ys;
      for (const auto& marker : {"A", "B", "C", "D"}) {
        xs.push_back(tables[i].entries.at(marker).mic);
        ys.push_back(tables[j].entries.at(marker).mic);
      }
      pairwise.push_back(stats::spearman(xs, ys));
    }
  }
  const auto r = metrics::mrc(tables);
  CHECK(r.used == 3);
  CHECK(r.value == doctest::Approx(stats::fisher_mean(pairwise)).epsilon(1e-12));
}

TEST_CASE("mrc: pairs with fewer than 3 shared markers are skipped") {
  std::vector<mic::MicTable> tables{table_of("d1", {{"A", 0.1}, {"B", 0.2}}),
                                    table_of("d2", {{"A", 0.3}, {"B", 0.4}})};
  CHECK_THROWS_AS(metrics::mrc(tables), InsufficientDataError);

  std::vector<mic::MicTable> mixed{
      table_of("d1", {{"A", 0.1}, {"B", 0.2}, {"C", 0.3}}),
      table_of("d2", {{"A", 0.3}, {"B", 0.4}, {"C", 0.5}}),
      table_of("d3", {{"A", 0.2}, {"B", 0.1}})};  // only 2 shared with others
  const auto r = metrics::mrc(mixed);
  CHECK(r.used == 1);   // d1-d2
  CHECK(r.skipped == 2);  // d1-d3, d2-d3
}

TEST_CASE("mac: proportional vectors, zero-variance skip") {
  std::vector<mic::MicTable> tables{
      table_of("d1", {{"E", 0.2}, {"F", 0.5}}),
      table_of("d2", {{"E", 0.4}, {"F", 0.5}}),
      table_of("d3", {{"E", 0.6}, {"F", 0.5}})};
  std::vector<double> acc{0.1, 0.2, 0.3};
  const auto r = metrics::mac(tables, acc, metrics::CorrelationKind::pearson);
  // E is proportional to accuracy -> clamp-limited 1.0; F has zero variance
  CHECK(r.value >= 0.999999);
  CHECK(r.used == 1);
  CHECK(r.skipped == 1);

  std::vector<mic::MicTable> two{tables[0], tables[1]};
  std::vector<double> acc2{0.1, 0.2};
  CHECK_THROWS_AS(metrics::mac(two, acc2, metrics::CorrelationKind::pearson),
                  InsufficientDataError);
}

TEST_CASE("mac: spearman variant and 4-dataset fixture recomputation") {
  std::vector<mic::MicTable> tables{
      table_of("d1", {{"E", 0.22}, {"F", 0.61}}),
      table_of("d2", {{"E", 0.47}, {"F", 0.32}}),
      table_of("d3", {{"E", 0.66}, {"F", 0.55}}),
      table_of("d4", {{"E", 0.14}, {"F", 0.72}})};
  std::vector<double> acc{0.25, 0.45, 0.60, 0.20};
  for (auto kind :
       {metrics::CorrelationKind::pearson, metrics::CorrelationKind::spearman}) {
    std::vector<double> per_marker;
    for (const auto& marker : {"E", "F"}) {
      std::vector<double> mics;
      for (const auto& t : tables) mics.push_back(t.entries.at(marker).mic);
      per_marker.push_back(kind == metrics::CorrelationKind::pearson
                               ? stats::pearson(mics, acc)
                               : stats::spearman(mics, acc));
    }
    const auto r = metrics::mac(tables, acc, kind);
    CHECK(r.used == 2);
    CHECK(r.value ==
          doctest::Approx(stats::fisher_mean(per_marker)).epsilon(1e-12));
  }
}

TEST_CASE("mcc: substitution identity and singleton marker") {
  std::vector<mic::MicTable> tables{
      table_of("d1", {{"E", 0.22}}), table_of("d2", {{"E", 0.47}}),
      table_of("d3", {{"E", 0.61}})};
  std::vector<double> scores{0.3, 0.5, 0.4};
  const auto via_mac =
      metrics::mac(tables, scores, metrics::CorrelationKind::pearson);
  const auto via_mcc =
      metrics::mcc(tables, scores, metrics::CorrelationKind::pearson);
  CHECK(via_mac.value == doctest::Approx(via_mcc.value));

  // single shared marker: fisher_mean of a singleton is the correlation
  std::vector<double> mics{0.22, 0.47, 0.61};
  CHECK(via_mcc.value ==
        doctest::Approx(stats::pearson(mics, scores)).epsilon(1e-9));

  // anti-correlated fixture
  std::vector<double> anti{0.9, 0.5, 0.1};
  CHECK(metrics::mcc(tables, anti, metrics::CorrelationKind::pearson).value <
        0.0);
}

TEST_CASE("faithfulness: trivial and hand values") {
  std::vector<annotate::SentenceAnnotation> aligned{sent("q", 0, 0.5, 0.5),
                                                    sent("q", 1, 0.9, 0.9)};
  CHECK(metrics::faithfulness(aligned)->f == doctest::Approx(1.0));

  std::vector<annotate::SentenceAnnotation> diverged{sent("q", 0, 0.0, 1.0)};
  CHECK(metrics::faithfulness(diverged)->f == doctest::Approx(0.0));

  std::vector<annotate::SentenceAnnotation> mixed{sent("q", 0, 0.5, 0.6),
                                                  sent("q", 1, 0.5, 0.8)};
  CHECK(metrics::faithfulness(mixed)->f == doctest::Approx(0.8).epsilon(1e-12));

  std::vector<annotate::SentenceAnnotation> unusable{sent("q", 0, 0.5, 0.5)};
  unusable[0].decisiveness.reset();
  CHECK_FALSE(metrics::faithfulness(unusable).has_value());
}

TEST_CASE("cmfg: constant F, two bins, punt exclusion") {
  std::vector<metrics::ResponseFaith> constant;
  for (int i = 0; i < 10; ++i)
    constant.push_back({i / 10.0, 0.7, false});
  CHECK(metrics::cmfg(constant) == doctest::Approx(0.7).epsilon(1e-12));

  std::vector<metrics::ResponseFaith> twobins{
      {0.05, 0.4, false}, {0.05, 0.4, false}, {0.95, 0.8, false}};
  CHECK(metrics::cmfg(twobins) == doctest::Approx(0.6).epsilon(1e-12));

  // a punted response changes nothing
  auto with_punt = twobins;
  with_punt.push_back({0.5, 0.0, true});
  CHECK(metrics::cmfg(with_punt) == doctest::Approx(0.6).epsilon(1e-12));

  std::vector<metrics::ResponseFaith> all_punt{{0.5, 0.5, true}};
  CHECK_THROWS_AS(metrics::cmfg(all_punt), InsufficientDataError);
}

TEST_CASE("cmfg: conf 1.0 lands in the top (right-closed) bin") {
  std::vector<metrics::ResponseFaith> edge{{1.0, 0.9, false},
                                           {0.95, 0.5, false}};
  CHECK(metrics::cmfg(edge) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("cmfg: invariant to within-bin permutation") {
  std::vector<metrics::ResponseFaith> a{
      {0.11, 0.2, false}, {0.19, 0.6, false}, {0.55, 0.9, false}};
  std::vector<metrics::ResponseFaith> b{
      {0.19, 0.2, false}, {0.11, 0.6, false}, {0.55, 0.9, false}};
  CHECK(metrics::cmfg(a) == doctest::Approx(metrics::cmfg(b)).epsilon(1e-12));
}

TEST_CASE("response_faithfulness: reductions and punts") {
  std::vector<annotate::SentenceAnnotation> anns{
      sent("q1", 0, 0.2, 0.2), sent("q1", 1, 0.8, 0.8),
      sent("q2", 0, 0.5, 0.0, true)};
  const auto mean_red =
      metrics::response_faithfulness(anns, metrics::ConfReduction::mean);
  REQUIRE(mean_red.size() == 2);
  CHECK(mean_red[0].response_conf == doctest::Approx(0.5));
  CHECK(mean_red[0].f == doctest::Approx(1.0));
  CHECK(mean_red[1].punt);

  const auto min_red =
      metrics::response_faithfulness(anns, metrics::ConfReduction::min);
  CHECK(min_red[0].response_conf == doctest::Approx(0.2));
  const auto last_red = metrics::response_faithfulness(
      anns, metrics::ConfReduction::last_sentence);
  CHECK(last_red[0].response_conf == doctest::Approx(0.8));
}

TEST_CASE("mf_divergence: zeros, hand value, threshold containment") {
  std::vector<annotate::SentenceAnnotation> aligned{sent("q1", 0, 0.4, 0.4),
                                                    sent("q2", 0, 0.7, 0.7)};
  for (const auto& [_, v] : metrics::mf_divergence(aligned))
    CHECK(v == doctest::Approx(0.0));

  std::vector<annotate::SentenceAnnotation> mixed{sent("q1", 0, 0.5, 0.7),
                                                  sent("q2", 0, 0.5, 0.9)};
  const auto mf = metrics::mf_divergence(mixed);
  CHECK(mf.at("likely") == doctest::Approx(0.3).epsilon(1e-12));

  // same threshold applied -> keys contained in the MIC table keys
  std::vector<annotate::SentenceAnnotation> sparse = mixed;
  auto extra = sent("q3", 0, 0.5, 0.5);
  extra.marker = "rare";
  sparse.push_back(extra);
  const auto thresholded = metrics::mf_divergence(sparse, 2);
  const auto table = mic::build_mic_table(sparse, 2, "m", "ds",
                                          corpus::Split::train);
  for (const auto& [marker, _] : thresholded) CHECK(table.contains(marker));
}

TEST_CASE("compute_report: absent cells carry reasons, flags recorded") {
  // single dataset, train only: cmae/mcv/mrc/mac/mcc must be absent with
  // reasons, imae too (no test split), dcv computable
  std::vector<annotate::SentenceAnnotation> anns;
  for (int i = 0; i < 4; ++i) {
    auto a = sent("q" + std::to_string(i), 0, 0.2 + 0.2 * i, 0.5);
    a.marker = i % 2 == 0 ? "likely" : "perhaps";
    anns.push_back(a);
  }
  metrics::ReportOptions opts;
  opts.threshold = 1;
  const auto report = metrics::compute_report(anns, opts);
  CHECK_FALSE(report.imae_marker.value.has_value());
  CHECK_FALSE(report.imae_marker.note.empty());
  CHECK_FALSE(report.cmae_marker.value.has_value());
  CHECK(report.dcv.value.has_value());
  CHECK_FALSE(report.mrc.value.has_value());
  CHECK(report.threshold == 1);
  CHECK_FALSE(report.no_hedge_excluded);
  CHECK(metrics::to_json(report).contains("skip_counts"));
}

TEST_CASE("compute_report: no_hedge exclusion leaves other markers' terms") {
  // two datasets with train+test; <no_hedge> dominates
  std::vector<annotate::SentenceAnnotation> anns;
  auto add = [&](const std::string& ds, corpus::Split split,
                 const std::string& marker, const std::string& query,
                 double conf) {
    auto a = sent(query, 0, conf, 0.5);
    a.dataset_id = ds;
    a.split = split;
    a.marker = marker;
    a.state = marker == annotate::kNoHedge ? annotate::MarkerState::no_hedge
                                           : annotate::MarkerState::single;
    anns.push_back(a);
  };
  const std::string nh(annotate::kNoHedge);
  int q = 0;
  for (const std::string ds : {"d1", "d2"}) {
    for (double c : {0.2, 0.4}) {
      add(ds, corpus::Split::train, "likely", "q" + std::to_string(q++), c);
      add(ds, corpus::Split::train, nh, "q" + std::to_string(q++), c + 0.5);
      add(ds, corpus::Split::test, "likely", "q" + std::to_string(q++), c);
      add(ds, corpus::Split::test, nh, "q" + std::to_string(q++), c + 0.5);
    }
  }
  metrics::ReportOptions base;
  base.threshold = 1;
  metrics::ReportOptions excl = base;
  excl.exclude_no_hedge = true;
  const auto with = metrics::compute_report(anns, base);
  const auto without = metrics::compute_report(anns, excl);
  // the per-marker term of "likely" is independent of <no_hedge>'s presence:
  // with exclusion, imae is the likely-only mean; with inclusion it averages
  // likely and <no_hedge> terms. Reconstruct the likely-only value.
  REQUIRE(with.imae_marker.value.has_value());
  REQUIRE(without.imae_marker.value.has_value());
  CHECK(*without.imae_marker.value == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(without.no_hedge_excluded);
}
