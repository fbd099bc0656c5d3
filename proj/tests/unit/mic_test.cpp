#include "miceval/mic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "miceval/errors.hpp"

using namespace miceval;
namespace fs = std::filesystem;

namespace {

annotate::SentenceAnnotation ann(const std::string& marker, double conf,
                                 int idx = 0) {
  annotate::SentenceAnnotation a;
  a.model_id = "m";
  a.dataset_id = "ds";
  a.split = corpus::Split::train;
  a.query_id = "q" + std::to_string(idx);
  a.sent_idx = 0;
  a.text = "text";
  a.state = marker == annotate::kNoHedge ? annotate::MarkerState::no_hedge
                                         : annotate::MarkerState::single;
  a.marker = marker;
  a.confidence = conf;
  return a;
}

mic::MicTable table_of(std::vector<std::pair<std::string, double>> entries) {
  mic::MicTable t;
  t.model_id = "m";
  t.dataset_id = "ds";
  t.threshold = 1;
  for (const auto& [marker, value] : entries) {
    t.entries[marker] = {marker, value, 10, 0.0};
  }
  return t;
}

}  // namespace

TEST_CASE("build_mic_table: arithmetic mean, support, population std") {
  std::vector<annotate::SentenceAnnotation> anns{
      ann("likely", 0.5, 0), ann("likely", 0.7, 1), ann("likely", 0.9, 2)};
  const auto t = mic::build_mic_table(anns, 1, "m", "ds", corpus::Split::train);
  REQUIRE(t.entries.size() == 1);
  const auto& e = t.entries.at("likely");
  CHECK(e.mic == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(e.support == 3);
  // population std of {0.5, 0.7, 0.9}
  CHECK(e.std_dev == doctest::Approx(std::sqrt(0.08 / 3.0)).epsilon(1e-12));
}

TEST_CASE("build_mic_table: single sentence, mic == confidence") {
  std::vector<annotate::SentenceAnnotation> anns{ann("perhaps", 0.42)};
  const auto t = mic::build_mic_table(anns, 1, "m", "ds", corpus::Split::train);
  CHECK(t.entries.at("perhaps").mic == doctest::Approx(0.42));
}

TEST_CASE("build_mic_table: threshold boundary at 9/10/11") {
  auto build_with_support = [](std::size_t n) {
    std::vector<annotate::SentenceAnnotation> anns;
    for (std::size_t i = 0; i < n; ++i)
      anns.push_back(ann("likely", 0.5, static_cast<int>(i)));
    return mic::build_mic_table(anns, 10, "m", "ds", corpus::Split::train);
  };
  CHECK_FALSE(build_with_support(9).contains("likely"));
  CHECK(build_with_support(10).contains("likely"));
  CHECK(build_with_support(11).contains("likely"));
}

TEST_CASE("build_mic_table: raising T never adds markers") {
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<annotate::SentenceAnnotation> anns;
    const std::size_t n = 1 + rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      anns.push_back(ann("m" + std::to_string(rng() % 5),
                         (rng() % 100) / 99.0, static_cast<int>(i)));
    }
    const auto t1 = mic::build_mic_table(anns, 2, "m", "ds", corpus::Split::train);
    const auto t2 = mic::build_mic_table(anns, 5, "m", "ds", corpus::Split::train);
    for (const auto& [marker, entry] : t2.entries) {
      REQUIRE(t1.contains(marker));
      CHECK(t1.entries.at(marker).mic == doctest::Approx(entry.mic));
    }
  }
}

TEST_CASE("build_mic_table: order invariance and support accounting") {
  std::vector<annotate::SentenceAnnotation> anns{
      ann("likely", 0.1, 0), ann(std::string(annotate::kNoHedge), 0.9, 1),
      ann("likely", 0.3, 2), ann("perhaps", 0.6, 3)};
  const auto base = mic::build_mic_table(anns, 1, "m", "ds", corpus::Split::train);
  std::mt19937_64 rng(2);
  for (int iter = 0; iter < 20; ++iter) {
    std::shuffle(anns.begin(), anns.end(), rng);
    const auto t = mic::build_mic_table(anns, 1, "m", "ds", corpus::Split::train);
    REQUIRE(t.entries.size() == base.entries.size());
    for (const auto& [marker, e] : base.entries)
      CHECK(t.entries.at(marker).mic == doctest::Approx(e.mic).epsilon(1e-15));
  }
  std::size_t support_sum = 0;
  for (const auto& [_, e] : base.entries) support_sum += e.support;
  CHECK(support_sum <= anns.size());
}

TEST_CASE("build_mic_table: rejects discarded or unconfident sentences") {
  annotate::SentenceAnnotation bad = ann("likely", 0.5);
  bad.state = annotate::MarkerState::multi_discarded;
  std::vector<annotate::SentenceAnnotation> anns{bad};
  CHECK_THROWS_AS(
      mic::build_mic_table(anns, 1, "m", "ds", corpus::Split::train),
      ValidationError);

  const auto empty =
      mic::build_mic_table({}, 1, "m", "ds", corpus::Split::train);
  CHECK(empty.entries.empty());
}

TEST_CASE("shared_markers: intersection semantics") {
  const auto a = table_of({{"A", 0.1}, {"B", 0.2}, {"C", 0.3}});
  const auto b = table_of({{"B", 0.4}, {"C", 0.5}, {"D", 0.6}});
  const auto c = table_of({{"C", 0.7}});

  std::vector<mic::MicTable> identical{a, a};
  CHECK(mic::shared_markers(identical) ==
        std::set<std::string>{"A", "B", "C"});

  std::vector<mic::MicTable> disjoint{table_of({{"A", 0.1}}),
                                      table_of({{"Z", 0.2}})};
  CHECK(mic::shared_markers(disjoint).empty());

  std::vector<mic::MicTable> three{a, b, c};
  CHECK(mic::shared_markers(three) == std::set<std::string>{"C"});

  std::vector<mic::MicTable> one{a};
  CHECK_THROWS_AS(mic::shared_markers(one), ValidationError);
}

TEST_CASE("exclude_no_hedge") {
  const auto plain = table_of({{"likely", 0.6}});
  CHECK(mic::exclude_no_hedge(plain).entries ==
        plain.entries);  // no-op without the token

  auto with = table_of({{std::string(annotate::kNoHedge), 0.9},
                        {"likely", 0.6}});
  const auto cut = mic::exclude_no_hedge(with);
  CHECK(cut.entries.size() == 1);
  CHECK(cut.contains("likely"));

  const auto only = table_of({{std::string(annotate::kNoHedge), 0.9}});
  CHECK(mic::exclude_no_hedge(only).entries.empty());
}

TEST_CASE("mic tables: jsonl round-trip and csv header") {
  std::vector<mic::MicTable> tables{
      table_of({{"likely", 0.63}, {std::string(annotate::kNoHedge), 0.88}})};
  tables[0].threshold = 10;
  const auto dir = fs::temp_directory_path() / "miceval_mic_test";
  fs::create_directories(dir);
  const auto jsonl = dir / "tables.jsonl";
  const auto csv = dir / "tables.csv";
  mic::save_tables_jsonl(tables, jsonl, R"({"kind":"meta"})");
  mic::save_tables_csv(tables, csv, "# test");

  const auto loaded = mic::load_tables_jsonl(jsonl);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].entries.at("likely").mic == doctest::Approx(0.63));
  CHECK(loaded[0].threshold == 10);

  std::ifstream in(csv);
  std::string comment, header;
  std::getline(in, comment);
  std::getline(in, header);
  CHECK(comment == "# test");
  CHECK(header == "model_id,dataset_id,split,T,marker,mic,support,std");
}
