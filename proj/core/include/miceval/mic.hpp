#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "miceval/annotate.hpp"
#include "miceval/corpus.hpp"

namespace miceval::mic {

struct MicEntry {
  std::string marker;
  double mic = 0.0;        // mean intrinsic confidence
  std::size_t support = 0; // number of contributing sentences
  double std_dev = 0.0;    // population std of contributing confidences
};

/// Per (model, dataset, split) table of marker internal confidences,
/// already filtered at the support threshold.
struct MicTable {
  std::string model_id;
  std::string dataset_id;
  corpus::Split split = corpus::Split::train;
  std::size_t threshold = 0;
  std::map<std::string, MicEntry> entries;  // keyed by canonical marker

  bool contains(const std::string& marker) const {
    return entries.find(marker) != entries.end();
  }
};

/// Mean confidence per marker over the given annotations (one model,
/// dataset, and split; multi-marker discards must already be gone).
/// Markers seen fewer than `threshold` times are dropped. <no_hedge>
/// participates like any other marker.
MicTable build_mic_table(std::span<const annotate::SentenceAnnotation> annotations,
                         std::size_t threshold, std::string model_id,
                         std::string dataset_id, corpus::Split split);

/// Markers present in every table. Requires at least 2 tables; the
/// intersection may be empty.
std::set<std::string> shared_markers(std::span<const MicTable> tables);

/// Copy of the table without the reserved <no_hedge> entry.
MicTable exclude_no_hedge(const MicTable& table);

/// Exports: one record per entry, line-delimited and CSV (header row).
void save_tables_jsonl(std::span<const MicTable> tables,
                       const std::filesystem::path& path,
                       std::string_view meta_line = {});
void save_tables_csv(std::span<const MicTable> tables,
                     const std::filesystem::path& path,
                     std::string_view comment_line = {});
std::vector<MicTable> load_tables_jsonl(const std::filesystem::path& path);

}  // namespace miceval::mic
