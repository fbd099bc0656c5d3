#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace miceval::segmenter {

/// Byte span of one sentence within a response. Spans are ordered,
/// non-overlapping, and trimmed to non-whitespace boundaries.
struct SentenceSpan {
  std::size_t start = 0;  // inclusive byte offset
  std::size_t end = 0;    // exclusive byte offset
  std::size_t index = 0;  // ordinal within the response

  bool operator==(const SentenceSpan&) const = default;
};

/// Swap point for alternative segmenters; the rule-based one below is the
/// reference used by all tests.
class SentenceSegmenter {
 public:
  virtual ~SentenceSegmenter() = default;
  virtual std::vector<SentenceSpan> segment(std::string_view text) const = 0;

  std::vector<std::string> sentences(std::string_view text) const;
};

/// Deterministic rule set: sentences end at '.', '!' or '?' followed by
/// whitespace and an uppercase letter, digit, or opening quote. Known
/// abbreviations (titles, months, "e.g.", "i.e.", single-letter initials),
/// decimal numbers, and ellipses never split.
class RuleSegmenter : public SentenceSegmenter {
 public:
  explicit RuleSegmenter(std::vector<std::string> abbreviations);

  /// Abbreviation list from resources/abbreviations.txt.
  static RuleSegmenter with_default_abbreviations();
  static RuleSegmenter from_abbreviation_file(const std::filesystem::path& p);

  std::vector<SentenceSpan> segment(std::string_view text) const override;

 private:
  bool is_abbreviation(std::string_view token) const;
  std::unordered_set<std::string> abbreviations_;  // lowercase, no final '.'
};

}  // namespace miceval::segmenter
