#include "miceval/segmenter.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "miceval/errors.hpp"
#include "miceval/resources.hpp"

namespace miceval::segmenter {

namespace {

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// ASCII closers plus the UTF-8 sequences for ” ’ ».
std::size_t skip_closers(std::string_view text, std::size_t i) {
  while (i < text.size()) {
    const char c = text[i];
    if (c == '"' || c == '\'' || c == ')' || c == ']' || c == '}') {
      ++i;
      continue;
    }
    if (text.compare(i, 3, "”") == 0 || text.compare(i, 3, "’") == 0) {
      i += 3;
      continue;
    }
    if (text.compare(i, 2, "»") == 0) {
      i += 2;
      continue;
    }
    break;
  }
  return i;
}

// Does a new sentence plausibly begin here? Uppercase, digit, or an
// opening quote/bracket (ASCII or the usual UTF-8 curly quotes).
bool is_sentence_start(std::string_view text, std::size_t i) {
  const unsigned char c = static_cast<unsigned char>(text[i]);
  if (std::isupper(c) || std::isdigit(c)) return true;
  if (c == '"' || c == '\'' || c == '(' || c == '[') return true;
  if (text.compare(i, 3, "“") == 0 || text.compare(i, 3, "‘") == 0)
    return true;
  if (text.compare(i, 2, "«") == 0) return true;
  return false;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

}  // namespace

std::vector<std::string> SentenceSegmenter::sentences(
    std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& span : segment(text))
    out.emplace_back(text.substr(span.start, span.end - span.start));
  return out;
}

RuleSegmenter::RuleSegmenter(std::vector<std::string> abbreviations) {
  for (auto& a : abbreviations) {
    std::string key = lowercase(a);
    if (!key.empty() && key.back() == '.') key.pop_back();
    if (!key.empty()) abbreviations_.insert(std::move(key));
  }
}

RuleSegmenter RuleSegmenter::with_default_abbreviations() {
  return RuleSegmenter(resources::load_lines("abbreviations.txt"));
}

RuleSegmenter RuleSegmenter::from_abbreviation_file(
    const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open abbreviation file: " + p.string());
  std::vector<std::string> abbrevs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] != '#') abbrevs.push_back(line);
  }
  return RuleSegmenter(std::move(abbrevs));
}

bool RuleSegmenter::is_abbreviation(std::string_view token) const {
  std::string key = lowercase(token);
  if (!key.empty() && key.back() == '.') key.pop_back();
  if (key.empty()) return false;
  return abbreviations_.contains(key);
}

namespace {

// "J." in "J. R. R. Tolkien": a single-letter token before the period is an
// initial only when the name plainly continues, with another initial or a
// capitalized word ("X." in "Perhaps X. Y is Z." starts a new sentence).
bool is_name_initial(std::string_view text, std::size_t dot,
                     std::string_view token) {
  if (token.size() != 1 ||
      !std::isalpha(static_cast<unsigned char>(token[0])))
    return false;
  std::size_t p = dot + 1;
  while (p < text.size() && is_ws(text[p])) ++p;
  if (p >= text.size() ||
      !std::isupper(static_cast<unsigned char>(text[p])))
    return false;
  std::size_t q = p;
  while (q < text.size() && !is_ws(text[q])) ++q;
  const std::string_view next = text.substr(p, q - p);
  const bool next_initial =
      next.size() == 2 && std::isalpha(static_cast<unsigned char>(next[0])) &&
      next[1] == '.';
  const bool next_capitalized_word =
      next.size() >= 2 && std::islower(static_cast<unsigned char>(next[1]));
  return next_initial || next_capitalized_word;
}

}  // namespace

std::vector<SentenceSpan> RuleSegmenter::segment(std::string_view text) const {
  std::vector<std::size_t> boundaries;  // exclusive end offsets
  const std::size_t n = text.size();

  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (!is_terminator(c)) continue;

    if (c == '.') {
      // Any dot adjacent to another dot is part of an ellipsis.
      if ((i > 0 && text[i - 1] == '.') || (i + 1 < n && text[i + 1] == '.'))
        continue;
      // Decimal number: digit on both sides.
      if (i > 0 && i + 1 < n &&
          std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
          std::isdigit(static_cast<unsigned char>(text[i + 1])))
        continue;
      // Token ending at this period.
      std::size_t ts = i;
      while (ts > 0 && !is_ws(text[ts - 1])) --ts;
      std::string_view token = text.substr(ts, i - ts);
      while (!token.empty() &&
             (token.front() == '(' || token.front() == '"' ||
              token.front() == '\'' || token.front() == '['))
        token.remove_prefix(1);
      if (is_abbreviation(token)) continue;
      if (is_name_initial(text, i, token)) continue;
    }

    const std::size_t after = skip_closers(text, i + 1);
    if (after >= n) {
      boundaries.push_back(after);
      break;  // end of text
    }
    if (!is_ws(text[after])) continue;  // "e.g.foo", "U.S.A." style
    std::size_t next = after;
    while (next < n && is_ws(text[next])) ++next;
    if (next >= n || is_sentence_start(text, next)) {
      boundaries.push_back(after);
      i = after - 1;
    }
  }

  std::vector<SentenceSpan> spans;
  std::size_t cursor = 0;
  auto emit = [&](std::size_t seg_end) {
    std::size_t s = cursor;
    while (s < seg_end && is_ws(text[s])) ++s;
    std::size_t e = seg_end;
    while (e > s && is_ws(text[e - 1])) --e;
    if (s < e) spans.push_back({s, e, spans.size()});
    cursor = seg_end;
  };
  for (std::size_t b : boundaries) emit(b);
  emit(n);  // trailing fragment without terminator
  return spans;
}

}  // namespace miceval::segmenter
