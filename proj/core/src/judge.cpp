#include "miceval/judge.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "miceval/errors.hpp"
#include "miceval/hash.hpp"
#include "miceval/resources.hpp"

namespace miceval::judge {

using nlohmann::json;

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::consistency: return "consistency";
    case TaskKind::decisiveness: return "decisiveness";
    case TaskKind::accuracy: return "accuracy";
    case TaskKind::extract_markers: return "extract_markers";
    case TaskKind::standardize_markers: return "standardize_markers";
  }
  return "consistency";
}

std::string_view to_string(TriState t) {
  switch (t) {
    case TriState::yes: return "yes";
    case TriState::na: return "na";
    case TriState::no: return "no";
  }
  return "na";
}

double inconsistency_score(TriState t) {
  switch (t) {
    case TriState::yes: return 0.0;
    case TriState::na: return 0.5;
    case TriState::no: return 1.0;
  }
  return 0.5;
}

std::string cache_key(const JudgeTask& task, std::string_view judge_model_id) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(task.kind);
  j["template_id"] = task.template_id;
  j["prompt"] = task.rendered_prompt;
  j["temperature"] = task.decode.temperature;
  j["max_output_tokens"] = task.decode.max_output_tokens;
  j["stop"] = task.decode.stop_sequences;
  j["judge"] = judge_model_id;
  return hash::sha256_hex(j.dump());
}

// --- VerdictCache ----------------------------------------------------------

VerdictCache::VerdictCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".jsonl")
      continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto j = json::parse(line);
        entries_.emplace(j.at("key").get<std::string>(),
                         j.at("raw").get<std::string>());
      } catch (const json::exception& e) {
        throw IoError("corrupt cache line in " + entry.path().string() + ": " +
                      e.what());
      }
    }
  }
}

std::optional<std::string> VerdictCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void VerdictCache::put(const std::string& key, std::string_view raw) {
  std::lock_guard lock(mu_);
  if (!entries_.emplace(key, std::string(raw)).second) return;  // first write wins
  const auto file = dir_ / (key.substr(0, 2) + ".jsonl");
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to cache file: " + file.string());
  json j;
  j["key"] = key;
  j["raw"] = std::string(raw);
  out << j.dump() << '\n';
}

std::size_t VerdictCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// --- Parsing ---------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string_view strip_prefix_ci(std::string_view s, std::string_view prefix) {
  if (s.size() >= prefix.size() &&
      lowercase(s.substr(0, prefix.size())) == lowercase(prefix))
    return trim(s.substr(prefix.size()));
  return s;
}

}  // namespace

std::string normalize_marker(std::string_view s) {
  std::string out;
  bool in_space = true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space && !out.empty()) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  // Re-capitalize the pronoun "I" ("i", "i'm", "i've", ...).
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] != 'i') continue;
    const bool starts = i == 0 || out[i - 1] == ' ';
    const bool ends = i + 1 == out.size() || out[i + 1] == ' ' || out[i + 1] == '\'';
    if (starts && ends) out[i] = 'I';
  }
  return out;
}

TriState parse_consistency(std::string_view raw) {
  std::string_view s = trim(raw);
  s = strip_prefix_ci(s, "answer:");
  std::string word;
  for (char c : s) {
    if (!std::isalpha(static_cast<unsigned char>(c))) break;
    word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (word == "yes") return TriState::yes;
  if (word == "no") return TriState::no;
  return TriState::na;
}

double parse_decisiveness(std::string_view raw) {
  std::string_view s = trim(raw);
  s = strip_prefix_ci(s, "rating:");
  // First whitespace-delimited token must be a bare float.
  std::size_t end = 0;
  while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end])))
    ++end;
  const std::string token(s.substr(0, end));
  if (token.empty()) throw JudgeParseError("decisiveness reply is empty");
  char* stop = nullptr;
  const double v = std::strtod(token.c_str(), &stop);
  if (stop != token.c_str() + token.size() || !std::isfinite(v))
    throw JudgeParseError("cannot parse decisiveness float from: " +
                          std::string(trim(raw)).substr(0, 80));
  if (v < 0.0 || v > 1.0) {
    spdlog::warn("decisiveness {} outside [0,1]; clamping", v);
    return std::clamp(v, 0.0, 1.0);
  }
  return v;
}

bool parse_accuracy(std::string_view raw) {
  std::string_view s = trim(raw);
  while (!s.empty() && !std::isalnum(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && !std::isalnum(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  const std::string word = lowercase(s);
  if (word == "true") return true;
  if (word == "false") return false;
  throw JudgeParseError("cannot parse accuracy verdict from: " +
                        std::string(trim(raw)).substr(0, 80));
}

std::vector<std::string> parse_extraction(std::string_view raw) {
  std::string_view s = raw;
  if (const auto pos = s.find("####"); pos != std::string_view::npos)
    s = s.substr(0, pos);
  s = trim(s);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t sep = s.find(';', start);
    if (sep == std::string_view::npos) sep = s.size();
    const std::string marker = normalize_marker(s.substr(start, sep - start));
    if (!marker.empty()) out.push_back(marker);
    start = sep + 1;
  }
  return out;
}

std::map<std::string, std::string> parse_standardization(
    std::string_view raw, std::span<const std::string> inputs) {
  std::string body(trim(raw));
  // Strip a markdown fence if the judge added one.
  if (body.starts_with("```")) {
    const auto first_nl = body.find('\n');
    const auto last_fence = body.rfind("```");
    if (first_nl != std::string::npos && last_fence > first_nl)
      body = body.substr(first_nl + 1, last_fence - first_nl - 1);
  }
  const auto open = body.find('{');
  if (open == std::string::npos)
    throw JudgeParseError("standardization reply has no JSON object");
  body = body.substr(open);
  // The '}' stop sequence eats closing braces; restore balance.
  long depth = 0;
  for (char c : body) {
    if (c == '{') ++depth;
    if (c == '}') --depth;
  }
  for (; depth > 0; --depth) body.push_back('}');

  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw JudgeParseError(std::string("standardization reply is not JSON: ") +
                          e.what());
  }
  if (!j.is_object())
    throw JudgeParseError("standardization reply is not a JSON object");

  std::map<std::string, std::string> by_norm;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string())
      throw JudgeParseError("standardization value for '" + key +
                            "' is not a string");
    const std::string canon = normalize_marker(value.get<std::string>());
    if (canon.empty())
      throw JudgeParseError("standardization maps '" + key + "' to nothing");
    by_norm[normalize_marker(key)] = canon;
  }

  std::map<std::string, std::string> out;
  for (const auto& input : inputs) {
    auto it = by_norm.find(normalize_marker(input));
    if (it == by_norm.end())
      throw JudgeParseError("standardization reply is missing input marker '" +
                            input + "'");
    out[input] = it->second;
  }
  if (by_norm.size() != out.size())
    throw JudgeParseError("standardization reply maps markers never given");
  return out;
}

// --- MockJudgeBackend ------------------------------------------------------

namespace {

std::vector<std::pair<std::string, std::string>> load_lexicon_resource() {
  std::vector<std::pair<std::string, std::string>> lex;
  for (const auto& line : resources::load_lines("mock_lexicon.tsv")) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    lex.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return lex;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'';
}

// Case-insensitive whole-word occurrences of needle in haystack.
std::vector<std::size_t> find_word_matches(const std::string& haystack_lc,
                                           const std::string& needle_lc) {
  std::vector<std::size_t> hits;
  std::size_t pos = 0;
  while ((pos = haystack_lc.find(needle_lc, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_word_char(haystack_lc[pos - 1]);
    const std::size_t end = pos + needle_lc.size();
    const bool right_ok = end >= haystack_lc.size() || !is_word_char(haystack_lc[end]);
    if (left_ok && right_ok) hits.push_back(pos);
    ++pos;
  }
  return hits;
}

std::string between(const std::string& s, std::string_view after,
                    std::string_view before) {
  const auto a = s.rfind(std::string(after));
  if (a == std::string::npos) return {};
  const auto start = a + after.size();
  const auto b = before.empty() ? std::string::npos : s.find(std::string(before), start);
  return b == std::string::npos ? s.substr(start) : s.substr(start, b - start);
}

std::string format_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

MockJudgeBackend::MockJudgeBackend() : MockJudgeBackend(load_lexicon_resource()) {}

MockJudgeBackend::MockJudgeBackend(
    std::vector<std::pair<std::string, std::string>> lexicon)
    : lexicon_(std::move(lexicon)) {
  // Longest surface first so "highly likely" beats "likely".
  std::stable_sort(lexicon_.begin(), lexicon_.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.size() > b.first.size();
                   });
}

void MockJudgeBackend::script_reply(std::string_view rendered_prompt,
                                    std::string reply) {
  std::lock_guard lock(mu_);
  scripted_[std::string(rendered_prompt)] = std::move(reply);
}

void MockJudgeBackend::fail_when(std::string_view marker) {
  std::lock_guard lock(mu_);
  fail_markers_.emplace_back(marker);
}

std::size_t MockJudgeBackend::call_count() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string MockJudgeBackend::complete(const llm::ChatRequest& req) {
  {
    std::lock_guard lock(mu_);
    ++calls_;
    for (const auto& marker : fail_markers_) {
      if (req.user.find(marker) != std::string::npos)
        throw TransportError("mock transport failure for marker: " + marker);
    }
    if (auto it = scripted_.find(req.user); it != scripted_.end())
      return it->second;
  }
  return rule_reply(req.user);
}

std::string MockJudgeBackend::rule_reply(const std::string& prompt) const {
  // Consistency: "Context: ...\nAssertion: ...\nIs the assertion ..."
  if (prompt.find("Is the assertion consistent") != std::string::npos) {
    const auto ctx_at = prompt.find("Context: ");
    const auto assert_at = prompt.rfind("\nAssertion: ");
    const auto question_at = prompt.rfind("\nIs the assertion consistent");
    if (ctx_at == std::string::npos || assert_at == std::string::npos ||
        question_at == std::string::npos || assert_at < ctx_at ||
        question_at < assert_at)
      throw TransportError("mock judge: malformed consistency prompt");
    const std::string context =
        prompt.substr(ctx_at + 9, assert_at - (ctx_at + 9));
    const std::string assertion =
        prompt.substr(assert_at + 12, question_at - (assert_at + 12));
    if (context.find(kNaToken) != std::string::npos) return "It is unclear.";
    std::string needle = lowercase(std::string(trim(assertion)));
    while (!needle.empty() && (needle.back() == '.' || needle.back() == ' '))
      needle.pop_back();
    if (!needle.empty() &&
        lowercase(context).find(needle) != std::string::npos)
      return "Yes";
    return "No";
  }
  // Decisiveness: "...\nStatement: <text>\nRating:"
  if (prompt.find("linguistic assertiveness") != std::string::npos) {
    const std::string text = between(prompt, "\nStatement: ", "\nRating:");
    const std::string text_lc = lowercase(text);
    for (const auto& [surface, _] : lexicon_) {
      if (!find_word_matches(text_lc, lowercase(surface)).empty())
        return format_short(hedged_decisiveness_);
    }
    return "1.0";
  }
  // Accuracy: "ground truth options = [...]\npredicted answer = ..."
  if (prompt.find("ground truth options = ") != std::string::npos) {
    const std::string targets =
        between(prompt, "ground truth options = ", "\npredicted answer = ");
    const std::string pred = lowercase(between(prompt, "\npredicted answer = ", ""));
    try {
      for (const auto& g : json::parse(targets)) {
        if (pred.find(lowercase(g.get<std::string>())) != std::string::npos)
          return "True";
      }
    } catch (const json::exception&) {
      // fall through to False
    }
    return "False";
  }
  // Extraction: "...\nText: <text>\nHedges: <your comma-separated list here>"
  if (prompt.find("semicolon-separated list of hedges") != std::string::npos) {
    const std::string text =
        between(prompt, "\nText: ", "\nHedges: <your comma-separated");
    const std::string text_lc = lowercase(text);
    std::vector<char> taken(text_lc.size(), 0);
    std::vector<std::pair<std::size_t, std::string>> found;
    for (const auto& [surface, _] : lexicon_) {
      for (std::size_t pos : find_word_matches(text_lc, lowercase(surface))) {
        bool overlap = false;
        for (std::size_t i = pos; i < pos + surface.size(); ++i)
          if (taken[i]) overlap = true;
        if (overlap) continue;
        for (std::size_t i = pos; i < pos + surface.size(); ++i) taken[i] = 1;
        found.emplace_back(pos, normalize_marker(surface));
      }
    }
    std::sort(found.begin(), found.end());
    std::string reply;
    for (const auto& [_, surface] : found) {
      if (!reply.empty()) reply += "; ";
      reply += surface;
    }
    reply += reply.empty() ? "####" : " ####";
    return reply;
  }
  // Standardization: "...\nHedge expressions:\n<one per line>"
  if (prompt.find("Hedge expressions:") != std::string::npos) {
    const std::string list = between(prompt, "Hedge expressions:\n", "");
    nlohmann::ordered_json mapping = nlohmann::ordered_json::object();
    std::istringstream in(list);
    std::string line;
    while (std::getline(in, line)) {
      const std::string marker(trim(line));
      if (marker.empty()) continue;
      std::string canonical = normalize_marker(marker);
      const std::string marker_norm = lowercase(canonical);
      for (const auto& [surface, canon] : lexicon_) {
        if (lowercase(surface) == marker_norm) {
          canonical = canon;
          break;
        }
      }
      mapping[marker] = canonical;
    }
    // Mimic the '}' stop sequence: the closing brace is withheld.
    std::string body = mapping.dump();
    if (!body.empty() && body.back() == '}') body.pop_back();
    return body;
  }
  throw TransportError("mock judge cannot route prompt: " +
                       prompt.substr(0, 60));
}

// --- Judge -----------------------------------------------------------------

Judge::Judge(std::shared_ptr<llm::ChatClient> client,
             prompts::TemplateStore templates,
             std::shared_ptr<VerdictCache> cache, JudgeConfig cfg)
    : client_(std::move(client)),
      templates_(std::move(templates)),
      cache_(std::move(cache)),
      cfg_(cfg) {}

std::string Judge::complete_raw(TaskKind kind, std::string_view template_id,
                                std::string rendered,
                                const llm::DecodeParams& decode,
                                bool cache_reply, bool bypass_cache_read) {
  JudgeTask task{kind, std::string(template_id), std::move(rendered), decode};
  const std::string key = cache_key(task, client_->id());
  if (cache_ && !bypass_cache_read) {
    if (auto hit = cache_->get(key)) return *hit;
  }
  llm::ChatRequest req;
  req.user = task.rendered_prompt;
  req.decode = task.decode;
  std::string raw = llm::complete_with_retries(*client_, req,
                                               cfg_.transport_attempts,
                                               cfg_.backoff);
  if (cache_ && cache_reply) cache_->put(key, raw);
  return raw;
}

TriState Judge::judge_consistency(std::string_view assertion,
                                  std::string_view context) {
  if (assertion.empty() || context.empty())
    throw ValidationError("judge_consistency requires non-empty texts");
  std::string prompt = templates_.render(
      "consistency", {{"sampled_response", std::string(context)},
                      {"sentence", std::string(assertion)}});
  return parse_consistency(complete_raw(TaskKind::consistency, "consistency",
                                        std::move(prompt),
                                        cfg_.consistency_decode, true));
}

double Judge::judge_decisiveness(std::string_view sentence) {
  if (sentence.empty())
    throw ValidationError("judge_decisiveness requires non-empty text");
  std::string prompt =
      templates_.render("decisiveness", {{"text", std::string(sentence)}});
  return parse_decisiveness(complete_raw(TaskKind::decisiveness, "decisiveness",
                                         std::move(prompt),
                                         cfg_.decisiveness_decode, true));
}

bool Judge::judge_accuracy(std::string_view prediction,
                           std::span<const std::string> gold_answers) {
  if (gold_answers.empty())
    throw ValidationError("judge_accuracy requires gold answers");
  std::string prompt = templates_.render(
      "accuracy", {{"targets", json(gold_answers).dump()},
                   {"pred", std::string(prediction)}});
  return parse_accuracy(complete_raw(TaskKind::accuracy, "accuracy",
                                     std::move(prompt), cfg_.accuracy_decode,
                                     true));
}

std::vector<std::string> Judge::extract_markers(std::string_view sentence) {
  if (sentence.empty())
    throw ValidationError("extract_markers requires non-empty text");
  std::string prompt =
      templates_.render("extract_markers", {{"text", std::string(sentence)}});
  return parse_extraction(complete_raw(TaskKind::extract_markers,
                                       "extract_markers", std::move(prompt),
                                       cfg_.extract_decode, true));
}

std::map<std::string, std::string> Judge::standardize_markers(
    std::span<const std::string> markers) {
  if (markers.empty())
    throw ValidationError("standardize_markers requires a non-empty list");
  std::string list;
  for (const auto& m : markers) {
    list += m;
    list += '\n';
  }
  list.pop_back();
  std::string prompt = templates_.render("standardize_markers",
                                         {{"extracted_markers_list", list}});
  // Replies are cached only after a successful parse so the single parse
  // retry can fetch a fresh reply.
  JudgeTask task{TaskKind::standardize_markers, "standardize_markers", prompt,
                 cfg_.standardize_decode};
  const std::string key = cache_key(task, client_->id());
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string raw =
        complete_raw(TaskKind::standardize_markers, "standardize_markers",
                     prompt, cfg_.standardize_decode, /*cache_reply=*/false,
                     /*bypass_cache_read=*/attempt > 0);
    try {
      auto mapping = parse_standardization(raw, markers);
      if (cache_) cache_->put(key, raw);
      return mapping;
    } catch (const JudgeParseError& e) {
      if (attempt > 0) throw;
      spdlog::warn("standardization parse failed, retrying once: {}", e.what());
    }
  }
  throw JudgeParseError("unreachable");
}

}  // namespace miceval::judge
