#include "miceval/judge.hpp"

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "miceval/errors.hpp"

using namespace miceval;
namespace fs = std::filesystem;

namespace {

prompts::TemplateStore templates() { return prompts::TemplateStore::load_default(); }

std::shared_ptr<judge::MockJudgeBackend> mock() {
  return std::make_shared<judge::MockJudgeBackend>();
}

judge::Judge make_judge(std::shared_ptr<llm::ChatClient> client,
                        std::shared_ptr<judge::VerdictCache> cache = nullptr) {
  judge::JudgeConfig cfg;
  cfg.backoff = std::chrono::milliseconds(1);
  return judge::Judge(std::move(client), templates(), std::move(cache), cfg);
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "miceval_judge_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse_consistency: yes/no and the n/a fallback") {
  CHECK(judge::parse_consistency("Yes") == judge::TriState::yes);
  CHECK(judge::parse_consistency(" yes, it is") == judge::TriState::yes);
  CHECK(judge::parse_consistency("No") == judge::TriState::no);
  CHECK(judge::parse_consistency("Answer: No") == judge::TriState::no);
  CHECK(judge::parse_consistency("It depends") == judge::TriState::na);
  CHECK(judge::parse_consistency("n/a") == judge::TriState::na);
  CHECK(judge::parse_consistency("") == judge::TriState::na);
}

TEST_CASE("parse_consistency: fuzz non-conforming strings to na") {
  std::mt19937_64 rng(5);
  const std::string charset =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,:;!?#/";
  int tested = 0;
  while (tested < 100) {
    std::string s;
    const std::size_t len = rng() % 40;
    for (std::size_t i = 0; i < len; ++i) s += charset[rng() % charset.size()];
    // leading alphabetic word decides the verdict; skip conforming draws
    std::string word;
    for (char ch : s) {
      if (!std::isalpha(static_cast<unsigned char>(ch))) break;
      word += static_cast<char>(std::tolower(ch));
    }
    if (word == "yes" || word == "no") continue;
    CHECK(judge::parse_consistency(s) == judge::TriState::na);
    ++tested;
  }
}

TEST_CASE("parse_decisiveness: exemplar values, punt rule, clamping") {
  CHECK(judge::parse_decisiveness("0.689") == doctest::Approx(0.689));
  CHECK(judge::parse_decisiveness("1.0") == doctest::Approx(1.0));
  CHECK(judge::parse_decisiveness("Rating: 0.224") == doctest::Approx(0.224));
  CHECK(judge::parse_decisiveness("1.7") == doctest::Approx(1.0));
  CHECK_THROWS_AS(judge::parse_decisiveness("very assertive"),
                  JudgeParseError);
  CHECK_THROWS_AS(judge::parse_decisiveness(""), JudgeParseError);
  CHECK_THROWS_AS(judge::parse_decisiveness("nan"), JudgeParseError);
}

TEST_CASE("parse_decisiveness: clamp property over random out-of-range floats") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> out_of_range(1.0001, 250.0);
  for (int iter = 0; iter < 500; ++iter) {
    const double v = out_of_range(rng);
    const bool negative = rng() % 2 == 0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", negative ? -v : v);
    const double parsed = judge::parse_decisiveness(buf);
    CHECK(parsed == doctest::Approx(negative ? 0.0 : 1.0));
  }
}

TEST_CASE("parse_accuracy: case and punctuation insensitive") {
  CHECK(judge::parse_accuracy("True"));
  CHECK_FALSE(judge::parse_accuracy("False"));
  CHECK(judge::parse_accuracy("true."));
  CHECK_FALSE(judge::parse_accuracy(" FALSE!! "));
  CHECK_THROWS_AS(judge::parse_accuracy("maybe"), JudgeParseError);

  std::mt19937_64 rng(29);
  const std::string punct = ".,;:!? ";
  for (int iter = 0; iter < 500; ++iter) {
    const bool truth = rng() % 2 == 0;
    std::string word = truth ? "true" : "false";
    for (auto& ch : word)
      if (rng() % 2) ch = static_cast<char>(std::toupper(ch));
    std::string s = word;
    for (int p = static_cast<int>(rng() % 3); p > 0; --p)
      s += punct[rng() % punct.size()];
    if (rng() % 2) s = " " + s;
    CHECK(judge::parse_accuracy(s) == truth);
  }
}

TEST_CASE("parse_extraction: exemplar strings") {
  const auto hits = judge::parse_extraction("I think; I could be mistaken ####");
  CHECK(hits == std::vector<std::string>{"I think", "I could be mistaken"});
  CHECK(judge::parse_extraction("####").empty());
  CHECK(judge::parse_extraction("").empty());
  CHECK(judge::parse_extraction("perhaps ####\nText: junk") ==
        std::vector<std::string>{"perhaps"});
}

TEST_CASE("normalize_marker keeps the pronoun I capitalized") {
  CHECK(judge::normalize_marker("  I  Think ") == "I think");
  CHECK(judge::normalize_marker("i'm fairly sure") == "I'm fairly sure");
  CHECK(judge::normalize_marker("LIKELY") == "likely");
  CHECK(judge::normalize_marker("is a possibility") == "is a possibility");
}

TEST_CASE("parse_standardization: stop-sequence brace restored, keys checked") {
  const std::vector<std::string> inputs{"suggests", "suggesting"};
  const auto mapping = judge::parse_standardization(
      R"({"suggests": "suggest", "suggesting": "suggest")", inputs);
  CHECK(mapping.at("suggests") == "suggest");
  CHECK(mapping.at("suggesting") == "suggest");

  CHECK_THROWS_AS(
      judge::parse_standardization(R"({"suggests": "suggest"})", inputs),
      JudgeParseError);
  CHECK_THROWS_AS(judge::parse_standardization("no json here", inputs),
                  JudgeParseError);
  const std::vector<std::string> one{"likely"};
  CHECK_THROWS_AS(judge::parse_standardization(
                      R"({"likely": "likely", "extra": "extra"})", one),
                  JudgeParseError);
}

TEST_CASE("mock judge: consistency rules") {
  auto j = make_judge(mock());
  CHECK(j.judge_consistency("A", "Context mentions A somewhere.") ==
        judge::TriState::yes);
  CHECK(j.judge_consistency("Paris is the capital.",
                            "The capital is Berlin.") == judge::TriState::no);
  CHECK(j.judge_consistency("Anything", "totally unclear [NA] context") ==
        judge::TriState::na);
}

TEST_CASE("mock judge: extraction matches the exemplars") {
  auto j = make_judge(mock());
  CHECK(j.extract_markers("Perhaps he was 80 years old.") ==
        std::vector<std::string>{"perhaps"});
  CHECK(j.extract_markers("The Mediterranean Sea's maximum depth measures "
                          "5,109 meters.")
            .empty());
  const auto two = j.extract_markers("I think it is likely Paris.");
  CHECK(two == std::vector<std::string>{"I think", "likely"});
}

TEST_CASE("mock judge: standardization merges and separates") {
  auto j = make_judge(mock());
  const std::vector<std::string> morpho{"suggests", "suggesting"};
  const auto m1 = j.standardize_markers(morpho);
  CHECK(m1.at("suggests") == "suggest");
  CHECK(m1.at("suggesting") == "suggest");

  const std::vector<std::string> poss{"possible", "possibly"};
  const auto m2 = j.standardize_markers(poss);
  CHECK(m2.at("possible") == m2.at("possibly"));

  const std::vector<std::string> certain{"not certain", "uncertain"};
  const auto m3 = j.standardize_markers(certain);
  CHECK(m3.at("not certain") != m3.at("uncertain"));

  // keys are a bijection on the input set
  CHECK(m3.size() == certain.size());
}

TEST_CASE("mock judge: decisiveness thresholds and accuracy") {
  auto backend = mock();
  auto j = make_judge(backend);
  CHECK(j.judge_decisiveness("Perhaps it was him.") == doctest::Approx(0.4));
  CHECK(j.judge_decisiveness("The answer is 4.") == doctest::Approx(1.0));

  const std::vector<std::string> gold{"Paris"};
  CHECK(j.judge_accuracy("It is probably paris.", gold));
  CHECK_FALSE(j.judge_accuracy("It is Berlin.", gold));
  CHECK_THROWS_AS(j.judge_accuracy("anything", {}), ValidationError);
}

TEST_CASE("scripted replies take precedence and map through the parser") {
  auto backend = mock();
  auto store = templates();
  const std::string prompt = store.render(
      "decisiveness", {{"text", "Scripted sentence."}});
  backend->script_reply(prompt, "0.123");
  auto j = make_judge(backend);
  CHECK(j.judge_decisiveness("Scripted sentence.") == doctest::Approx(0.123));
}

TEST_CASE("cache: hit avoids the backend and survives reopen") {
  auto dir = fresh_dir("cache_roundtrip");
  auto backend = mock();
  {
    auto cache = std::make_shared<judge::VerdictCache>(dir);
    auto j = make_judge(backend, cache);
    CHECK(j.judge_consistency("A", "has A") == judge::TriState::yes);
    const auto calls_after_first = backend->call_count();
    CHECK(j.judge_consistency("A", "has A") == judge::TriState::yes);
    CHECK(backend->call_count() == calls_after_first);  // served from cache
    CHECK(cache->size() == 1);
  }
  {
    auto cache = std::make_shared<judge::VerdictCache>(dir);
    CHECK(cache->size() == 1);
    auto j = make_judge(backend, cache);
    const auto calls_before = backend->call_count();
    CHECK(j.judge_consistency("A", "has A") == judge::TriState::yes);
    CHECK(backend->call_count() == calls_before);  // reloaded from disk
  }
}

TEST_CASE("cache: concurrent writers stay consistent") {
  auto dir = fresh_dir("cache_concurrent");
  judge::VerdictCache cache(dir);
  std::vector<std::thread> writers;
  for (int t = 0; t < 4; ++t) {
    writers.emplace_back([&cache, t] {
      for (int i = 0; i < 50; ++i) {
        cache.put("key-" + std::to_string(i), "value-" + std::to_string(i));
        (void)t;
      }
    });
  }
  for (auto& w : writers) w.join();
  CHECK(cache.size() == 50);
  judge::VerdictCache reopened(dir);
  CHECK(reopened.size() == 50);
  CHECK(reopened.get("key-7").value() == "value-7");
}

TEST_CASE("transport failures retry then surface as JudgeError") {
  auto backend = mock();
  backend->fail_when("always-fails");
  auto j = make_judge(backend);
  CHECK_THROWS_AS(j.judge_decisiveness("this always-fails sentence"),
                  TransportError);
  // three attempts were made
  CHECK(backend->call_count() == 3);
}

TEST_CASE("http backend speaks the chat-completion shape") {
  httplib::Server server;
  server.Post("/v1/chat/completions",
              [](const httplib::Request& req, httplib::Response& res) {
                const auto body = nlohmann::json::parse(req.body);
                REQUIRE(body.at("model") == "test-judge");
                REQUIRE(body.at("messages").size() == 1);
                nlohmann::json reply;
                reply["choices"] = {{{"message", {{"content", "True"}}}}};
                res.set_content(reply.dump(), "application/json");
              });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  llm::HttpClientConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "test-judge";
  auto client = llm::make_http_client(cfg);
  auto j = make_judge(client);
  const std::vector<std::string> gold{"whatever"};
  CHECK(j.judge_accuracy("prediction", gold));

  server.stop();
  serving.join();
}

TEST_CASE("http backend: transport failure on unreachable host") {
  llm::HttpClientConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";  // nothing listens here
  cfg.model = "test";
  cfg.timeout_seconds = 1;
  auto client = llm::make_http_client(cfg);
  llm::ChatRequest req;
  req.user = "hello";
  CHECK_THROWS_AS(client->complete(req), TransportError);
}
