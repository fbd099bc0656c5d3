// miceval CLI: generate | annotate | mic | metrics | report
//
// Exit codes: 0 success, 1 usage/config error, 2 data/validation error,
// 3 backend error.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "miceval/errors.hpp"
#include "miceval/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threshold;
  std::vector<std::size_t> sweep;
  bool exclude_no_hedge = false;
  std::optional<std::string> aggregation;
  std::optional<int> parallelism;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "Run config file (JSON)");
  cmd->add_option("--out", flags.out, "Output directory");
  cmd->add_option("--seed", flags.seed, "Random seed recorded in all outputs");
  cmd->add_option("--threshold", flags.threshold,
                  "Marker support threshold T");
  cmd->add_option("--sweep", flags.sweep,
                  "Threshold sweep list (ascending)")
      ->delimiter(',');
  cmd->add_flag("--exclude-no-hedge", flags.exclude_no_hedge,
                "Drop the <no_hedge> pseudo-marker from MIC tables");
  cmd->add_option("--aggregation", flags.aggregation,
                  "MAE aggregation: marker, sentence or response")
      ->check(CLI::IsMember({"marker", "sentence", "response"}));
  cmd->add_option("--parallelism", flags.parallelism,
                  "Concurrent judge calls");
}

miceval::pipeline::RunConfig build_config(const CommonFlags& flags) {
  miceval::pipeline::RunConfig cfg;
  if (!flags.config_file.empty())
    cfg = miceval::pipeline::RunConfig::from_file(flags.config_file);
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.threshold) cfg.threshold = *flags.threshold;
  if (!flags.sweep.empty()) cfg.sweep = flags.sweep;
  if (flags.exclude_no_hedge) cfg.exclude_no_hedge = true;
  if (flags.aggregation)
    cfg.aggregation = miceval::metrics::aggregation_from_string(*flags.aggregation);
  if (flags.parallelism) cfg.parallelism = *flags.parallelism;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Epistemic-marker internal confidence pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* generate = app.add_subcommand(
      "generate", "Elicit responses (+K samples) from the task model");
  auto* annotate = app.add_subcommand(
      "annotate", "Segment, extract markers and score confidence");
  auto* mic =
      app.add_subcommand("mic", "Build MIC tables from annotations");
  auto* metrics = app.add_subcommand(
      "metrics", "Compute the stability metric report");
  auto* report =
      app.add_subcommand("report", "Emit plot-ready figure data");
  for (auto* cmd : {generate, annotate, mic, metrics, report})
    add_common_flags(cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = build_config(flags);
    if (generate->parsed() || annotate->parsed()) {
      auto rt = miceval::pipeline::make_runtime(cfg);
      if (generate->parsed())
        miceval::pipeline::cmd_generate(cfg, rt);
      else
        miceval::pipeline::cmd_annotate(cfg, rt);
    } else if (mic->parsed()) {
      miceval::pipeline::cmd_mic(cfg);
    } else if (metrics->parsed()) {
      miceval::pipeline::cmd_metrics(cfg);
    } else if (report->parsed()) {
      miceval::pipeline::cmd_report(cfg);
    }
    return 0;
  } catch (const miceval::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 1;
  } catch (const miceval::JudgeError& e) {
    spdlog::error("backend error: {}", e.what());
    return 3;
  } catch (const miceval::AnnotationError& e) {
    spdlog::error("backend error: {}", e.what());
    return 3;
  } catch (const miceval::Error& e) {
    spdlog::error("data error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("unexpected error: {}", e.what());
    return 2;
  }
}
