// s2a: run the pipeline on an image, count events in a WAV, benchmark,
// compute evaluation metrics, or serve the HTTP API.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "s2a/cli/commands.hpp"
#include "s2a/service/server.hpp"

namespace {

s2a::service::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->http().stop();
}

void add_pipeline_flags(CLI::App* cmd, s2a::cli::PipelineOptions& opts) {
  cmd->add_option("--backend", opts.backend, "fixture or remote")
      ->check(CLI::IsMember({"fixture", "remote"}));
  cmd->add_option("--config", opts.config_path, "key = value pipeline config file");
  cmd->add_option("--prompts", opts.prompts_path, "prompt template file");
  cmd->add_option("--seed", opts.seed, "rng seed (overrides config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-to-audio pipeline tool"};
  app.require_subcommand(1);

  s2a::cli::PipelineOptions opts;
  std::string image_path;
  std::string out_dir = "out";

  auto* run = app.add_subcommand("run", "render the four audio modes for an image");
  run->add_option("image", image_path, "JPEG or PNG scene image")->required();
  run->add_option("--out", out_dir, "output directory");
  add_pipeline_flags(run, opts);

  std::string wav_path;
  auto* count = app.add_subcommand("count-events", "count discrete sound events in a WAV file");
  count->add_option("wav", wav_path)->required();

  std::size_t bench_n = 50;
  std::string timings_path = "bench_timings.json";
  auto* bench = app.add_subcommand("bench", "time N sequential end-to-end runs");
  bench->add_option("image", image_path)->required();
  bench->add_option("--n", bench_n, "number of runs")->check(CLI::PositiveNumber);
  bench->add_option("--timings", timings_path, "where to write the raw timings JSON");
  add_pipeline_flags(bench, opts);

  std::string metric;
  std::string corpus_path;
  bool as_table = false;
  auto* evalc = app.add_subcommand("eval", "compute an evaluation metric over a JSONL corpus");
  evalc->add_option("metric", metric, "accuracy, kappa, agreement, phrase-consistency or intent")->required();
  evalc->add_option("input", corpus_path, "line-delimited JSON corpus")->required();
  evalc->add_option("--backend", opts.backend, "embedding backend: fixture or remote")
      ->check(CLI::IsMember({"fixture", "remote"}));
  evalc->add_flag("--table", as_table, "print a plain-text table instead of JSON");

  std::optional<int> port;
  std::optional<std::string> storage;
  auto* serve = app.add_subcommand("serve", "serve the HTTP API (see S2A_* environment variables)");
  serve->add_option("--port", port);
  serve->add_option("--storage", storage, "storage root directory");
  add_pipeline_flags(serve, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto result = s2a::cli::run(image_path, out_dir, opts);
      for (const auto& n : result.notices) std::cerr << n << "\n";
      for (const auto& w : result.bundle.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& f : result.files) std::cout << f.string() << "\n";
    } else if (*count) {
      std::cout << s2a::cli::format_events(s2a::cli::count_events_file(wav_path));
    } else if (*bench) {
      const auto result = s2a::cli::bench(image_path, bench_n, opts);
      s2a::cli::write_text(timings_path, s2a::cli::bench_json(result).dump(2) + "\n");
      std::cout << s2a::cli::format_bench(result);
    } else if (*evalc) {
      auto backends = s2a::make_backends(opts.backend, 42);
      const auto report = s2a::cli::evaluate_file(metric, corpus_path, *backends.embedder);
      std::cout << (as_table ? s2a::json_io::text_table(report) : report.dump(2) + "\n");
    } else if (*serve) {
      auto cfg = s2a::service::ServiceConfig::from_env();
      if (port) cfg.port = *port;
      if (storage) cfg.storage_root = *storage;
      if (opts.config_path) cfg.pipeline = s2a::load_config(*opts.config_path);
      if (opts.prompts_path) cfg.prompts = s2a::load_prompts(*opts.prompts_path);
      if (opts.seed) cfg.pipeline.rng_seed = *opts.seed;
      if (opts.backend != "fixture") cfg.backend = opts.backend;
      auto backends = s2a::make_backends(cfg.backend, cfg.pipeline.rng_seed, cfg.prompts);
      s2a::service::Service service(cfg, std::move(backends));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
      service.run();
      g_service = nullptr;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
