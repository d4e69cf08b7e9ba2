#include <cstdlib>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tabattack/cli/pipeline.hpp"
#include "tabattack/error.hpp"

namespace tabattack::cli {

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("tabattack");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  const char* env = std::getenv("TABATTACK_LOG");
  if (env == nullptr) return;
  const std::string v(env);
  if (v == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (v == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (v == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (v == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::warn("ignoring TABATTACK_LOG='{}' (expected error, warn, info or debug)", v);
  }
}

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  std::string md_rule;
};

using Command = void (*)(const RunConfig&, const Runtime&);

}  // namespace

int run_cli(int argc, char** argv) {
  if (spdlog::get("tabattack") == nullptr) setup_logging();

  CLI::App app{"Adversarial attacks on tabular classifiers through a VAE latent space"};
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"preprocess", "split the dataset, fit the preprocessor and write encoded splits", cmd_preprocess},
      {"train-target", "train every target model in the config", cmd_train_target},
      {"train-vae", "train the VAE on the train and validation splits", cmd_train_vae},
      {"attack", "run every attack against every target on the sampled test rows", cmd_attack},
      {"report", "write reconstruction, effectiveness, imperceptibility and sparsity tables", cmd_report},
      {"sweep", "grid over lambda and learning rate for one latent attack", cmd_sweep},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, _] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "run config JSON")->required();
    sub->add_option("--seed", opts.seed, "run seed; replaces every derived seed");
    sub->add_option("--out", opts.out, "output directory (overrides the config)");
    sub->add_option("--threads", opts.threads, "attack worker threads (default: hardware concurrency)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--md-rule", opts.md_rule, "outlier rule")->check(CLI::IsMember({"distance", "squared"}));
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      RunConfig cfg = RunConfig::load(opts.config);
      if (subs[i]->count("--seed") > 0) cfg.reseed(opts.seed);
      if (!opts.out.empty()) cfg.out = std::filesystem::absolute(opts.out).string();
      if (!opts.md_rule.empty()) cfg.evaluation.report.md_rule = md_rule_from_string(opts.md_rule);
      cfg.validate();
      Runtime rt;
      rt.threads = opts.threads > 0 ? opts.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
      spdlog::debug("{}: config hash {}, seed {}, threads {}", std::get<0>(commands[i]), cfg.hash(), cfg.seed,
                    rt.threads);
      std::get<2>(commands[i])(cfg, rt);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  }
  return 0;
}

}  // namespace tabattack::cli
