#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uqpipe/errors.hpp"
#include "uqpipe/pipeline.hpp"
#include "uqpipe/version.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "uqpipe-run";
  std::string model;
  std::vector<std::string> stages;
  std::optional<int> threads;
  bool print_config = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--out-dir", f.out_dir, "run directory")->capture_default_str();
  cmd->add_option("--model", f.model, "builtin model: ishigami | gfunction | hetero-ishigami");
  cmd->add_option("--threads", f.threads, "worker threads (results do not depend on it)");
  cmd->add_flag("--print-config", f.print_config, "print the effective configuration and exit");
}

int run(const Flags& f, std::vector<std::string> stages) {
  uqpipe::RunConfig cfg = f.config.empty() ? uqpipe::config_from_json(nlohmann::json::object())
                                           : uqpipe::load_config(f.config);
  if (!f.model.empty()) {
    nlohmann::json doc = uqpipe::config_to_json(cfg);
    doc["model"] = {{"source", "builtin"}, {"name", f.model}};
    const auto base = cfg.base_dir;
    const int threads = cfg.threads;
    cfg = uqpipe::config_from_json(doc, base);
    cfg.threads = threads;
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) {
    if (*f.threads < 1) throw uqpipe::ConfigError("--threads must be >= 1");
    cfg.threads = *f.threads;
  }
  if (f.print_config) {
    std::cout << uqpipe::config_to_json(cfg).dump(2) << "\n";
    return 0;
  }
  uqpipe::PipelineOptions opts;
  opts.out_dir = f.out_dir;
  opts.stages = std::move(stages);
  const nlohmann::json report = uqpipe::run_pipeline(cfg, opts);
  for (const auto& [stage, section] : report.at("stages").items())
    if (section.contains("warning")) std::cerr << "uqpipe: warning [" << stage << "]: " << section.at("warning").get<std::string>() << "\n";
  std::cout << "report: " << (opts.out_dir / "report.json").string() << "\n"
            << "summary: " << (opts.out_dir / "summary.txt").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design, screening, joint GP metamodeling, Sobol' indices and quantiles for expensive simulators",
               "uqpipe"};
  app.set_version_flag("--version", uqpipe::kVersion);
  app.require_subcommand(1);

  Flags flags;
  std::string chosen;
  const std::vector<std::pair<std::string, std::string>> single = {
      {"design", "optimized Latin hypercube design (exported for the simulator)"},
      {"ingest", "evaluate the builtin model or ingest external simulator outputs"},
      {"screen", "HSIC screening of the inputs"},
      {"fit", "sequential joint mean/dispersion GP"},
      {"validate", "Q2 and coverage curves"},
      {"sobol", "Sobol' indices through the joint metamodel"},
      {"quantile", "quantile estimates with confidence intervals"}};
  for (const auto& [name, help] : single) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    cmd->callback([&chosen, name = name] { chosen = name; });
  }
  CLI::App* pipe = app.add_subcommand("pipeline", "run the stages in order (all by default)");
  add_common(pipe, flags);
  pipe->add_option("--stage", flags.stages, "stage(s) to run; upstream stages run or load from cache")
      ->delimiter(',');
  pipe->callback([&chosen] { chosen = "pipeline"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run(flags, chosen == "pipeline" ? flags.stages : std::vector<std::string>{chosen});
  } catch (const uqpipe::Error& e) {
    std::cerr << "uqpipe: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "uqpipe: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "uqpipe: internal error: " << e.what() << "\n";
    return 4;
  }
}
