// vatlas: atlas-based video editing pipeline driver.
//
// One run directory holds everything a pipeline execution produces; each
// subcommand executes one stage (or `all` for the whole chain) against that
// directory, skipping stages the manifest already marks complete.
//
// Exit codes: 0 success, 2 configuration problem, 3 missing stage input,
// 4 training divergence, 1 anything else.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vatlas/config.hpp"
#include "vatlas/errors.hpp"
#include "vatlas/pipeline.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string run_dir;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

// The optional --seed reseeds the whole run: the top-level seed and every
// per-stage seed are replaced by values derived from it.
void apply_seed(vatlas::PipelineConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.scene.seed = seed + 1;
  cfg.decompose.seed = seed + 2;
  cfg.diffusion.train.seed = seed + 3;
  cfg.diffusion.finetune.seed = seed + 4;
  cfg.edit.seed = seed + 5;
  cfg.uv.seed = seed + 6;
}

vatlas::PipelineConfig resolve_config(const CliArgs& args) {
  vatlas::PipelineConfig cfg =
      args.config_path.empty() ? vatlas::default_config() : vatlas::load_config(args.config_path);
  if (args.seed) apply_seed(cfg, *args.seed);
  return cfg;
}

void add_run_options(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file (defaults are built in)");
  cmd->add_option("--run", args.run_dir, "run directory")->required();
  cmd->add_flag("--force", args.force, "re-run even if the manifest marks the stage complete");
  cmd->add_option("--seed", args.seed, "override the top-level seed (reseeds every stage)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atlas-based video editing pipeline"};
  app.require_subcommand(1);

  CliArgs args;
  std::optional<vatlas::Stage> stage;
  bool run_everything = false;
  bool print_default = false;

  const std::pair<const char*, vatlas::Stage> stages[] = {
      {"synth", vatlas::Stage::Synth},
      {"decompose", vatlas::Stage::Decompose},
      {"edit-atlas", vatlas::Stage::EditAtlas},
      {"edit-bg", vatlas::Stage::EditBg},
      {"optimize-uv", vatlas::Stage::OptimizeUv},
      {"render", vatlas::Stage::Render},
      {"eval", vatlas::Stage::Eval},
  };
  const char* const descriptions[] = {
      "render the synthetic input video and opacity masks",
      "train the layered decomposition",
      "edit the foreground atlas and extract its mask",
      "edit the background atlas",
      "re-optimize the foreground mapping for the edited atlases",
      "render the edited video",
      "score the run against ground truth",
  };
  int di = 0;
  for (const auto& [name, s] : stages) {
    CLI::App* cmd = app.add_subcommand(name, descriptions[di++]);
    add_run_options(cmd, args);
    vatlas::Stage captured = s;
    cmd->callback([&stage, captured] { stage = captured; });
  }
  CLI::App* all_cmd = app.add_subcommand("all", "run every stage in order");
  add_run_options(all_cmd, args);
  all_cmd->callback([&run_everything] { run_everything = true; });

  CLI::App* print_cmd = app.add_subcommand("print-config", "write the default config to stdout");
  print_cmd->callback([&print_default] { print_default = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (print_default) {
      std::cout << vatlas::config_to_json(vatlas::default_config());
      return 0;
    }
    vatlas::PipelineConfig cfg = resolve_config(args);
    if (run_everything)
      vatlas::run_all(cfg, args.run_dir, args.force);
    else
      vatlas::run_stage(cfg, args.run_dir, *stage, args.force);
    return 0;
  } catch (const vatlas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vatlas::MissingInputError& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return 3;
  } catch (const vatlas::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
