#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cosep/app/commands.hpp"
#include "cosep/common/json_fields.hpp"

namespace {

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cosep;
  CLI::App cli{"Object-conditioned audio source separation"};
  cli.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string corpus_dir, out_dir, checkpoint, input;
  std::vector<std::string> classes, variants;
  bool no_oracle = false, no_mixture = false;

  auto add_config = [&](CLI::App* c) {
    c->add_option("-c,--config", config_path, "experiment config JSON (defaults if omitted)");
    c->add_option("--set", sets, "override a config value, e.g. --set train.steps=200");
  };

  auto* synth = cli.add_subcommand("synth", "render a synthetic corpus");
  add_config(synth);
  synth->add_option("-o,--out", out_dir, "corpus directory")->required();

  auto* train = cli.add_subcommand("train", "train a model on a corpus");
  add_config(train);
  train->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train->add_option("-o,--out", out_dir, "run directory")->required();

  auto* evaluate = cli.add_subcommand("evaluate", "score a model on held-out mixtures");
  add_config(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint (baselines only if omitted)");
  evaluate->add_option("--corpus", corpus_dir, "corpus directory")->required();
  evaluate->add_option("-o,--out", out_dir, "report directory")->required();
  evaluate->add_flag("--no-oracle", no_oracle, "skip the oracle ratio-mask row");
  evaluate->add_flag("--no-mixture", no_mixture, "skip the mixture-as-estimate row");

  auto* separate = cli.add_subcommand("separate", "separate a WAV file by class");
  separate->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  separate->add_option("-i,--input", input, "mono 16-bit WAV")->required();
  separate->add_option("--classes", classes, "class names or ids")->required()->delimiter(',');
  separate->add_option("-o,--out", out_dir, "output directory")->required();

  auto* ablate = cli.add_subcommand("ablate", "train and score the loss variants");
  add_config(ablate);
  ablate->add_option("--corpus", corpus_dir, "corpus directory")->required();
  ablate->add_option("-o,--out", out_dir, "output directory")->required();
  ablate->add_option("--variants", variants, "subset of full,cosep_only,consistency_only,no_adaptable")
      ->delimiter(',');

  auto* show = cli.add_subcommand("config", "print the effective config");
  add_config(show);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    nlohmann::json result;
    if (*separate) {
      result = app::cmd_separate(checkpoint, input, classes, out_dir);
    } else {
      app::ExperimentConfig cfg = app::load_config(config_path, sets);
      if (*show) {
        result = cfg;
      } else if (*synth) {
        result = app::cmd_synth(cfg, out_dir);
      } else if (*train) {
        result = app::cmd_train(cfg, corpus_dir, out_dir, std::cerr);
      } else if (*evaluate) {
        if (no_oracle) cfg.eval.oracle = false;
        if (no_mixture) cfg.eval.mixture = false;
        result = app::cmd_evaluate(cfg, checkpoint, corpus_dir, out_dir);
      } else if (*ablate) {
        result = app::cmd_ablate(cfg, corpus_dir, out_dir, variants, std::cerr);
      }
    }
    std::cout << result.dump(1) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
}
