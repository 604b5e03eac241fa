// ovprobe: pipeline driver for the open-vocabulary detection-head stack.
//
// Subcommands: synth, train-base, retrieve, probe, infer, eval, run-all,
// sweep, ablate. All randomness derives from the single config seed; see the
// README for the config schema and artifact layout.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ovp/ovp.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  bool has_seed = false;
  uint64_t seed = 0;
};

ovp::PipelineConfig make_config(const CommonArgs& args) {
  ovp::PipelineConfig cfg;
  if (!args.config_path.empty()) cfg = ovp::load_config(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.has_seed) cfg.seed = args.seed;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON pipeline config");
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "seed (overrides config)")->each([&](const std::string&) {
    args.has_seed = true;
  });
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      ovp::fail(ovp::Errc::ParseError, "bad sweep value '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear-probe pipeline for open-vocabulary detection heads"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string sweep_param = "k";
  std::string sweep_values = "5,10,20,50,100";

  CLI::App* cmd_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  CLI::App* cmd_train_base = app.add_subcommand("train-base", "train base sigmoid head + distillation projector");
  CLI::App* cmd_retrieve = app.add_subcommand("retrieve", "retrieve top-K pseudo labels for novel classes");
  CLI::App* cmd_probe = app.add_subcommand("probe", "train the novel sigmoid head on pseudo labels");
  CLI::App* cmd_infer = app.add_subcommand("infer", "run unified-head inference on the test split");
  CLI::App* cmd_eval = app.add_subcommand("eval", "score detections against the test annotations");
  CLI::App* cmd_run_all = app.add_subcommand("run-all", "run the whole pipeline end to end");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "grid over k or beta, writing ap_novel per value");
  CLI::App* cmd_ablate = app.add_subcommand("ablate", "compare scoring variants on one dataset");

  for (CLI::App* cmd : {cmd_synth, cmd_train_base, cmd_retrieve, cmd_probe, cmd_infer, cmd_eval, cmd_run_all,
                        cmd_sweep, cmd_ablate})
    add_common(cmd, args);
  cmd_sweep->add_option("--param", sweep_param, "k or beta");
  cmd_sweep->add_option("--values", sweep_values, "comma-separated grid values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  try {
    ovp::PipelineConfig cfg = make_config(args);

    if (cmd_synth->parsed()) {
      std::string out = args.out_dir.empty() ? (std::filesystem::path(cfg.out_dir) / "dataset").string()
                                             : args.out_dir;
      auto manifest = ovp::run_synth(cfg, out);
      std::cout << "wrote " << manifest.string() << '\n';
    } else if (cmd_train_base->parsed()) {
      ovp::run_train_base(cfg);
      std::cout << "wrote " << ovp::paths::base_head(cfg).string() << '\n';
    } else if (cmd_retrieve->parsed()) {
      ovp::run_retrieve(cfg);
      std::cout << "wrote " << ovp::paths::pseudo_labels(cfg).string() << '\n';
    } else if (cmd_probe->parsed()) {
      ovp::run_probe(cfg);
      std::cout << "wrote " << ovp::paths::novel_head(cfg).string() << '\n';
    } else if (cmd_infer->parsed()) {
      ovp::run_infer(cfg);
      std::cout << "wrote " << ovp::paths::detections(cfg).string() << '\n';
    } else if (cmd_eval->parsed()) {
      ovp::Dataset d = ovp::load_dataset(ovp::resolve_manifest(cfg));
      ovp::EvalReport report = ovp::run_eval(cfg);
      std::cout << ovp::report_table(report, d);
      std::cout << "wrote " << ovp::paths::report(cfg).string() << '\n';
    } else if (cmd_run_all->parsed()) {
      ovp::EvalReport report = ovp::run_all(cfg);
      ovp::Dataset d = ovp::load_dataset(ovp::resolve_manifest(cfg));
      std::cout << ovp::report_table(report, d);
      std::cout << "wrote " << ovp::paths::report(cfg).string() << '\n';
    } else if (cmd_sweep->parsed()) {
      auto rows = ovp::run_sweep(cfg, sweep_param, parse_values(sweep_values));
      for (const auto& [value, ap] : rows)
        std::cout << sweep_param << '=' << value << "  ap_novel=" << ovp::format_fixed(ap) << '\n';
      std::cout << "wrote " << ovp::paths::sweep_csv(cfg).string() << '\n';
    } else if (cmd_ablate->parsed()) {
      auto rows = ovp::run_ablate(cfg);
      for (const auto& row : rows)
        std::cout << row.variant << "  ap_novel=" << ovp::format_fixed(row.report.ap_novel)
                  << "  ap_base=" << ovp::format_fixed(row.report.ap_base) << '\n';
      std::cout << "wrote " << ovp::paths::ablation_csv(cfg).string() << '\n';
    }
  } catch (const ovp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ovp::Errc::ParseError:
      case ovp::Errc::RangeError:
      case ovp::Errc::InvalidConfig:
        return 2;
      default:
        return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
