#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "equimod/exp/ablation.hpp"
#include "equimod/exp/runner.hpp"

using namespace equimod;

namespace {

exp::ExperimentConfig resolve_config(const std::string& config_path, const std::string& preset,
                                     const std::vector<std::string>& overrides,
                                     const std::string& out_dir) {
  if (config_path.empty() == preset.empty())
    throw std::invalid_argument("pass exactly one of --config or --preset");
  exp::ExperimentConfig config = config_path.empty() ? exp::preset(preset)
                                                     : exp::ExperimentConfig::load(config_path);
  for (const auto& o : overrides) config.set_override(o);
  if (!out_dir.empty()) config.output_dir = out_dir;
  config.validate();
  return config;
}

int run_train(const exp::ExperimentConfig& config) {
  exp::Runner runner(config);
  const auto result = runner.run();
  std::cout << "run completed: " << result.run_dir << "\n"
            << "final checkpoint: " << result.final_checkpoint << "\n"
            << "loss " << result.manifest.final_loss_total << " (invariance "
            << result.manifest.final_loss_inv << ", equivariance "
            << result.manifest.final_loss_equi << ")\n";
  return 0;
}

int run_eval_linear(const std::string& checkpoint, int probe_epochs, uint64_t seed) {
  auto restored = exp::Runner::restore(checkpoint);
  const auto data = exp::open_dataset(restored.config);
  evalsuite::ProbeProtocol protocol;
  protocol.epochs = probe_epochs;
  const auto r = evalsuite::linear_probe(*restored.model, *data.train, *data.test, protocol, seed);
  std::cout << "top-1 " << r.top1 << "\n"
            << "top-5 " << r.top5 << "\n";
  return 0;
}

int run_eval_equivariance(const std::string& checkpoint, const std::string& augmentation,
                          int64_t samples, const std::string& out, uint64_t seed) {
  auto restored = exp::Runner::restore(checkpoint);
  const auto data = exp::open_dataset(restored.config);
  const auto policy = restored.config.view_policies().first;

  evalsuite::EquivarianceReport report;
  report.dataset = augcodec::to_string(policy.dataset);
  if (augmentation.empty()) {
    report = evalsuite::full_report(*restored.model, *data.test, policy, restored.layout, samples,
                                    seed);
  } else {
    report.entries.push_back(evalsuite::per_augmentation_report(
        *restored.model, *data.test, policy, restored.layout, augmentation, samples, seed));
  }
  for (const auto& e : report.entries)
    std::cout << e.augmentation << ": absolute " << e.absolute << ", relative " << e.relative
              << " (n=" << e.samples << ")\n";
  if (!out.empty()) {
    report.write_csv(out);
    const std::string svg = out.size() > 4 && out.substr(out.size() - 4) == ".csv"
                                ? out.substr(0, out.size() - 4) + ".svg"
                                : out + ".svg";
    report.write_svg(svg);
    std::cout << "written: " << out << ", " << svg << "\n";
  }
  return 0;
}

int run_ablate(const exp::ExperimentConfig& base, const std::string& axis,
               const std::string& out) {
  const auto rows = exp::run_ablation_grid(base, axis, std::cout);
  for (const auto& r : rows)
    std::cout << r.label << "\t" << (r.status == "ok" ? std::to_string(r.top1) : r.status)
              << "\n";
  if (!out.empty()) {
    exp::write_ablation_csv(out, axis, rows);
    std::cout << "written: " << out << "\n";
  }
  for (const auto& r : rows)
    if (r.status != "ok") return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EquiMod training and evaluation"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir, checkpoint, augmentation, out_file, axis;
  std::vector<std::string> overrides;
  int probe_epochs = 90;
  int64_t samples = 10000;
  uint64_t seed = 1;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file");
    cmd->add_option("--preset", preset_name, "preset name");
    cmd->add_option("--set", overrides, "override, e.g. loss.lambda=0")->take_all();
    cmd->add_option("--out", out_dir, "output directory override");
  };

  auto* train = app.add_subcommand("train", "train a model");
  add_config_opts(train);

  auto* eval_linear = app.add_subcommand("eval-linear", "linear probe on a frozen checkpoint");
  eval_linear->add_option("--checkpoint", checkpoint, "checkpoint archive")->required();
  eval_linear->add_option("--epochs", probe_epochs, "probe epochs (protocol default 90)");
  eval_linear->add_option("--seed", seed, "probe seed");

  auto* eval_equi = app.add_subcommand("eval-equivariance", "per-augmentation equivariance");
  eval_equi->add_option("--checkpoint", checkpoint, "checkpoint archive")->required();
  eval_equi->add_option("--augmentation", augmentation, "probe only this augmentation");
  eval_equi->add_option("--samples", samples, "evaluation images per augmentation");
  eval_equi->add_option("--csv", out_file, "write csv (and svg) report");
  eval_equi->add_option("--seed", seed, "probe seed");

  auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
  add_config_opts(ablate);
  ablate->add_option("--axis", axis, "grid axis")->required();
  ablate->add_option("--table", out_file, "write the result table csv");

  auto* dump = app.add_subcommand("dump-config", "print a resolved configuration");
  add_config_opts(dump);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return run_train(resolve_config(config_path, preset_name, overrides, out_dir));
    if (eval_linear->parsed()) return run_eval_linear(checkpoint, probe_epochs, seed);
    if (eval_equi->parsed())
      return run_eval_equivariance(checkpoint, augmentation, samples, out_file, seed);
    if (ablate->parsed())
      return run_ablate(resolve_config(config_path, preset_name, overrides, out_dir), axis,
                        out_file);
    if (dump->parsed()) {
      std::cout << resolve_config(config_path, preset_name, overrides, out_dir).serialize();
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
