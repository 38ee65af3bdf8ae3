#pragma once

#include <functional>
#include <optional>

#include "equimod/evalsuite/linear_probe.hpp"
#include "equimod/evalsuite/report.hpp"
#include "equimod/exp/datasets.hpp"
#include "equimod/exp/manifest.hpp"
#include "equimod/networks/checkpoint.hpp"
#include "equimod/trainer/trainer.hpp"

namespace equimod::exp {

struct RunResult {
  RunManifest manifest;
  std::string run_dir;
  std::string final_checkpoint;
};

// Trains one experiment end to end: fits the trace normalizer, writes the
// layout descriptor and manifest, loops epochs with per-epoch checkpoints
// and a metrics CSV, and resumes from the newest checkpoint when present.
class Runner {
public:
  explicit Runner(ExperimentConfig config);

  RunResult run();

  // normalization statistics are frozen before training over a fixed stream
  // of sampled traces, independent of the run seed
  static augcodec::LayoutDescriptor fit_layout(const ExperimentConfig& config);

  static std::string checkpoint_path(const std::string& dir, int64_t epoch);
  static std::optional<std::string> latest_checkpoint(const std::string& dir);

  // rebuild a model + config from an archive (for evaluation tools)
  struct Restored {
    ExperimentConfig config;
    augcodec::LayoutDescriptor layout;
    std::unique_ptr<networks::EquiModModel> model;
  };
  static Restored restore(const std::string& checkpoint_file);

  // per-step observer for tests (step index, result)
  std::function<void(int64_t, const trainer::StepResult&)> on_step;

private:
  ExperimentConfig config_;
};

}  // namespace equimod::exp
