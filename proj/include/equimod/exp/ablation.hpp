#pragma once

#include <ostream>

#include "equimod/exp/config.hpp"

namespace equimod::exp {

struct AblationCell {
  std::string label;  // row label, matching the corresponding results table
  ExperimentConfig config;
};

// axes: head-depth | predictor-shape | aug-projector | lambda | tau-prime | batch
std::vector<std::string> ablation_axes();
std::vector<AblationCell> ablation_grid(const ExperimentConfig& base, const std::string& axis);

struct AblationRow {
  std::string label;
  std::string status;  // ok | failed: <reason>
  double top1 = 0;
  double top5 = 0;
};

// Runs every cell (training + linear probe); failed cells are recorded and
// the grid continues.
std::vector<AblationRow> run_ablation_grid(const ExperimentConfig& base, const std::string& axis,
                                           std::ostream& log);

void write_ablation_csv(const std::string& path, const std::string& axis,
                        const std::vector<AblationRow>& rows);

}  // namespace equimod::exp
