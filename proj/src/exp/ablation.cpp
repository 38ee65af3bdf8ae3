#include "equimod/exp/ablation.hpp"

#include <filesystem>
#include <fstream>

#include "equimod/exp/runner.hpp"

namespace equimod::exp {

std::vector<std::string> ablation_axes() {
  return {"head-depth", "predictor-shape", "aug-projector", "lambda", "tau-prime", "batch"};
}

std::vector<AblationCell> ablation_grid(const ExperimentConfig& base, const std::string& axis) {
  std::vector<AblationCell> cells;
  auto cell = [&](const std::string& label) -> ExperimentConfig& {
    cells.push_back({label, base});
    return cells.back().config;
  };

  if (axis == "head-depth") {
    cell("None").equi_layers = 0;
    cell("1").equi_layers = 1;
    cell("2").equi_layers = 2;
    cell("3").equi_layers = 3;
  } else if (axis == "predictor-shape") {
    cell("1").predictor_layers = 1;
    for (int hidden : {16, 128, 2048}) {
      auto& c = cell("2 (H: " + std::to_string(hidden) + "-d)");
      c.predictor_layers = 2;
      c.predictor_hidden = hidden;
    }
  } else if (axis == "aug-projector") {
    cell("None").aug_projector_layers = 0;
    for (int out : {16, 128, 2048}) {
      auto& c = cell("1 (O: " + std::to_string(out) + "-d)");
      c.aug_projector_layers = 1;
      c.aug_projector_dim = out;
    }
    for (int hidden : {16, 128, 2048}) {
      auto& c = cell("2 (H: " + std::to_string(hidden) + "-d; O: 128-d)");
      c.aug_projector_layers = 2;
      c.aug_projector_hidden = hidden;
      c.aug_projector_dim = 128;
    }
  } else if (axis == "lambda") {
    for (const char* v : {"0", "0.1", "0.2", "0.5", "1", "2", "5", "10"}) {
      auto& c = cell(v);
      c.loss.lambda = std::stod(v);
    }
  } else if (axis == "tau-prime") {
    for (const char* v : {"0.05", "0.1", "0.2", "0.5", "1"}) {
      auto& c = cell(v);
      c.loss.tau_prime = std::stod(v);
    }
  } else if (axis == "batch") {
    for (const char* v : {"64", "128", "256", "512", "1024"}) {
      auto& c = cell(v);
      c.batch_size = std::stoll(v);
    }
  } else {
    throw std::invalid_argument("unknown ablation axis: " + axis);
  }

  for (size_t i = 0; i < cells.size(); ++i) {
    std::string tag = cells[i].label;
    for (auto& ch : tag)
      if (ch == ' ' || ch == ':' || ch == ';' || ch == '(' || ch == ')') ch = '_';
    cells[i].config.output_dir = base.output_dir + "/" + axis + "-" + tag;
  }
  return cells;
}

std::vector<AblationRow> run_ablation_grid(const ExperimentConfig& base, const std::string& axis,
                                           std::ostream& log) {
  std::vector<AblationRow> rows;
  for (const auto& cell : ablation_grid(base, axis)) {
    AblationRow row;
    row.label = cell.label;
    log << "[ablate] " << axis << " = " << cell.label << "\n";
    try {
      Runner runner(cell.config);
      const auto result = runner.run();
      auto restored = Runner::restore(result.final_checkpoint);
      const auto data = open_dataset(cell.config);
      const auto probe = evalsuite::linear_probe(*restored.model, *data.train, *data.test,
                                                 evalsuite::ProbeProtocol{}, cell.config.seed);
      row.status = "ok";
      row.top1 = probe.top1;
      row.top5 = probe.top5;
      log << "[ablate]   top-1 " << probe.top1 << "\n";
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
      log << "[ablate]   " << row.status << "\n";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::string& path, const std::string& axis,
                        const std::vector<AblationRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << axis << ",top1,top5,status\n";
  for (const auto& r : rows)
    f << "\"" << r.label << "\"," << r.top1 << "," << r.top5 << "," << r.status << "\n";
}

}  // namespace equimod::exp
