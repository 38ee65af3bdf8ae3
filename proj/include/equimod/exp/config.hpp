#pragma once

#include <string>
#include <vector>

#include "equimod/augcodec/policy.hpp"
#include "equimod/networks/model.hpp"
#include "equimod/objectives/losses.hpp"
#include "equimod/trainer/lars.hpp"

namespace equimod::exp {

enum class DatasetKind { cifar10, imagenet, synth10, mini_imagenet };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

// the augmentation/encoding profile the dataset kind maps onto
augcodec::Dataset profile_dataset(DatasetKind k);

// Complete description of one run. Serialized as sectioned key=value text;
// unknown keys are rejected on parse.
struct ExperimentConfig {
  // [experiment]
  DatasetKind dataset = DatasetKind::cifar10;
  augcodec::Baseline baseline = augcodec::Baseline::simclr;
  uint64_t seed = 1;
  int64_t epochs = 800;
  int64_t warmup_epochs = 10;
  int64_t batch_size = 512;
  int accumulation_steps = 1;
  std::string output_dir = "runs/run";

  // [optimizer]
  trainer::OptimizerConfig optimizer;

  // [loss]
  objectives::LossConfig loss;

  // [model]
  std::string encoder = "resnet18-cifar";
  double width_mult = 1.0;
  int inv_layers = 3;
  int inv_hidden = 2048;
  int inv_dim = 128;
  int equi_layers = 3;
  int equi_hidden = 2048;
  int equi_dim = 128;
  int predictor_layers = 1;
  int predictor_hidden = 128;
  int aug_projector_layers = 1;
  int aug_projector_hidden = 128;
  int aug_projector_dim = 128;

  // [data]
  std::string data_root;       // falls back to EQUIMOD_DATA_ROOT
  int64_t synthetic_train = 2048;
  int64_t synthetic_test = 512;

  // [run]
  int64_t checkpoint_every_epochs = 1;
  int64_t log_every_steps = 1;
  int64_t normalizer_samples = 100000;

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const;

  std::string serialize() const;
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  // dotted key override, e.g. "loss.lambda=0" or "experiment.batch_size=256"
  void set_override(const std::string& assignment);

  // derived pieces
  augcodec::ViewPolicies view_policies() const;
  augcodec::TraceLayout trace_layout() const;
  networks::ModelConfig model_config() const;
  std::string run_name() const;
};

// Paper presets, launchable by name.
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

}  // namespace equimod::exp
