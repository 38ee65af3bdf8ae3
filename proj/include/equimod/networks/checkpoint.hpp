#pragma once

#include <map>
#include <string>

#include "equimod/core/tensor.hpp"

namespace equimod::networks {

// Single self-describing archive: a JSON header (config, layout descriptor,
// counters, tensor directory) followed by raw float32 data.
struct Checkpoint {
  std::string config_text;  // resolved experiment configuration
  std::string layout_json;  // augmentation layout descriptor
  int64_t epoch = 0;
  int64_t step = 0;
  std::map<std::string, core::Tensor> tensors;    // parameters and buffers
  std::map<std::string, core::Tensor> opt_state;  // optimizer momentum

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace equimod::networks
