#pragma once

#include <string>

namespace equimod::exp {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr int kMetricsSchemaVersion = 1;

// Run lifecycle record, written atomically at start and finalized at end.
struct RunManifest {
  std::string config_text;
  std::string code_version = kCodeVersion;
  std::string layout_json;
  std::string started_at;
  std::string finished_at;
  std::string status = "running";  // running | completed | aborted: <reason>
  int metrics_schema = kMetricsSchemaVersion;
  bool baseline_equivalent = false;  // lambda == 0 run
  int64_t epochs_completed = 0;
  int64_t steps_completed = 0;
  double final_loss_inv = 0;
  double final_loss_equi = 0;
  double final_loss_total = 0;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  void save(const std::string& path) const;  // tmp + rename
  static RunManifest load(const std::string& path);
};

std::string utc_timestamp();

}  // namespace equimod::exp
