#include "equimod/exp/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <json.hpp>

namespace equimod::exp {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["config"] = config_text;
  j["code_version"] = code_version;
  j["layout"] = layout_json;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["status"] = status;
  j["metrics_schema"] = metrics_schema;
  j["baseline_equivalent"] = baseline_equivalent;
  j["epochs_completed"] = epochs_completed;
  j["steps_completed"] = steps_completed;
  j["final_loss_inv"] = final_loss_inv;
  j["final_loss_equi"] = final_loss_equi;
  j["final_loss_total"] = final_loss_total;
  return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunManifest m;
  m.config_text = j.at("config").get<std::string>();
  m.code_version = j.at("code_version").get<std::string>();
  m.layout_json = j.at("layout").get<std::string>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  m.status = j.at("status").get<std::string>();
  m.metrics_schema = j.at("metrics_schema").get<int>();
  m.baseline_equivalent = j.at("baseline_equivalent").get<bool>();
  m.epochs_completed = j.at("epochs_completed").get<int64_t>();
  m.steps_completed = j.at("steps_completed").get<int64_t>();
  m.final_loss_inv = j.at("final_loss_inv").get<double>();
  m.final_loss_equi = j.at("final_loss_equi").get<double>();
  m.final_loss_total = j.at("final_loss_total").get<double>();
  return m;
}

void RunManifest::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw std::runtime_error("manifest: cannot write " + tmp);
    f << to_json() << "\n";
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("manifest: cannot move " + tmp + " into place");
}

RunManifest RunManifest::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace equimod::exp
