#include "equimod/networks/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

namespace equimod::networks {

namespace {

constexpr char kMagic[8] = {'E', 'Q', 'M', 'D', 'C', 'K', '0', '1'};

nlohmann::json tensor_dir(const std::map<std::string, core::Tensor>& tensors, int64_t& offset) {
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = offset;
    offset += t.numel() * static_cast<int64_t>(sizeof(float));
    dir.push_back(e);
  }
  return dir;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  int64_t offset = 0;
  nlohmann::json header;
  header["config"] = config_text;
  header["layout"] = layout_json;
  header["epoch"] = epoch;
  header["step"] = step;
  header["tensors"] = tensor_dir(tensors, offset);
  header["opt_state"] = tensor_dir(opt_state, offset);
  const std::string htext = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + tmp);
    f.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = htext.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& [name, t] : tensors)
      f.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
    for (const auto& [name, t] : opt_state)
      f.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("checkpoint: cannot move " + tmp + " into place");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: " + path + " is not a checkpoint archive");
  uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  f.read(htext.data(), static_cast<std::streamsize>(hlen));
  const nlohmann::json header = nlohmann::json::parse(htext);

  Checkpoint ck;
  ck.config_text = header.at("config").get<std::string>();
  ck.layout_json = header.at("layout").get<std::string>();
  ck.epoch = header.at("epoch").get<int64_t>();
  ck.step = header.at("step").get<int64_t>();

  auto read_dir = [&](const nlohmann::json& dir, std::map<std::string, core::Tensor>& out) {
    for (const auto& e : dir) {
      core::Tensor t(e.at("shape").get<std::vector<int64_t>>());
      f.read(reinterpret_cast<char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
      out.emplace(e.at("name").get<std::string>(), std::move(t));
    }
  };
  read_dir(header.at("tensors"), ck.tensors);
  read_dir(header.at("opt_state"), ck.opt_state);
  if (!f) throw std::runtime_error("checkpoint: truncated archive " + path);
  return ck;
}

}  // namespace equimod::networks
