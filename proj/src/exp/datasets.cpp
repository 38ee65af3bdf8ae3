#include "equimod/exp/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <jpeglib.h>

#include "equimod/core/rng.hpp"

namespace equimod::exp {

namespace fs = std::filesystem;
using core::Image;
using core::MemoryDataset;
using core::Rng;

namespace {

constexpr int64_t kCifarRecord = 3073;
constexpr int64_t kCifarRecordsPerFile = 10000;
constexpr int64_t kCifarFileBytes = kCifarRecord * kCifarRecordsPerFile;  // 30,730,000

void load_cifar_file(const std::string& path, MemoryDataset& out) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cifar10 ingestion: cannot open " + path);
  const int64_t bytes = static_cast<int64_t>(f.tellg());
  if (bytes != kCifarFileBytes)
    throw std::runtime_error("cifar10 ingestion: " + path + " has " + std::to_string(bytes) +
                             " bytes, expected " + std::to_string(kCifarFileBytes));
  f.seekg(0);
  std::vector<uint8_t> record(kCifarRecord);
  std::vector<uint8_t> hwc(32 * 32 * 3);
  for (int64_t r = 0; r < kCifarRecordsPerFile; ++r) {
    f.read(reinterpret_cast<char*>(record.data()), kCifarRecord);
    if (!f) throw std::runtime_error("cifar10 ingestion: short read in " + path);
    const int label = record[0];
    if (label > 9) throw std::runtime_error("cifar10 ingestion: bad label in " + path);
    // planes R,G,B -> interleaved
    for (int p = 0; p < 1024; ++p) {
      hwc[static_cast<size_t>(p) * 3 + 0] = record[1 + p];
      hwc[static_cast<size_t>(p) * 3 + 1] = record[1 + 1024 + p];
      hwc[static_cast<size_t>(p) * 3 + 2] = record[1 + 2048 + p];
    }
    out.push(hwc, label);
  }
}

std::string cifar_root(const std::string& root) {
  if (fs::exists(fs::path(root) / "data_batch_1.bin")) return root;
  const fs::path sub = fs::path(root) / "cifar-10-batches-bin";
  if (fs::exists(sub / "data_batch_1.bin")) return sub.string();
  throw std::runtime_error("cifar10 ingestion: no data_batch_1.bin under " + root);
}

void hsv_to_rgb_bytes(double h, double s, double v, uint8_t* rgb) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  const double m = v - c;
  rgb[0] = static_cast<uint8_t>(std::clamp((r + m) * 255.0, 0.0, 255.0));
  rgb[1] = static_cast<uint8_t>(std::clamp((g + m) * 255.0, 0.0, 255.0));
  rgb[2] = static_cast<uint8_t>(std::clamp((b + m) * 255.0, 0.0, 255.0));
}

}  // namespace

SplitDataset load_cifar10(const std::string& root) {
  const std::string dir = cifar_root(root);
  SplitDataset split{MemoryDataset(32, 32, 3), MemoryDataset(32, 32, 3)};
  split.train.set_num_classes(10);
  split.test.set_num_classes(10);
  split.train.reserve(50000);
  split.test.reserve(10000);
  for (int i = 1; i <= 5; ++i)
    load_cifar_file((fs::path(dir) / ("data_batch_" + std::to_string(i) + ".bin")).string(),
                    split.train);
  load_cifar_file((fs::path(dir) / "test_batch.bin").string(), split.test);
  return split;
}

MemoryDataset make_synth10(int64_t count, uint64_t seed) {
  constexpr double kTau = 2.0 * 3.14159265358979;
  MemoryDataset ds(32, 32, 3);
  ds.set_num_classes(10);
  ds.reserve(count);
  std::vector<uint8_t> px(32 * 32 * 3);
  for (int64_t i = 0; i < count; ++i) {
    Rng rng(Rng::derive(seed, {static_cast<uint64_t>(i)}));
    const int k = static_cast<int>(i % 10);
    // class = vertical stripe frequency + hue; classes k and k+5 share a
    // frequency and are separable only by color, which is exactly what the
    // augmentations attack
    const double freq = 2.0 + static_cast<double>(k % 5);
    const double hue = static_cast<double>(k) / 10.0;
    const double phase_y = rng.uniform(0.0, kTau);
    // horizontal distractor grating: class-independent, image-specific, so a
    // flip displaces the content in a way the flip flag alone cannot predict
    const double freq_x = rng.uniform(1.5, 4.5);
    const double phase_x = rng.uniform(0.0, kTau);
    const double brightness = rng.uniform(0.65, 1.3);
    for (int y = 0; y < 32; ++y) {
      const double sy = std::sin(kTau * freq * y / 32.0 + phase_y);
      for (int x = 0; x < 32; ++x) {
        const double sx = std::sin(kTau * freq_x * x / 32.0 + phase_x);
        uint8_t rgb[3];
        const double v = std::clamp((0.52 + 0.26 * sy + 0.30 * sx) * brightness, 0.0, 1.0);
        hsv_to_rgb_bytes(hue, 0.4, v, rgb);
        for (int c = 0; c < 3; ++c) {
          const double noisy = rgb[c] / 255.0 + rng.normal(0.0, 0.10);
          px[(static_cast<size_t>(y) * 32 + x) * 3 + static_cast<size_t>(c)] =
              static_cast<uint8_t>(std::clamp(noisy, 0.0, 1.0) * 255.0);
        }
      }
    }
    ds.push(px, k);
  }
  return ds;
}

MemoryDataset make_mini_imagenet(int64_t count, uint64_t seed) {
  MemoryDataset ds(256, 256, 3);
  ds.set_num_classes(10);
  ds.reserve(count);
  std::vector<uint8_t> px(256 * 256 * 3);
  for (int64_t i = 0; i < count; ++i) {
    Rng rng(Rng::derive(seed, {0x1000 + static_cast<uint64_t>(i)}));
    const int k = static_cast<int>(i % 10);
    uint8_t tint[3];
    hsv_to_rgb_bytes(k / 10.0, 0.5, 0.8, tint);
    for (size_t p = 0; p < px.size(); p += 3)
      for (int c = 0; c < 3; ++c) {
        const double v = tint[c] / 255.0 * 0.5 + rng.uniform01() * 0.5;
        px[p + static_cast<size_t>(c)] = static_cast<uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0);
      }
    ds.push(px, k);
  }
  return ds;
}

namespace {

Image decode_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw std::runtime_error("not a binary ppm: " + path);
  int w, h, maxval;
  f >> w >> h >> maxval;
  f.get();
  if (!f || w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("bad ppm header: " + path);
  Image img(h, w, 3);
  std::vector<uint8_t> buf(static_cast<size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("truncated ppm: " + path);
  for (size_t i = 0; i < buf.size(); ++i) img.px[i] = buf[i] / 255.f;
  return img;
}

Image decode_jpeg(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open " + path);
  jpeg_decompress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  Image img(static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width), 3);
  std::vector<uint8_t> row(static_cast<size_t>(cinfo.output_width) * 3);
  uint8_t* rowp = row.data();
  for (int y = 0; y < img.h; ++y) {
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    for (size_t i = 0; i < row.size(); ++i)
      img.px[static_cast<size_t>(y) * row.size() + i] = row[i] / 255.f;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return img;
}

}  // namespace

DirectoryDataset DirectoryDataset::open(const std::string& split_dir) {
  if (!fs::is_directory(split_dir))
    throw std::runtime_error("dataset directory missing: " + split_dir);
  std::vector<std::string> classes;
  for (const auto& e : fs::directory_iterator(split_dir))
    if (e.is_directory()) classes.push_back(e.path().filename().string());
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw std::runtime_error("no class directories under " + split_dir);

  DirectoryDataset ds;
  ds.num_classes_ = static_cast<int>(classes.size());
  for (size_t k = 0; k < classes.size(); ++k) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(split_dir) / classes[k]))
      if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
      ds.paths_.push_back(std::move(f));
      ds.labels_.push_back(static_cast<int>(k));
    }
  }
  if (ds.paths_.empty()) throw std::runtime_error("no images under " + split_dir);
  return ds;
}

Image DirectoryDataset::get(int64_t index) const {
  const std::string& path = paths_.at(static_cast<size_t>(index));
  const auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == "ppm") return decode_ppm(path);
  if (ext == "jpg" || ext == "jpeg") return decode_jpeg(path);
  throw std::runtime_error("unsupported image format: " + path);
}

DataPair open_dataset(const ExperimentConfig& config) {
  std::string root = config.data_root;
  if (root.empty()) {
    const char* env = std::getenv("EQUIMOD_DATA_ROOT");
    if (env) root = env;
  }

  DataPair pair;
  switch (config.dataset) {
    case DatasetKind::cifar10: {
      if (root.empty())
        throw std::runtime_error("cifar10 ingestion: set data.root or EQUIMOD_DATA_ROOT");
      auto split = load_cifar10(root);
      pair.train = std::make_unique<MemoryDataset>(std::move(split.train));
      pair.test = std::make_unique<MemoryDataset>(std::move(split.test));
      break;
    }
    case DatasetKind::imagenet: {
      if (root.empty())
        throw std::runtime_error("imagenet ingestion: set data.root or EQUIMOD_DATA_ROOT");
      pair.train = std::make_unique<DirectoryDataset>(
          DirectoryDataset::open((fs::path(root) / "train").string()));
      pair.test = std::make_unique<DirectoryDataset>(
          DirectoryDataset::open((fs::path(root) / "val").string()));
      break;
    }
    case DatasetKind::synth10:
      // the synthetic corpus is fixed; run seeds only steer training
      pair.train =
          std::make_unique<MemoryDataset>(make_synth10(config.synthetic_train, 0xDA7A5E7));
      pair.test =
          std::make_unique<MemoryDataset>(make_synth10(config.synthetic_test, 0x7E57DA7A));
      break;
    case DatasetKind::mini_imagenet:
      pair.train =
          std::make_unique<MemoryDataset>(make_mini_imagenet(config.synthetic_train, 0xA11CE));
      pair.test =
          std::make_unique<MemoryDataset>(make_mini_imagenet(config.synthetic_test, 0xB0B));
      break;
  }
  return pair;
}

}  // namespace equimod::exp
