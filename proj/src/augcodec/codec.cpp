#include "equimod/augcodec/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace equimod::augcodec {

void AugmentationTrace::validate() const {
  if (crop.w <= 0 || crop.h <= 0 || crop.x < 0 || crop.y < 0)
    throw std::invalid_argument("trace: degenerate crop rectangle");
  std::array<bool, 4> seen{};
  for (int o : jitter_params.order) {
    if (o < 0 || o > 3 || seen[static_cast<size_t>(o)])
      throw std::invalid_argument("trace: order is not a permutation of {0,1,2,3}");
    seen[static_cast<size_t>(o)] = true;
  }
  if (!jitter) {
    const ColorJitterParams defaults;
    if (!(jitter_params == defaults))
      throw std::invalid_argument("trace: jitter off but parameters not default");
  }
  if (!blur && sigma != 0.f) throw std::invalid_argument("trace: blur off but sigma nonzero");
}

TraceLayout TraceLayout::for_profile(Dataset d, Baseline b) {
  TraceLayout l;
  l.dataset = d;
  l.baseline = b;
  l.profile_id = to_string(d) + "-" + to_string(b);
  l.has_blur = profile_has_blur(d, b);
  l.has_solarize = profile_has_solarize(d, b);
  l.fields = {"hflip_flag", "jitter_flag", "grayscale_flag"};
  if (l.has_blur) l.fields.push_back("blur_flag");
  if (l.has_solarize) l.fields.push_back("solarize_flag");
  for (const char* f : {"crop_x", "crop_y", "crop_w", "crop_h", "brightness", "contrast",
                        "saturation", "hue", "order_0", "order_1", "order_2", "order_3"})
    l.fields.emplace_back(f);
  if (l.has_blur) l.fields.push_back("blur_sigma");
  return l;
}

std::vector<float> encode_trace(const AugmentationTrace& trace, const TraceLayout& layout) {
  if (trace.blur && !layout.has_blur)
    throw std::invalid_argument("encode_trace: blur flag set but profile " + layout.profile_id +
                                " has no blur slot");
  if (trace.solarize && !layout.has_solarize)
    throw std::invalid_argument("encode_trace: solarize flag set but profile " +
                                layout.profile_id + " has no solarize slot");
  if (trace.sigma != 0.f && !layout.has_blur)
    throw std::invalid_argument("encode_trace: sigma set but profile has no blur slot");

  std::vector<float> v;
  v.reserve(static_cast<size_t>(layout.length()));
  v.push_back(trace.hflip ? 1.f : 0.f);
  v.push_back(trace.jitter ? 1.f : 0.f);
  v.push_back(trace.grayscale ? 1.f : 0.f);
  if (layout.has_blur) v.push_back(trace.blur ? 1.f : 0.f);
  if (layout.has_solarize) v.push_back(trace.solarize ? 1.f : 0.f);
  v.push_back(static_cast<float>(trace.crop.x));
  v.push_back(static_cast<float>(trace.crop.y));
  v.push_back(static_cast<float>(trace.crop.w));
  v.push_back(static_cast<float>(trace.crop.h));
  v.push_back(trace.jitter_params.brightness);
  v.push_back(trace.jitter_params.contrast);
  v.push_back(trace.jitter_params.saturation);
  v.push_back(trace.jitter_params.hue);
  for (int o : trace.jitter_params.order) v.push_back(static_cast<float>(o));
  if (layout.has_blur) v.push_back(trace.sigma);
  return v;
}

AugmentationTrace decode_trace(const std::vector<float>& v, const TraceLayout& layout) {
  if (static_cast<int>(v.size()) != layout.length())
    throw std::invalid_argument("decode_trace: vector length " + std::to_string(v.size()) +
                                " does not match profile " + layout.profile_id + " length " +
                                std::to_string(layout.length()));
  auto as_flag = [](float f) {
    if (f != 0.f && f != 1.f) throw std::invalid_argument("decode_trace: non-binary flag slot");
    return f == 1.f;
  };
  size_t i = 0;
  AugmentationTrace t;
  t.hflip = as_flag(v[i++]);
  t.jitter = as_flag(v[i++]);
  t.grayscale = as_flag(v[i++]);
  if (layout.has_blur) t.blur = as_flag(v[i++]);
  if (layout.has_solarize) t.solarize = as_flag(v[i++]);
  t.crop.x = static_cast<int>(std::lround(v[i++]));
  t.crop.y = static_cast<int>(std::lround(v[i++]));
  t.crop.w = static_cast<int>(std::lround(v[i++]));
  t.crop.h = static_cast<int>(std::lround(v[i++]));
  t.jitter_params.brightness = v[i++];
  t.jitter_params.contrast = v[i++];
  t.jitter_params.saturation = v[i++];
  t.jitter_params.hue = v[i++];
  for (int k = 0; k < 4; ++k) t.jitter_params.order[static_cast<size_t>(k)] =
      static_cast<int>(std::lround(v[i++]));
  if (layout.has_blur) t.sigma = v[i++];
  t.validate();
  return t;
}

NormStats fit_normalizer(const std::vector<std::vector<float>>& vectors) {
  if (vectors.empty()) throw std::invalid_argument("fit_normalizer: empty sample");
  if (vectors.size() < 2) throw std::invalid_argument("fit_normalizer: need at least 2 vectors");
  const size_t dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim) throw std::invalid_argument("fit_normalizer: inconsistent lengths");

  const double n = static_cast<double>(vectors.size());
  std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
  for (const auto& v : vectors)
    for (size_t i = 0; i < dim; ++i) mean[i] += v[i];
  for (size_t i = 0; i < dim; ++i) mean[i] /= n;
  for (const auto& v : vectors)
    for (size_t i = 0; i < dim; ++i) {
      const double d = v[i] - mean[i];
      m2[i] += d * d;
    }

  NormStats s;
  s.mean.resize(dim);
  s.std.resize(dim);
  for (size_t i = 0; i < dim; ++i) {
    s.mean[i] = static_cast<float>(mean[i]);
    const double sd = std::sqrt(m2[i] / n);
    s.std[i] = sd < 1e-6 ? 1.f : static_cast<float>(sd);
  }
  return s;
}

std::vector<float> normalize(const std::vector<float>& v, const NormStats& stats) {
  if (v.size() != stats.mean.size())
    throw std::invalid_argument("normalize: vector length does not match stats");
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - stats.mean[i]) / stats.std[i];
  return out;
}

std::string LayoutDescriptor::to_json() const {
  nlohmann::json j;
  j["profile_id"] = layout.profile_id;
  j["dataset"] = to_string(layout.dataset);
  j["baseline"] = to_string(layout.baseline);
  j["vector_length"] = layout.length();
  j["fields"] = layout.fields;
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  return j.dump(2);
}

LayoutDescriptor LayoutDescriptor::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  LayoutDescriptor d;
  d.layout = TraceLayout::for_profile(dataset_from_string(j.at("dataset")),
                                      baseline_from_string(j.at("baseline")));
  if (j.at("profile_id") != d.layout.profile_id)
    throw std::invalid_argument("layout descriptor: profile id mismatch");
  if (j.at("vector_length") != d.layout.length() ||
      j.at("fields").get<std::vector<std::string>>() != d.layout.fields)
    throw std::invalid_argument("layout descriptor: field list does not match profile");
  d.stats.mean = j.at("mean").get<std::vector<float>>();
  d.stats.std = j.at("std").get<std::vector<float>>();
  if (static_cast<int>(d.stats.mean.size()) != d.layout.length() ||
      static_cast<int>(d.stats.std.size()) != d.layout.length())
    throw std::invalid_argument("layout descriptor: stats length mismatch");
  return d;
}

void LayoutDescriptor::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << to_json() << "\n";
}

LayoutDescriptor LayoutDescriptor::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace equimod::augcodec
