#include "equimod/evalsuite/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "equimod/core/rng.hpp"
#include "equimod/evalsuite/metrics.hpp"

namespace equimod::evalsuite {

using core::Image;
using core::Rng;
using core::Tensor;

std::vector<std::string> profile_augmentations(const augcodec::AugmentationPolicy& policy) {
  std::vector<std::string> names = {"crop", "hflip", "jitter", "grayscale"};
  if (policy.include_blur) names.push_back("blur");
  if (policy.include_solarize) names.push_back("solarize");
  return names;
}

EquivarianceEntry per_augmentation_report(networks::EquiModModel& model,
                                          const core::DataSource& data,
                                          const augcodec::AugmentationPolicy& policy,
                                          const augcodec::LayoutDescriptor& layout,
                                          const std::string& augmentation, int64_t sample_count,
                                          uint64_t seed) {
  const auto known = profile_augmentations(policy);
  if (std::find(known.begin(), known.end(), augmentation) == known.end())
    throw std::invalid_argument("augmentation '" + augmentation + "' absent from profile " +
                                layout.layout.profile_id);
  const int res = model.config().encoder.resolution;
  const int64_t n = std::min<int64_t>(sample_count, data.size());
  if (n < 1) throw std::invalid_argument("per_augmentation_report: empty sample");

  const int64_t batch = 64;
  double abs_acc = 0, rel_acc = 0;
  for (int64_t start = 0; start < n; start += batch) {
    const int64_t end = std::min(n, start + batch);
    const int64_t bs = end - start;
    Tensor orig({bs, res, res, 3});
    Tensor view({bs, res, res, 3});
    Tensor enc({bs, layout.layout.length()});
    for (int64_t i = 0; i < bs; ++i) {
      const Image src = data.get(start + i);
      Rng rng(Rng::derive(seed, {static_cast<uint64_t>(start + i)}));
      const auto trace =
          augcodec::sample_single_augmentation_trace(augmentation, policy, rng, src.h, src.w);
      const Image v = augcodec::apply_trace(src, trace, policy);
      const Image o = (src.h == res && src.w == res) ? src : core::resize_shorter_center_crop(src, res);
      std::copy(v.px.begin(), v.px.end(), view.data() + i * v.px.size());
      std::copy(o.px.begin(), o.px.end(), orig.data() + i * o.px.size());
      const auto norm = augcodec::normalize(augcodec::encode_trace(trace, layout.layout),
                                            layout.stats);
      for (int64_t c = 0; c < enc.dim(1); ++c) enc.at(i, c) = norm[static_cast<size_t>(c)];
    }
    const Tensor z_view = model.project_equi(model.encode(view, false), false);
    const Tensor z_orig = model.project_equi(model.encode(orig, false), false);
    const Tensor code = model.project_aug(enc, false);
    const Tensor z_pred = model.predict_equi(z_orig, code, false);

    const int64_t dim = z_view.dim(1);
    std::vector<double> a(static_cast<size_t>(dim)), p(static_cast<size_t>(dim)),
        o(static_cast<size_t>(dim));
    for (int64_t i = 0; i < bs; ++i) {
      for (int64_t c = 0; c < dim; ++c) {
        a[static_cast<size_t>(c)] = z_view.at(i, c);
        p[static_cast<size_t>(c)] = z_pred.at(i, c);
        o[static_cast<size_t>(c)] = z_orig.at(i, c);
      }
      abs_acc += absolute_equivariance(a.data(), p.data(), o.data(), dim);
      rel_acc += relative_equivariance(a.data(), p.data(), o.data(), dim);
    }
  }

  EquivarianceEntry e;
  e.augmentation = augmentation;
  e.absolute = abs_acc / static_cast<double>(n);
  e.relative = rel_acc / static_cast<double>(n);
  e.samples = n;
  return e;
}

EquivarianceReport full_report(networks::EquiModModel& model, const core::DataSource& data,
                               const augcodec::AugmentationPolicy& policy,
                               const augcodec::LayoutDescriptor& layout, int64_t sample_count,
                               uint64_t seed) {
  EquivarianceReport report;
  report.dataset = augcodec::to_string(policy.dataset);
  for (const auto& name : profile_augmentations(policy))
    report.entries.push_back(
        per_augmentation_report(model, data, policy, layout, name, sample_count, seed));
  return report;
}

void EquivarianceReport::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "augmentation,absolute,relative,n\n";
  for (const auto& e : entries)
    f << e.augmentation << "," << e.absolute << "," << e.relative << "," << e.samples << "\n";
}

namespace {

// one panel of vertical bars with a dashed reference line
void svg_panel(std::ostream& os, double x0, const std::string& title,
               const std::vector<std::pair<std::string, double>>& values, double reference) {
  const double panel_w = 420, panel_h = 300, pad = 45;
  double vmax = reference, vmin = std::min(0.0, reference);
  for (const auto& [_, v] : values) {
    vmax = std::max(vmax, v);
    vmin = std::min(vmin, v);
  }
  vmax *= 1.15;
  if (vmin < 0) vmin *= 1.15;
  const double span = vmax - vmin;
  auto ycoord = [&](double v) { return pad + (vmax - v) / span * (panel_h - 2 * pad); };

  os << "<g transform=\"translate(" << x0 << ",0)\">\n";
  os << "<text x=\"" << panel_w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
     << title << "</text>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << ycoord(reference) << "\" x2=\"" << panel_w - pad
     << "\" y2=\"" << ycoord(reference)
     << "\" stroke=\"black\" stroke-dasharray=\"5,4\" opacity=\"0.6\"/>\n";
  const double bar_w = (panel_w - 2 * pad) / static_cast<double>(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    const double v = values[i].second;
    const double x = pad + static_cast<double>(i) * bar_w + bar_w * 0.15;
    const double y_top = ycoord(std::max(v, 0.0));
    const double h = std::abs(ycoord(v) - ycoord(0.0));
    os << "<rect x=\"" << x << "\" y=\"" << y_top << "\" width=\"" << bar_w * 0.7
       << "\" height=\"" << std::max(h, 0.5) << "\" fill=\"#e8853d\" opacity=\"0.85\"/>\n";
    os << "<text x=\"" << x + bar_w * 0.35 << "\" y=\"" << panel_h - pad + 16
       << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(18 " << x + bar_w * 0.35
       << " " << panel_h - pad + 16 << ")\">" << values[i].first << "</text>\n";
    std::ostringstream label;
    label.precision(3);
    label << v;
    os << "<text x=\"" << x + bar_w * 0.35 << "\" y=\"" << y_top - 4
       << "\" text-anchor=\"middle\" font-size=\"10\">" << label.str() << "</text>\n";
  }
  os << "</g>\n";
}

}  // namespace

void EquivarianceReport::write_svg(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"860\" height=\"300\" "
       "font-family=\"sans-serif\">\n";
  std::vector<std::pair<std::string, double>> abs_vals, rel_vals;
  for (const auto& e : entries) {
    abs_vals.emplace_back(e.augmentation, e.absolute);
    rel_vals.emplace_back(e.augmentation, e.relative);
  }
  svg_panel(f, 0, "Absolute equivariance (" + dataset + ")", abs_vals, 0.0);
  svg_panel(f, 430, "Relative equivariance (" + dataset + ")", rel_vals, 1.0);
  f << "</svg>\n";
}

}  // namespace equimod::evalsuite
