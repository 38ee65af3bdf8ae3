#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "equimod/augcodec/apply.hpp"
#include "equimod/augcodec/codec.hpp"
#include "equimod/evalsuite/metrics.hpp"
#include "equimod/exp/runner.hpp"
#include "equimod/objectives/losses.hpp"
#include "equimod/trainer/schedule.hpp"

namespace py = pybind11;
using namespace equimod;

namespace {

core::Image image_from_array(const py::array_t<float, py::array::c_style>& a) {
  if (a.ndim() != 3) throw std::invalid_argument("image must be (H, W, C)");
  core::Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                  static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), img.px.data());
  return img;
}

py::array_t<float> array_from_image(const core::Image& img) {
  py::array_t<float> a({img.h, img.w, img.c});
  std::copy(img.px.begin(), img.px.end(), a.mutable_data());
  return a;
}

core::DTensor dtensor_from_array(const py::array_t<double, py::array::c_style>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("embedding batch must be 2-d");
  core::DTensor t({a.shape(0), a.shape(1)});
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

py::array_t<double> array_from_dtensor(const core::DTensor& t) {
  py::array_t<double> a({t.dim(0), t.dim(1)});
  std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
  return a;
}

objectives::EmbeddingBundle bundle_from(const py::array_t<double, py::array::c_style>& zq,
                                        const py::array_t<double, py::array::c_style>& zo,
                                        const py::array_t<double, py::array::c_style>& zhat) {
  objectives::EmbeddingBundle b;
  b.zq = dtensor_from_array(zq);
  b.zo = dtensor_from_array(zo);
  b.zhat = dtensor_from_array(zhat);
  b.z = b.zq;
  return b;
}

std::vector<double> vec_from(const py::array_t<double, py::array::c_style>& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d vector");
  return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_equimod, m) {
  m.doc() = "equivariance module for augmentation-invariant self-supervised learners";
  m.attr("__version__") = exp::kCodeVersion;

  py::enum_<augcodec::Dataset>(m, "Dataset")
      .value("cifar10", augcodec::Dataset::cifar10)
      .value("imagenet", augcodec::Dataset::imagenet);
  py::enum_<augcodec::Baseline>(m, "Baseline")
      .value("simclr", augcodec::Baseline::simclr)
      .value("byol", augcodec::Baseline::byol)
      .value("barlow", augcodec::Baseline::barlow);

  py::class_<augcodec::CropRect>(m, "CropRect")
      .def(py::init<>())
      .def_readwrite("x", &augcodec::CropRect::x)
      .def_readwrite("y", &augcodec::CropRect::y)
      .def_readwrite("w", &augcodec::CropRect::w)
      .def_readwrite("h", &augcodec::CropRect::h);

  py::class_<augcodec::ColorJitterParams>(m, "ColorJitterParams")
      .def(py::init<>())
      .def_readwrite("brightness", &augcodec::ColorJitterParams::brightness)
      .def_readwrite("contrast", &augcodec::ColorJitterParams::contrast)
      .def_readwrite("saturation", &augcodec::ColorJitterParams::saturation)
      .def_readwrite("hue", &augcodec::ColorJitterParams::hue)
      .def_readwrite("order", &augcodec::ColorJitterParams::order);

  py::class_<augcodec::AugmentationTrace>(m, "AugmentationTrace")
      .def(py::init<>())
      .def_readwrite("crop", &augcodec::AugmentationTrace::crop)
      .def_readwrite("hflip", &augcodec::AugmentationTrace::hflip)
      .def_readwrite("jitter", &augcodec::AugmentationTrace::jitter)
      .def_readwrite("jitter_params", &augcodec::AugmentationTrace::jitter_params)
      .def_readwrite("grayscale", &augcodec::AugmentationTrace::grayscale)
      .def_readwrite("blur", &augcodec::AugmentationTrace::blur)
      .def_readwrite("sigma", &augcodec::AugmentationTrace::sigma)
      .def_readwrite("solarize", &augcodec::AugmentationTrace::solarize)
      .def("validate", &augcodec::AugmentationTrace::validate)
      .def("__eq__", [](const augcodec::AugmentationTrace& a,
                        const augcodec::AugmentationTrace& b) { return a == b; });

  py::class_<augcodec::AugmentationPolicy>(m, "AugmentationPolicy")
      .def_readonly("dataset", &augcodec::AugmentationPolicy::dataset)
      .def_readonly("baseline", &augcodec::AugmentationPolicy::baseline)
      .def_readonly("resolution", &augcodec::AugmentationPolicy::resolution)
      .def_readonly("source_size", &augcodec::AugmentationPolicy::source_size)
      .def_readwrite("p_hflip", &augcodec::AugmentationPolicy::p_hflip)
      .def_readwrite("p_jitter", &augcodec::AugmentationPolicy::p_jitter)
      .def_readwrite("p_grayscale", &augcodec::AugmentationPolicy::p_grayscale)
      .def_readwrite("p_blur", &augcodec::AugmentationPolicy::p_blur)
      .def_readwrite("p_solarize", &augcodec::AugmentationPolicy::p_solarize)
      .def("validate", &augcodec::AugmentationPolicy::validate);

  py::class_<augcodec::ViewPolicies>(m, "ViewPolicies")
      .def_readonly("first", &augcodec::ViewPolicies::first)
      .def_readonly("second", &augcodec::ViewPolicies::second);
  m.def("make_policies", &augcodec::make_policies, py::arg("dataset"), py::arg("baseline"));

  py::class_<augcodec::TraceLayout>(m, "TraceLayout")
      .def_readonly("profile_id", &augcodec::TraceLayout::profile_id)
      .def_readonly("fields", &augcodec::TraceLayout::fields)
      .def_property_readonly("length", &augcodec::TraceLayout::length)
      .def_static("for_profile", &augcodec::TraceLayout::for_profile);

  py::class_<augcodec::NormStats>(m, "NormStats")
      .def_readonly("mean", &augcodec::NormStats::mean)
      .def_readonly("std", &augcodec::NormStats::std);

  m.def(
      "sample_trace",
      [](const augcodec::AugmentationPolicy& policy, uint64_t seed) {
        core::Rng rng(seed);
        return augcodec::sample_trace(policy, rng);
      },
      py::arg("policy"), py::arg("seed"));
  m.def(
      "apply_trace",
      [](const py::array_t<float, py::array::c_style>& image,
         const augcodec::AugmentationTrace& trace, const augcodec::AugmentationPolicy& policy) {
        return array_from_image(augcodec::apply_trace(image_from_array(image), trace, policy));
      },
      py::arg("image"), py::arg("trace"), py::arg("policy"));
  m.def("encode_trace", &augcodec::encode_trace, py::arg("trace"), py::arg("layout"));
  m.def("decode_trace", &augcodec::decode_trace, py::arg("vector"), py::arg("layout"));
  m.def("fit_normalizer", &augcodec::fit_normalizer, py::arg("vectors"));
  m.def("normalize", &augcodec::normalize, py::arg("vector"), py::arg("stats"));

  m.def(
      "equimod_pair_loss",
      [](const py::array_t<double, py::array::c_style>& zq,
         const py::array_t<double, py::array::c_style>& zo,
         const py::array_t<double, py::array::c_style>& zhat, int64_t i, int64_t j,
         double tau_prime, bool standard_denominator) {
        return objectives::equimod_pair_loss(bundle_from(zq, zo, zhat), i, j, tau_prime,
                                             standard_denominator);
      },
      py::arg("zq"), py::arg("zo"), py::arg("zhat"), py::arg("i"), py::arg("j"),
      py::arg("tau_prime"), py::arg("standard_denominator") = false);
  m.def(
      "equimod_loss",
      [](const py::array_t<double, py::array::c_style>& zq,
         const py::array_t<double, py::array::c_style>& zo,
         const py::array_t<double, py::array::c_style>& zhat, double tau_prime,
         bool standard_denominator) {
        return objectives::equimod_loss(bundle_from(zq, zo, zhat), tau_prime,
                                        standard_denominator);
      },
      py::arg("zq"), py::arg("zo"), py::arg("zhat"), py::arg("tau_prime"),
      py::arg("standard_denominator") = false);
  m.def(
      "simclr_invariance_loss",
      [](const py::array_t<double, py::array::c_style>& z, double tau) {
        return objectives::simclr_invariance_loss(dtensor_from_array(z), tau);
      },
      py::arg("z"), py::arg("tau"));
  m.def(
      "byol_invariance_loss",
      [](const py::array_t<double, py::array::c_style>& pred,
         const py::array_t<double, py::array::c_style>& target) {
        return objectives::byol_invariance_loss(dtensor_from_array(pred),
                                                dtensor_from_array(target));
      },
      py::arg("online_pred"), py::arg("target_proj"));
  m.def(
      "barlow_twins_loss",
      [](const py::array_t<double, py::array::c_style>& z, double lambda_bt) {
        return objectives::barlow_twins_loss(dtensor_from_array(z), lambda_bt);
      },
      py::arg("z"), py::arg("lambda_bt") = 0.005);
  m.def("total_loss", &objectives::total_loss, py::arg("invariance"), py::arg("equivariance"),
        py::arg("lambda_"));

  m.def(
      "absolute_equivariance",
      [](const py::array_t<double, py::array::c_style>& z_view,
         const py::array_t<double, py::array::c_style>& z_pred,
         const py::array_t<double, py::array::c_style>& z_orig) {
        const auto a = vec_from(z_view), b = vec_from(z_pred), c = vec_from(z_orig);
        if (a.size() != b.size() || a.size() != c.size())
          throw std::invalid_argument("vector lengths differ");
        return evalsuite::absolute_equivariance(a.data(), b.data(), c.data(),
                                                static_cast<int64_t>(a.size()));
      },
      py::arg("z_view"), py::arg("z_pred"), py::arg("z_orig"));
  m.def(
      "relative_equivariance",
      [](const py::array_t<double, py::array::c_style>& z_view,
         const py::array_t<double, py::array::c_style>& z_pred,
         const py::array_t<double, py::array::c_style>& z_orig) {
        const auto a = vec_from(z_view), b = vec_from(z_pred), c = vec_from(z_orig);
        if (a.size() != b.size() || a.size() != c.size())
          throw std::invalid_argument("vector lengths differ");
        return evalsuite::relative_equivariance(a.data(), b.data(), c.data(),
                                                static_cast<int64_t>(a.size()));
      },
      py::arg("z_view"), py::arg("z_pred"), py::arg("z_orig"));

  m.def(
      "cosine_lr",
      [](int64_t step, double base_lr, int64_t warmup_steps, int64_t total_steps) {
        return trainer::cosine_lr(step, {base_lr, warmup_steps, total_steps});
      },
      py::arg("step"), py::arg("base_lr"), py::arg("warmup_steps"), py::arg("total_steps"));
  m.def("byol_target_tau", &trainer::byol_target_tau, py::arg("step"), py::arg("total_steps"),
        py::arg("tau_base"));

  // experiment surface: parse/serialize configs, run training, evaluate
  py::class_<exp::ExperimentConfig>(m, "ExperimentConfig")
      .def_static("parse", &exp::ExperimentConfig::parse)
      .def_static("load", &exp::ExperimentConfig::load)
      .def("serialize", &exp::ExperimentConfig::serialize)
      .def("set_override", &exp::ExperimentConfig::set_override)
      .def("validate", &exp::ExperimentConfig::validate);
  m.def("preset", &exp::preset, py::arg("name"));
  m.def("preset_names", &exp::preset_names);
  m.def(
      "run_experiment",
      [](const exp::ExperimentConfig& config) {
        exp::Runner runner(config);
        const auto result = runner.run();
        py::dict d;
        d["run_dir"] = result.run_dir;
        d["final_checkpoint"] = result.final_checkpoint;
        d["status"] = result.manifest.status;
        d["loss_total"] = result.manifest.final_loss_total;
        return d;
      },
      py::arg("config"));
  m.def(
      "eval_linear",
      [](const std::string& checkpoint, int epochs, uint64_t seed) {
        auto restored = exp::Runner::restore(checkpoint);
        const auto data = exp::open_dataset(restored.config);
        evalsuite::ProbeProtocol protocol;
        protocol.epochs = epochs;
        const auto r =
            evalsuite::linear_probe(*restored.model, *data.train, *data.test, protocol, seed);
        return py::make_tuple(r.top1, r.top5);
      },
      py::arg("checkpoint"), py::arg("epochs") = 90, py::arg("seed") = 1);
  m.def(
      "eval_equivariance",
      [](const std::string& checkpoint, const std::string& augmentation, int64_t samples,
         uint64_t seed) {
        auto restored = exp::Runner::restore(checkpoint);
        const auto data = exp::open_dataset(restored.config);
        const auto policy = restored.config.view_policies().first;
        const auto e = evalsuite::per_augmentation_report(*restored.model, *data.test, policy,
                                                          restored.layout, augmentation, samples,
                                                          seed);
        return py::make_tuple(e.absolute, e.relative, e.samples);
      },
      py::arg("checkpoint"), py::arg("augmentation"), py::arg("samples") = 1000,
      py::arg("seed") = 1);
}
