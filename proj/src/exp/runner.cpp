#include "equimod/exp/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

namespace equimod::exp {

namespace fs = std::filesystem;
using core::Rng;

Runner::Runner(ExperimentConfig config) : config_(std::move(config)) { config_.validate(); }

augcodec::LayoutDescriptor Runner::fit_layout(const ExperimentConfig& config) {
  const auto layout = config.trace_layout();
  const auto policies = config.view_policies();
  Rng rng(0x4e0a11ce);  // fixed stream: stats depend only on the policy
  std::vector<std::vector<float>> sample;
  sample.reserve(static_cast<size_t>(config.normalizer_samples));
  for (int64_t i = 0; i < config.normalizer_samples; ++i) {
    const auto& policy = (i % 2 == 0) ? policies.first : policies.second;
    sample.push_back(augcodec::encode_trace(augcodec::sample_trace(policy, rng), layout));
  }
  augcodec::LayoutDescriptor d;
  d.layout = layout;
  d.stats = augcodec::fit_normalizer(sample);
  return d;
}

std::string Runner::checkpoint_path(const std::string& dir, int64_t epoch) {
  char name[64];
  std::snprintf(name, sizeof(name), "checkpoint-epoch-%05lld.eqmd",
                static_cast<long long>(epoch));
  return (fs::path(dir) / name).string();
}

std::optional<std::string> Runner::latest_checkpoint(const std::string& dir) {
  if (!fs::is_directory(dir)) return std::nullopt;
  std::string best;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.starts_with("checkpoint-epoch-") && name.ends_with(".eqmd") && name > best)
      best = name;
  }
  if (best.empty()) return std::nullopt;
  return (fs::path(dir) / best).string();
}

namespace {

void apply_checkpoint(const networks::Checkpoint& ck, networks::EquiModModel& model,
                      trainer::Trainer& tr) {
  networks::ParamCollector pc;
  model.collect_state(pc);
  auto restore = [&](const std::string& name, core::Tensor& dst) {
    const auto it = ck.tensors.find(name);
    if (it == ck.tensors.end()) throw std::runtime_error("checkpoint missing tensor " + name);
    if (it->second.shape() != dst.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    dst = it->second;
  };
  for (auto& p : pc.params) restore(p.name, *p.value);
  for (auto& b : pc.buffers) restore(b.name, *b.value);
  tr.optimizer().load_state(ck.opt_state);
}

networks::Checkpoint collect_checkpoint(const ExperimentConfig& config,
                                        const augcodec::LayoutDescriptor& layout,
                                        networks::EquiModModel& model, trainer::Trainer& tr,
                                        int64_t epoch, int64_t step) {
  networks::Checkpoint ck;
  ck.config_text = config.serialize();
  ck.layout_json = layout.to_json();
  ck.epoch = epoch;
  ck.step = step;
  networks::ParamCollector pc;
  model.collect_state(pc);
  for (auto& p : pc.params) ck.tensors.emplace(p.name, *p.value);
  for (auto& b : pc.buffers) ck.tensors.emplace(b.name, *b.value);
  ck.opt_state = tr.optimizer().state();
  return ck;
}

}  // namespace

Runner::Restored Runner::restore(const std::string& checkpoint_file) {
  const auto ck = networks::Checkpoint::load(checkpoint_file);
  Restored r;
  r.config = ExperimentConfig::parse(ck.config_text);
  r.layout = augcodec::LayoutDescriptor::from_json(ck.layout_json);
  r.model = std::make_unique<networks::EquiModModel>(r.config.model_config(), r.config.seed);
  networks::ParamCollector pc;
  r.model->collect_state(pc);
  for (auto& p : pc.params) {
    const auto it = ck.tensors.find(p.name);
    if (it == ck.tensors.end()) throw std::runtime_error("checkpoint missing tensor " + p.name);
    *p.value = it->second;
  }
  for (auto& b : pc.buffers) {
    const auto it = ck.tensors.find(b.name);
    if (it == ck.tensors.end()) throw std::runtime_error("checkpoint missing tensor " + b.name);
    *b.value = it->second;
  }
  return r;
}

RunResult Runner::run() {
  const std::string dir = config_.output_dir;
  fs::create_directories(dir);

  const auto layout = fit_layout(config_);
  layout.save((fs::path(dir) / "layout.json").string());
  config_.save((fs::path(dir) / "config.ini").string());

  RunManifest manifest;
  manifest.config_text = config_.serialize();
  manifest.layout_json = layout.to_json();
  manifest.started_at = utc_timestamp();
  manifest.baseline_equivalent = config_.loss.lambda == 0;
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  manifest.save(manifest_path);

  const auto data = open_dataset(config_);
  const int64_t train_size = data.train->size();
  if (train_size < config_.batch_size)
    throw std::runtime_error("runner: dataset smaller than one batch");

  networks::EquiModModel model(config_.model_config(), config_.seed);
  trainer::TrainStepConfig step_config{config_.loss, config_.accumulation_steps};
  trainer::Trainer tr(model, config_.optimizer, config_.view_policies(), layout, step_config);

  const int64_t steps_per_epoch = train_size / config_.batch_size;
  trainer::ScheduleConfig schedule{config_.optimizer.lr,
                                   config_.warmup_epochs * steps_per_epoch,
                                   config_.epochs * steps_per_epoch};

  int64_t start_epoch = 0;
  int64_t global_step = 0;
  if (const auto ck_path = latest_checkpoint(dir)) {
    const auto ck = networks::Checkpoint::load(*ck_path);
    if (ExperimentConfig::parse(ck.config_text) != config_)
      throw std::runtime_error("runner: checkpoint config differs from the requested run");
    apply_checkpoint(ck, model, tr);
    start_epoch = ck.epoch;
    global_step = ck.step;
  }

  const std::string metrics_path = (fs::path(dir) / "metrics.csv").string();
  const bool fresh_csv = !fs::exists(metrics_path) || start_epoch == 0;
  std::ofstream metrics(metrics_path, fresh_csv ? std::ios::trunc : std::ios::app);
  if (!metrics) throw std::runtime_error("runner: cannot write " + metrics_path);
  if (fresh_csv) metrics << "step,epoch,lr,loss_inv,loss_equi,loss_total,images_per_sec\n";

  std::string final_ck = latest_checkpoint(dir).value_or("");
  trainer::StepResult last{};
  try {
    std::vector<core::Image> batch(static_cast<size_t>(config_.batch_size));
    for (int64_t epoch = start_epoch; epoch < config_.epochs; ++epoch) {
      Rng order_rng(Rng::derive(config_.seed, {0xe90c, static_cast<uint64_t>(epoch)}));
      const auto order = order_rng.permutation(train_size);
      for (int64_t b = 0; b < steps_per_epoch; ++b) {
        const auto t0 = std::chrono::steady_clock::now();
        for (int64_t i = 0; i < config_.batch_size; ++i)
          batch[static_cast<size_t>(i)] =
              data.train->get(order[static_cast<size_t>(b * config_.batch_size + i)]);
        const double lr = trainer::cosine_lr(global_step, schedule);
        const double tau = model.has_target()
                               ? trainer::byol_target_tau(global_step, schedule.total_steps,
                                                          config_.loss.byol_tau_base)
                               : 1.0;
        last = tr.training_step(batch, lr, tau,
                                Rng::derive(config_.seed, {0x57e9, static_cast<uint64_t>(global_step)}));
        ++global_step;
        if (global_step % config_.log_every_steps == 0) {
          const double dt =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          metrics << global_step << "," << epoch << "," << lr << "," << last.loss_inv << ","
                  << last.loss_equi << "," << last.loss_total << ","
                  << static_cast<double>(config_.batch_size) / dt << "\n";
          metrics.flush();
        }
        if (on_step) on_step(global_step, last);
      }
      if ((epoch + 1) % config_.checkpoint_every_epochs == 0 || epoch + 1 == config_.epochs) {
        final_ck = checkpoint_path(dir, epoch + 1);
        collect_checkpoint(config_, layout, model, tr, epoch + 1, global_step).save(final_ck);
      }
      manifest.epochs_completed = epoch + 1;
      manifest.steps_completed = global_step;
    }
  } catch (const std::exception& e) {
    manifest.status = std::string("aborted: ") + e.what();
    manifest.finished_at = utc_timestamp();
    manifest.save(manifest_path);
    throw;
  }

  manifest.status = "completed";
  manifest.finished_at = utc_timestamp();
  manifest.final_loss_inv = last.loss_inv;
  manifest.final_loss_equi = last.loss_equi;
  manifest.final_loss_total = last.loss_total;
  manifest.save(manifest_path);

  RunResult result;
  result.manifest = manifest;
  result.run_dir = dir;
  result.final_checkpoint = final_ck;
  return result;
}

}  // namespace equimod::exp
