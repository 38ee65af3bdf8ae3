#include "equimod/exp/config.hpp"

#include <functional>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace equimod::exp {

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::cifar10: return "cifar10";
    case DatasetKind::imagenet: return "imagenet";
    case DatasetKind::synth10: return "synth10";
    case DatasetKind::mini_imagenet: return "mini-imagenet";
  }
  throw std::logic_error("unknown dataset kind");
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "cifar10") return DatasetKind::cifar10;
  if (s == "imagenet") return DatasetKind::imagenet;
  if (s == "synth10") return DatasetKind::synth10;
  if (s == "mini-imagenet") return DatasetKind::mini_imagenet;
  throw std::invalid_argument("unknown dataset: " + s);
}

augcodec::Dataset profile_dataset(DatasetKind k) {
  return (k == DatasetKind::cifar10 || k == DatasetKind::synth10) ? augcodec::Dataset::cifar10
                                                                  : augcodec::Dataset::imagenet;
}

namespace {

std::string format_double(double v) {
  // shortest decimal form that parses back exactly
  for (int precision = 1; precision <= 17; ++precision) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    if (std::stod(os.str()) == v) return os.str();
  }
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

int64_t parse_i64(const std::string& v) { return std::stoll(v); }
int parse_int(const std::string& v) { return std::stoi(v); }
double parse_f64(const std::string& v) { return std::stod(v); }
bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("bad boolean: " + v);
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"experiment", "dataset", [](const ExperimentConfig& c) { return to_string(c.dataset); },
       [](ExperimentConfig& c, const std::string& v) { c.dataset = dataset_kind_from_string(v); }},
      {"experiment", "baseline",
       [](const ExperimentConfig& c) { return augcodec::to_string(c.baseline); },
       [](ExperimentConfig& c, const std::string& v) {
         c.baseline = augcodec::baseline_from_string(v);
       }},
      {"experiment", "seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
       [](ExperimentConfig& c, const std::string& v) { c.seed = std::stoull(v); }},
      {"experiment", "epochs", [](const ExperimentConfig& c) { return std::to_string(c.epochs); },
       [](ExperimentConfig& c, const std::string& v) { c.epochs = parse_i64(v); }},
      {"experiment", "warmup_epochs",
       [](const ExperimentConfig& c) { return std::to_string(c.warmup_epochs); },
       [](ExperimentConfig& c, const std::string& v) { c.warmup_epochs = parse_i64(v); }},
      {"experiment", "batch_size",
       [](const ExperimentConfig& c) { return std::to_string(c.batch_size); },
       [](ExperimentConfig& c, const std::string& v) { c.batch_size = parse_i64(v); }},
      {"experiment", "accumulation_steps",
       [](const ExperimentConfig& c) { return std::to_string(c.accumulation_steps); },
       [](ExperimentConfig& c, const std::string& v) { c.accumulation_steps = parse_int(v); }},
      {"experiment", "output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
       [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }},

      {"optimizer", "lr", [](const ExperimentConfig& c) { return format_double(c.optimizer.lr); },
       [](ExperimentConfig& c, const std::string& v) { c.optimizer.lr = parse_f64(v); }},
      {"optimizer", "momentum",
       [](const ExperimentConfig& c) { return format_double(c.optimizer.momentum); },
       [](ExperimentConfig& c, const std::string& v) { c.optimizer.momentum = parse_f64(v); }},
      {"optimizer", "weight_decay",
       [](const ExperimentConfig& c) { return format_double(c.optimizer.weight_decay); },
       [](ExperimentConfig& c, const std::string& v) { c.optimizer.weight_decay = parse_f64(v); }},
      {"optimizer", "trust_coefficient",
       [](const ExperimentConfig& c) { return format_double(c.optimizer.trust_coefficient); },
       [](ExperimentConfig& c, const std::string& v) {
         c.optimizer.trust_coefficient = parse_f64(v);
       }},

      {"loss", "lambda", [](const ExperimentConfig& c) { return format_double(c.loss.lambda); },
       [](ExperimentConfig& c, const std::string& v) { c.loss.lambda = parse_f64(v); }},
      {"loss", "tau", [](const ExperimentConfig& c) { return format_double(c.loss.tau); },
       [](ExperimentConfig& c, const std::string& v) { c.loss.tau = parse_f64(v); }},
      {"loss", "tau_prime",
       [](const ExperimentConfig& c) { return format_double(c.loss.tau_prime); },
       [](ExperimentConfig& c, const std::string& v) { c.loss.tau_prime = parse_f64(v); }},
      {"loss", "barlow_lambda",
       [](const ExperimentConfig& c) { return format_double(c.loss.barlow_lambda); },
       [](ExperimentConfig& c, const std::string& v) { c.loss.barlow_lambda = parse_f64(v); }},
      {"loss", "byol_tau_base",
       [](const ExperimentConfig& c) { return format_double(c.loss.byol_tau_base); },
       [](ExperimentConfig& c, const std::string& v) { c.loss.byol_tau_base = parse_f64(v); }},
      {"loss", "standard_denominator",
       [](const ExperimentConfig& c) {
         return c.loss.equi_standard_denominator ? std::string("true") : std::string("false");
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.loss.equi_standard_denominator = parse_bool(v);
       }},

      {"model", "encoder", [](const ExperimentConfig& c) { return c.encoder; },
       [](ExperimentConfig& c, const std::string& v) { c.encoder = v; }},
      {"model", "width_mult",
       [](const ExperimentConfig& c) { return format_double(c.width_mult); },
       [](ExperimentConfig& c, const std::string& v) { c.width_mult = parse_f64(v); }},
      {"model", "inv_layers", [](const ExperimentConfig& c) { return std::to_string(c.inv_layers); },
       [](ExperimentConfig& c, const std::string& v) { c.inv_layers = parse_int(v); }},
      {"model", "inv_hidden", [](const ExperimentConfig& c) { return std::to_string(c.inv_hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.inv_hidden = parse_int(v); }},
      {"model", "inv_dim", [](const ExperimentConfig& c) { return std::to_string(c.inv_dim); },
       [](ExperimentConfig& c, const std::string& v) { c.inv_dim = parse_int(v); }},
      {"model", "equi_layers",
       [](const ExperimentConfig& c) { return std::to_string(c.equi_layers); },
       [](ExperimentConfig& c, const std::string& v) { c.equi_layers = parse_int(v); }},
      {"model", "equi_hidden",
       [](const ExperimentConfig& c) { return std::to_string(c.equi_hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.equi_hidden = parse_int(v); }},
      {"model", "equi_dim", [](const ExperimentConfig& c) { return std::to_string(c.equi_dim); },
       [](ExperimentConfig& c, const std::string& v) { c.equi_dim = parse_int(v); }},
      {"model", "predictor_layers",
       [](const ExperimentConfig& c) { return std::to_string(c.predictor_layers); },
       [](ExperimentConfig& c, const std::string& v) { c.predictor_layers = parse_int(v); }},
      {"model", "predictor_hidden",
       [](const ExperimentConfig& c) { return std::to_string(c.predictor_hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.predictor_hidden = parse_int(v); }},
      {"model", "aug_projector_layers",
       [](const ExperimentConfig& c) { return std::to_string(c.aug_projector_layers); },
       [](ExperimentConfig& c, const std::string& v) { c.aug_projector_layers = parse_int(v); }},
      {"model", "aug_projector_hidden",
       [](const ExperimentConfig& c) { return std::to_string(c.aug_projector_hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.aug_projector_hidden = parse_int(v); }},
      {"model", "aug_projector_dim",
       [](const ExperimentConfig& c) { return std::to_string(c.aug_projector_dim); },
       [](ExperimentConfig& c, const std::string& v) { c.aug_projector_dim = parse_int(v); }},

      {"data", "root", [](const ExperimentConfig& c) { return c.data_root; },
       [](ExperimentConfig& c, const std::string& v) { c.data_root = v; }},
      {"data", "synthetic_train",
       [](const ExperimentConfig& c) { return std::to_string(c.synthetic_train); },
       [](ExperimentConfig& c, const std::string& v) { c.synthetic_train = parse_i64(v); }},
      {"data", "synthetic_test",
       [](const ExperimentConfig& c) { return std::to_string(c.synthetic_test); },
       [](ExperimentConfig& c, const std::string& v) { c.synthetic_test = parse_i64(v); }},

      {"run", "checkpoint_every_epochs",
       [](const ExperimentConfig& c) { return std::to_string(c.checkpoint_every_epochs); },
       [](ExperimentConfig& c, const std::string& v) { c.checkpoint_every_epochs = parse_i64(v); }},
      {"run", "log_every_steps",
       [](const ExperimentConfig& c) { return std::to_string(c.log_every_steps); },
       [](ExperimentConfig& c, const std::string& v) { c.log_every_steps = parse_i64(v); }},
      {"run", "normalizer_samples",
       [](const ExperimentConfig& c) { return std::to_string(c.normalizer_samples); },
       [](ExperimentConfig& c, const std::string& v) { c.normalizer_samples = parse_i64(v); }},
  };
  return table;
}

const Field& find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return f;
  throw std::invalid_argument("unknown configuration key [" + section + "] " + key);
}

}  // namespace

void ExperimentConfig::validate() const {
  optimizer.validate();
  loss.validate();
  if (epochs <= 0 || warmup_epochs < 0 || warmup_epochs >= epochs)
    throw std::invalid_argument("config: warmup must be shorter than the run");
  if (batch_size < 4) throw std::invalid_argument("config: batch size must be >= 4");
  if (accumulation_steps < 1 || batch_size / accumulation_steps < 2)
    throw std::invalid_argument("config: microbatches need >= 2 images");
  networks::encoder_arch_from_string(encoder);  // throws on unknown
  if (width_mult <= 0) throw std::invalid_argument("config: width_mult must be positive");
  if (inv_layers < 1 || inv_dim < 1 || inv_hidden < 1)
    throw std::invalid_argument("config: bad invariance head shape");
  if (equi_layers < 0 || equi_layers > 3)
    throw std::invalid_argument("config: equivariance head depth outside 0..3");
  if (predictor_layers < 1 || predictor_layers > 2)
    throw std::invalid_argument("config: predictor depth must be 1 or 2");
  if (aug_projector_layers < 0 || aug_projector_layers > 2)
    throw std::invalid_argument("config: augmentation projector depth outside 0..2");
  if (synthetic_train < 4 || synthetic_test < 1)
    throw std::invalid_argument("config: synthetic dataset too small");
  if (checkpoint_every_epochs < 1 || log_every_steps < 1 || normalizer_samples < 2)
    throw std::invalid_argument("config: bad run settings");
  const auto arch = networks::encoder_arch_from_string(encoder);
  const bool imagenet_profile = profile_dataset(dataset) == augcodec::Dataset::imagenet;
  if (imagenet_profile && arch == networks::EncoderArch::resnet18_cifar)
    throw std::invalid_argument("config: resnet18-cifar cannot take 224x224 inputs");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) os << "\n";
      os << "[" << f.section << "]\n";
      current = f.section;
    }
    os << f.key << " = " << f.get(*this) << "\n";
  }
  return os.str();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad section");
      section = t.substr(1, t.size() - 2);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    find_field(section, key).set(c, value);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse(text);
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write config " + path);
  f << serialize();
}

void ExperimentConfig::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like section.key=value: " + assignment);
  const std::string dotted = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto dot = dotted.find('.');
  if (dot == std::string::npos)
    throw std::invalid_argument("override key needs a section prefix: " + dotted);
  find_field(dotted.substr(0, dot), dotted.substr(dot + 1)).set(*this, value);
}

augcodec::ViewPolicies ExperimentConfig::view_policies() const {
  return augcodec::make_policies(profile_dataset(dataset), baseline);
}

augcodec::TraceLayout ExperimentConfig::trace_layout() const {
  return augcodec::TraceLayout::for_profile(profile_dataset(dataset), baseline);
}

networks::ModelConfig ExperimentConfig::model_config() const {
  networks::ModelConfig mc;
  mc.baseline = baseline;
  mc.encoder.arch = networks::encoder_arch_from_string(encoder);
  mc.encoder.width_mult = width_mult;
  mc.encoder.resolution = view_policies().first.resolution;
  mc.inv_head = {inv_layers, inv_hidden, inv_dim};
  mc.equi_head = {equi_layers, equi_hidden, equi_dim};
  mc.predictor = {predictor_layers, predictor_hidden};
  mc.aug_projector = {aug_projector_layers, aug_projector_hidden, aug_projector_dim};
  mc.inv_predictor = {2, 4096, inv_dim};
  mc.trace_dim = trace_layout().length();
  return mc;
}

std::string ExperimentConfig::run_name() const {
  std::ostringstream os;
  os << to_string(dataset) << "-" << augcodec::to_string(baseline);
  if (loss.lambda == 0) os << "-baseline";
  os << "-seed" << seed;
  return os.str();
}

std::vector<std::string> preset_names() {
  return {"cifar10_simclr", "cifar10_byol", "cifar10_barlow", "imagenet_simclr", "imagenet_byol",
          "synth10_simclr_smoke"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.optimizer.momentum = 0.9;
  c.optimizer.trust_coefficient = 0.001;
  c.warmup_epochs = 10;
  c.loss.lambda = 1.0;
  c.loss.tau_prime = 0.2;

  if (name == "cifar10_simclr") {
    c.dataset = DatasetKind::cifar10;
    c.baseline = augcodec::Baseline::simclr;
    c.epochs = 800;
    c.batch_size = 512;
    c.optimizer.lr = 4.0;
    c.optimizer.weight_decay = 1e-6;
    c.loss.tau = 0.5;
    c.encoder = "resnet18-cifar";
    c.inv_layers = 3;
    c.inv_dim = 128;
  } else if (name == "cifar10_byol") {
    c.dataset = DatasetKind::cifar10;
    c.baseline = augcodec::Baseline::byol;
    c.epochs = 800;
    c.batch_size = 512;
    c.optimizer.lr = 2.0;
    c.optimizer.weight_decay = 1e-6;
    c.loss.byol_tau_base = 0.996;
    c.encoder = "resnet18-cifar";
    c.inv_layers = 2;
    c.inv_hidden = 4096;
    c.inv_dim = 256;
  } else if (name == "cifar10_barlow") {
    c.dataset = DatasetKind::cifar10;
    c.baseline = augcodec::Baseline::barlow;
    c.epochs = 800;
    c.batch_size = 512;
    c.optimizer.lr = 1.2;
    c.optimizer.weight_decay = 1.5e-6;
    c.loss.barlow_lambda = 0.005;
    c.encoder = "resnet18-cifar";
    c.inv_layers = 3;
    c.inv_dim = 128;
  } else if (name == "imagenet_simclr") {
    c.dataset = DatasetKind::imagenet;
    c.baseline = augcodec::Baseline::simclr;
    c.epochs = 800;
    c.batch_size = 4096;
    c.optimizer.lr = 2.4;  // 4.8 for the baseline without the equivariance module
    c.optimizer.weight_decay = 1e-6;
    c.loss.tau = 0.2;
    c.encoder = "resnet50";
    c.inv_layers = 3;
    c.inv_dim = 128;
  } else if (name == "imagenet_byol") {
    c.dataset = DatasetKind::imagenet;
    c.baseline = augcodec::Baseline::byol;
    c.epochs = 1000;
    c.batch_size = 4096;
    c.optimizer.lr = 4.8;  // 3.2 for the baseline without the equivariance module
    c.optimizer.weight_decay = 1.5e-6;
    c.loss.byol_tau_base = 0.996;
    c.encoder = "resnet50";
    c.inv_layers = 2;
    c.inv_hidden = 4096;
    c.inv_dim = 256;
  } else if (name == "synth10_simclr_smoke") {
    // scaled-down pipeline check on the synthetic dataset
    c.dataset = DatasetKind::synth10;
    c.baseline = augcodec::Baseline::simclr;
    c.epochs = 10;
    c.warmup_epochs = 2;
    c.batch_size = 64;
    c.optimizer.lr = 1.0;
    c.optimizer.weight_decay = 1e-6;
    c.loss.tau = 0.5;
    c.encoder = "resnet18-cifar";
    c.width_mult = 0.25;
    c.inv_hidden = 256;
    c.equi_hidden = 256;
    c.inv_dim = 64;
    c.equi_dim = 64;
    c.synthetic_train = 512;
    c.synthetic_test = 128;
    c.normalizer_samples = 10000;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  c.output_dir = "runs/" + name;
  c.validate();
  return c;
}

}  // namespace equimod::exp
