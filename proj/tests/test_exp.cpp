#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "equimod/exp/ablation.hpp"
#include "equimod/exp/datasets.hpp"
#include "equimod/exp/manifest.hpp"
#include "equimod/exp/runner.hpp"

using namespace equimod;
using namespace equimod::exp;

namespace fs = std::filesystem;

namespace {

// byte-level fixture writer, independent of the ingestion code: label byte
// followed by 1024 R, 1024 G, 1024 B plane bytes per record
void write_cifar_fixture(const std::string& path, int64_t records, uint8_t label_of_first) {
  std::ofstream f(path, std::ios::binary);
  for (int64_t r = 0; r < records; ++r) {
    const uint8_t label = r == 0 ? label_of_first : static_cast<uint8_t>(r % 10);
    f.put(static_cast<char>(label));
    for (int plane = 0; plane < 3; ++plane)
      for (int p = 0; p < 1024; ++p)
        f.put(static_cast<char>((plane * 64 + (p + r)) % 256));
  }
}

}  // namespace

TEST_CASE("cifar10 ingestion: decodes the documented fixture layout") {
  const std::string dir = "/tmp/equimod_cifar_fixture";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (int i = 1; i <= 5; ++i)
    write_cifar_fixture(dir + "/data_batch_" + std::to_string(i) + ".bin", 10000,
                        static_cast<uint8_t>(i));
  write_cifar_fixture(dir + "/test_batch.bin", 10000, 7);

  const auto split = load_cifar10(dir);
  CHECK(split.train.size() == 50000);
  CHECK(split.test.size() == 10000);
  CHECK(split.train.num_classes() == 10);

  // first record of data_batch_1: label 1, R plane starts at byte 0*64+0
  CHECK(split.train.label(0) == 1);
  const auto img = split.train.get(0);
  REQUIRE(img.h == 32);
  REQUIRE(img.w == 32);
  REQUIRE(img.c == 3);
  // pixel (0,0): R=0, G=64, B=128; pixel (0,1): planes advance by one byte
  CHECK(img.at(0, 0, 0) == doctest::Approx(0.0 / 255));
  CHECK(img.at(0, 0, 1) == doctest::Approx(64.0 / 255));
  CHECK(img.at(0, 0, 2) == doctest::Approx(128.0 / 255));
  CHECK(img.at(0, 1, 0) == doctest::Approx(1.0 / 255));

  CHECK(split.test.label(0) == 7);
  fs::remove_all(dir);
}

TEST_CASE("cifar10 ingestion: truncated batch file names the file and byte count") {
  const std::string dir = "/tmp/equimod_cifar_truncated";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (int i = 1; i <= 5; ++i)
    write_cifar_fixture(dir + "/data_batch_" + std::to_string(i) + ".bin", i == 3 ? 9999 : 10000,
                        0);
  write_cifar_fixture(dir + "/test_batch.bin", 10000, 0);

  try {
    load_cifar10(dir);
    FAIL("expected ingestion error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("data_batch_3.bin") != std::string::npos);
    CHECK(msg.find("30730000") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("cifar10 ingestion: missing directory reports the offending path") {
  CHECK_THROWS_AS(load_cifar10("/tmp/equimod_no_such_dir"), std::runtime_error);
}

TEST_CASE("config: round trip, overrides, unknown keys") {
  auto config = preset("cifar10_simclr");
  config.seed = 99;
  config.loss.lambda = 0.25;
  const auto back = ExperimentConfig::parse(config.serialize());
  CHECK(back == config);

  auto with_override = config;
  with_override.set_override("loss.lambda=0");
  CHECK(with_override.loss.lambda == 0.0);
  with_override.set_override("experiment.batch_size=256");
  CHECK(with_override.batch_size == 256);

  CHECK_THROWS_AS(config.set_override("loss.unknown=1"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("[loss]\nbogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("[nosuch]\nlambda = 1\n"), std::invalid_argument);
}

TEST_CASE("config: preset list and dump stability") {
  for (const auto& name : preset_names()) {
    const auto c = preset(name);
    CHECK(ExperimentConfig::parse(c.serialize()) == c);
  }
  CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
}

TEST_CASE("config: validation rejects inconsistent settings") {
  auto c = preset("cifar10_simclr");
  c.epochs = 5;  // warmup 10 >= epochs
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  auto c2 = preset("cifar10_simclr");
  c2.encoder = "resnet99";
  CHECK_THROWS_AS(c2.validate(), std::invalid_argument);

  auto c3 = preset("imagenet_simclr");
  c3.encoder = "resnet18-cifar";
  CHECK_THROWS_AS(c3.validate(), std::invalid_argument);
}

TEST_CASE("ablation grids carry the published row labels") {
  const auto base = preset("cifar10_simclr");

  auto labels = [&](const std::string& axis) {
    std::vector<std::string> out;
    for (const auto& cell : ablation_grid(base, axis)) out.push_back(cell.label);
    return out;
  };

  CHECK(labels("head-depth") == std::vector<std::string>{"None", "1", "2", "3"});
  CHECK(labels("predictor-shape") ==
        std::vector<std::string>{"1", "2 (H: 16-d)", "2 (H: 128-d)", "2 (H: 2048-d)"});
  CHECK(labels("aug-projector") ==
        std::vector<std::string>{"None", "1 (O: 16-d)", "1 (O: 128-d)", "1 (O: 2048-d)",
                                 "2 (H: 16-d; O: 128-d)", "2 (H: 128-d; O: 128-d)",
                                 "2 (H: 2048-d; O: 128-d)"});
  CHECK(labels("lambda") ==
        std::vector<std::string>{"0", "0.1", "0.2", "0.5", "1", "2", "5", "10"});
  CHECK(labels("tau-prime") == std::vector<std::string>{"0.05", "0.1", "0.2", "0.5", "1"});
  CHECK(labels("batch") == std::vector<std::string>{"64", "128", "256", "512", "1024"});
  CHECK_THROWS_AS(ablation_grid(base, "bogus"), std::invalid_argument);

  // cells get distinct output directories and the right overrides
  const auto grid = ablation_grid(base, "lambda");
  CHECK(grid[0].config.loss.lambda == 0.0);
  CHECK(grid[7].config.loss.lambda == 10.0);
  CHECK(grid[0].config.output_dir != grid[1].config.output_dir);
}

TEST_CASE("synthetic datasets: shapes, determinism, class balance") {
  const auto a = make_synth10(40, 7);
  const auto b = make_synth10(40, 7);
  CHECK(a.size() == 40);
  CHECK(a.num_classes() == 10);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a.label(i) == i % 10);
  const auto img_a = a.get(3);
  const auto img_b = b.get(3);
  CHECK(img_a.px == img_b.px);
  CHECK(img_a.h == 32);

  const auto mini = make_mini_imagenet(8, 9);
  CHECK(mini.size() == 8);
  const auto big = mini.get(0);
  CHECK(big.h == 256);
  CHECK(big.w == 256);
  CHECK(mini.num_classes() == 10);
}

TEST_CASE("directory dataset: class folders with ppm images") {
  const std::string dir = "/tmp/equimod_dirdata/train";
  fs::remove_all("/tmp/equimod_dirdata");
  for (const std::string cls : {"ant", "bee"}) {
    fs::create_directories(dir + "/" + cls);
    for (int i = 0; i < 2; ++i) {
      std::ofstream f(dir + "/" + cls + "/img" + std::to_string(i) + ".ppm", std::ios::binary);
      f << "P6\n4 3\n255\n";
      for (int p = 0; p < 4 * 3 * 3; ++p) f.put(static_cast<char>(p * 5));
    }
  }
  const auto ds = DirectoryDataset::open(dir);
  CHECK(ds.size() == 4);
  CHECK(ds.num_classes() == 2);
  CHECK(ds.label(0) == 0);  // "ant" sorts first
  CHECK(ds.label(2) == 1);
  const auto img = ds.get(0);
  CHECK(img.h == 3);
  CHECK(img.w == 4);
  CHECK(img.at(0, 0, 1) == doctest::Approx(5.0 / 255));
  fs::remove_all("/tmp/equimod_dirdata");
}

TEST_CASE("manifest: json round trip and atomic save") {
  RunManifest m;
  m.config_text = "[experiment]\n";
  m.layout_json = "{}";
  m.started_at = utc_timestamp();
  m.status = "completed";
  m.baseline_equivalent = true;
  m.epochs_completed = 7;
  m.final_loss_total = 1.25;

  const auto back = RunManifest::from_json(m.to_json());
  CHECK(back.config_text == m.config_text);
  CHECK(back.status == "completed");
  CHECK(back.baseline_equivalent);
  CHECK(back.epochs_completed == 7);
  CHECK(back.final_loss_total == 1.25);

  const std::string path = "/tmp/equimod_manifest_test.json";
  m.save(path);
  CHECK(RunManifest::load(path).epochs_completed == 7);
  CHECK_FALSE(fs::exists(path + ".tmp"));
  std::remove(path.c_str());
}

TEST_CASE("runner: run directory is self-contained") {
  const std::string dir = "/tmp/equimod_selfcontained";
  fs::remove_all(dir);

  ExperimentConfig c;
  c.dataset = DatasetKind::synth10;
  c.baseline = augcodec::Baseline::simclr;
  c.seed = 3;
  c.epochs = 2;
  c.warmup_epochs = 1;
  c.batch_size = 16;
  c.optimizer.lr = 0.5;
  c.loss.tau = 0.5;
  c.width_mult = 0.0625;
  c.inv_layers = 2;
  c.inv_hidden = 32;
  c.inv_dim = 16;
  c.equi_layers = 1;
  c.equi_hidden = 32;
  c.equi_dim = 16;
  c.predictor_hidden = 16;
  c.aug_projector_hidden = 16;
  c.aug_projector_dim = 16;
  c.synthetic_train = 32;
  c.synthetic_test = 16;
  c.normalizer_samples = 200;
  c.output_dir = dir;

  Runner runner(c);
  const auto result = runner.run();
  CHECK(fs::exists(dir + "/manifest.json"));
  CHECK(fs::exists(dir + "/config.ini"));
  CHECK(fs::exists(dir + "/layout.json"));
  CHECK(fs::exists(dir + "/metrics.csv"));
  CHECK(fs::exists(result.final_checkpoint));

  // evaluation needs nothing but the archive
  auto restored = Runner::restore(result.final_checkpoint);
  CHECK(restored.config == c);
  CHECK(restored.layout.layout.profile_id == "cifar10-simclr");
  CHECK(restored.model->rep_width() == 32);

  // metrics csv carries the frozen schema header
  std::ifstream csv(dir + "/metrics.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "step,epoch,lr,loss_inv,loss_equi,loss_total,images_per_sec");

  fs::remove_all(dir);
}

TEST_CASE("shipped preset files match the in-code presets exactly") {
  for (const auto& name : preset_names()) {
    const std::string path = std::string(EQUIMOD_SOURCE_DIR) + "/configs/" + name + ".ini";
    REQUIRE(fs::exists(path));
    std::ifstream f(path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(text == preset(name).serialize());
    CHECK(ExperimentConfig::parse(text) == preset(name));
  }
}
