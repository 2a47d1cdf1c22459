#include "tvt/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace tvt;
using doctest::Contains;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("empty text yields the defaults") {
  const RunConfig config = parse_config_text("");
  const RunConfig defaults;
  CHECK(config.model.embed_dim == defaults.model.embed_dim);
  CHECK(config.train.peak_lr == defaults.train.peak_lr);
  CHECK(config.data.train_per_domain == defaults.data.train_per_domain);
  CHECK_FALSE(config.uses_idx());
}

TEST_CASE("keys override defaults, comments and blanks are skipped") {
  const RunConfig config = parse_config_text(
      "# a comment line\n"
      "\n"
      "model.embed_dim = 32\n"
      "  train.alpha=0.25  \n"
      "data.target_noise = 0.01\n"
      "train.seed = 9\n");
  CHECK(config.model.embed_dim == 32);
  CHECK(config.train.alpha == 0.25);
  CHECK(config.data.target_style.noise == 0.01);
  CHECK(config.train.seed == 9);
  // Untouched keys keep their defaults.
  CHECK(config.train.beta == RunConfig{}.train.beta);
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK_THROWS_WITH_AS(parse_config_text("model.embod_dim = 32\n"),
                       Contains("model.embod_dim"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("lr = 0.1\n"), Contains("unknown key"),
                       ConfigError);
}

TEST_CASE("malformed lines and values are rejected") {
  CHECK_THROWS_WITH_AS(parse_config_text("just some words\n"), Contains("key=value"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("train.alpha = fast\n"), Contains("train.alpha"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("model.heads = 4x\n"), Contains("4x"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("train.seed = -3\n"), Contains("nonnegative"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("= 5\n"), Contains("empty key"), ConfigError);
}

TEST_CASE("duplicate keys are rejected") {
  CHECK_THROWS_WITH_AS(parse_config_text("train.alpha = 0.1\ntrain.alpha = 0.2\n"),
                       Contains("duplicate key: train.alpha"), ConfigError);
}

TEST_CASE("parsed configs are validated") {
  // Mismatched model/data geometry.
  CHECK_THROWS_WITH_AS(parse_config_text("model.classes = 3\n"),
                       Contains("data.classes"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("model.image_size = 16\nmodel.patch_size = 4\n"),
                       Contains("data.image_size"), ConfigError);
  // Member validation still fires through the same entry point.
  CHECK_THROWS_AS(parse_config_text("train.momentum = 1.5\n"), ConfigError);
}

TEST_CASE("paths are all-or-nothing") {
  CHECK_THROWS_WITH_AS(parse_config_text("paths.source_train_images = a.idx\n"),
                       Contains("paths.source_train_labels"), ConfigError);
}

TEST_CASE("echo is complete and round-trips") {
  RunConfig config;
  config.model.embed_dim = 48;
  config.train.gamma = 0.05;
  config.train.seed = 17;
  config.data.target_style.contrast = 0.7;
  const std::string text = echo_config(config);
  CHECK(text.find("model.embed_dim=48\n") != std::string::npos);
  CHECK(text.find("train.gamma=0.05\n") != std::string::npos);

  const RunConfig reparsed = parse_config_text(text);
  CHECK(echo_config(reparsed) == text);
  CHECK(reparsed.model.embed_dim == 48);
  CHECK(reparsed.train.gamma == 0.05);
  CHECK(reparsed.train.seed == 17);
  CHECK(reparsed.data.target_style.contrast == 0.7);
}

TEST_CASE("file parsing and the missing-file error") {
  const auto path = temp_file("tvt_config_test.cfg");
  {
    std::ofstream out(path);
    out << "model.embed_dim = 16\nmodel.heads = 2\n";
  }
  const RunConfig config = parse_config_file(path);
  CHECK(config.model.embed_dim == 16);
  std::filesystem::remove(path);

  CHECK_THROWS_WITH_AS(parse_config_file(temp_file("tvt_no_such_file.cfg")),
                       Contains("tvt_no_such_file.cfg"), IoError);
}

TEST_CASE("load_corpus: synthetic route matches the generator") {
  RunConfig config;
  config.model.image_size = 16;
  config.model.patch_size = 4;
  config.data.image_size = 16;
  config.data.train_per_domain = 12;
  config.data.test_per_domain = 8;
  const DomainPair pair = load_corpus(config);
  const DomainPair direct = synth_domain_pair(config.data);
  REQUIRE(pair.source_train.count() == direct.source_train.count());
  CHECK((pair.source_train.images[0].values() == direct.source_train.images[0].values())
            .all());
}

TEST_CASE("load_corpus: IDX route re-tags, checks geometry, keeps data") {
  // Round-trip a tiny synthetic corpus through IDX files.
  SynthConfig synth;
  synth.image_size = 16;
  synth.train_per_domain = 8;
  synth.test_per_domain = 4;
  const DomainPair direct = synth_domain_pair(synth);

  RunConfig config;
  config.model.image_size = 16;
  config.model.patch_size = 4;
  config.data.image_size = 16;
  const struct {
    const LabeledImageSet* set;
    const char* stem;
  } splits[] = {{&direct.source_train, "st"},
                {&direct.source_test, "se"},
                {&direct.target_train, "tt"},
                {&direct.target_test, "te"}};
  std::vector<std::filesystem::path> written;
  std::vector<std::string*> slots = {
      &config.paths.source_train_images, &config.paths.source_train_labels,
      &config.paths.source_test_images,  &config.paths.source_test_labels,
      &config.paths.target_train_images, &config.paths.target_train_labels,
      &config.paths.target_test_images,  &config.paths.target_test_labels};
  for (int i = 0; i < 4; ++i) {
    const auto images = temp_file(std::string("tvt_cfg_") + splits[i].stem + "_img.idx");
    const auto labels = temp_file(std::string("tvt_cfg_") + splits[i].stem + "_lab.idx");
    save_idx(*splits[i].set, images.string(), labels.string());
    *slots[2 * i] = images.string();
    *slots[2 * i + 1] = labels.string();
    written.push_back(images);
    written.push_back(labels);
  }

  const DomainPair loaded = load_corpus(config);
  CHECK(loaded.source_train.count() == 8);
  CHECK(loaded.target_test.domain == "target");
  CHECK(loaded.target_test.split == "test");
  CHECK(loaded.source_train.classes == 4);
  CHECK(loaded.source_train.labels == direct.source_train.labels);

  // Wrong model geometry is caught by name.
  RunConfig wrong = config;
  wrong.model.image_size = 32;
  wrong.model.patch_size = 8;
  wrong.data.image_size = 32;
  CHECK_THROWS_WITH_AS(load_corpus(wrong), Contains("model.image_size"), ConfigError);

  for (const auto& path : written) std::filesystem::remove(path);
}
