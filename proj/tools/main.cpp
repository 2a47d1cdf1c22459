// tvt: train / evaluate / verify / dump for the transferable ViT.
// Exit codes: 0 success, 1 verification or unexpected failure,
// 2 user/config error, 3 environment/IO error.

#include "tvt/checkpoint.hpp"
#include "tvt/config.hpp"
#include "tvt/grad_check.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

namespace {

using namespace tvt;

/// The TAM weighting path only makes sense when the patch discriminator is
/// being trained, so the attention mode follows the patch loss weight.
TamMode derive_mode(const TrainConfig& train) {
  return train.beta > 0.0 ? TamMode::weighted : TamMode::vanilla;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              bool source_only, bool no_tam, bool no_dcm) {
  RunConfig config = parse_config_file(config_path);
  if (source_only) {
    config.train.alpha = 0.0;
    config.train.beta = 0.0;
    config.train.gamma = 0.0;
  }
  if (no_tam) config.train.beta = 0.0;
  if (no_dcm) config.train.gamma = 0.0;

  const std::string echo = echo_config(config);
  std::fputs(echo.c_str(), stdout);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);
  write_text_file(std::filesystem::path(out_dir) / "config.txt", echo);

  const DomainPair pair = load_corpus(config);
  TvtModel model(config.model, config.train.seed);
  Trainer trainer(model, config.train, derive_mode(config.train));
  const FitResult result = trainer.fit(pair, out_dir);

  std::printf("final target accuracy: %s\n", format_double(result.final_accuracy).c_str());
  std::printf("final checkpoint: %s\n", result.final_checkpoint.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path) {
  const RunConfig config = parse_config_file(config_path);
  const DomainPair pair = load_corpus(config);
  TvtModel model(config.model, config.train.seed);
  load_checkpoint(model.params(), checkpoint_path);
  Trainer trainer(model, config.train, derive_mode(config.train));
  const double accuracy = trainer.evaluate(pair.target_test);
  std::printf("{\"target_accuracy\":%s}\n", format_double(accuracy).c_str());
  return 0;
}

/// Buckets a parameter name into the architectural family it belongs to, so
/// the coverage summary can show that sampling spanned the whole model.
std::string family_of(const std::string& param, Index depth) {
  auto starts_with = [&](const std::string& prefix) {
    return param.rfind(prefix, 0) == 0;
  };
  if (starts_with("disc_global.")) return "global discriminator";
  if (starts_with("disc_patch.")) return "patch discriminator";
  if (starts_with("head.")) return "head";
  if (starts_with("blocks." + std::to_string(depth - 1) + ".")) return "tam block";
  return "backbone";
}

int cmd_gradcheck(const std::string& config_path, Index samples, bool corrupt) {
  const RunConfig config = parse_config_file(config_path);
  const DomainPair pair = load_corpus(config);

  // One fixed mini-batch from the head of each train split; batch sizes come
  // from the config, so a reduced config keeps the runtime small.
  DomainBatch batch;
  const Index n_source =
      std::min<Index>(config.train.source_batch, pair.source_train.count());
  const Index n_target =
      std::min<Index>(config.train.target_batch, pair.target_train.count());
  for (Index i = 0; i < n_source; ++i) {
    batch.source_images.push_back(pair.source_train.images[i]);
    batch.source_labels.push_back(pair.source_train.labels[i]);
  }
  for (Index i = 0; i < n_target; ++i) {
    batch.target_images.push_back(pair.target_train.images[i]);
  }

  TvtModel model(config.model, config.train.seed);
  const TamMode mode = derive_mode(config.train);
  const double lambda = 0.5;
  const Objective objective = [&](Tape& tape, GradCheckReplay* replay) {
    Var loss =
        total_objective(model, tape, batch, config.train, mode, lambda, replay).loss;
    // Hidden negative control: a deliberately wrong backward rule must trip
    // the checker (exit 1), proving it can actually catch regressions.
    if (corrupt) loss = scale_backward_only(loss, 1.5);
    return loss;
  };

  GradCheckOptions opts;
  opts.samples = samples;
  const GradCheckReport report = check_gradients(model.params(), objective, opts);

  std::map<std::string, int> coverage;
  for (const CoordinateReport& cr : report.checked_coords) {
    ++coverage[family_of(cr.param, config.model.depth)];
  }
  std::printf("checked %lld coordinates (%lld skipped as numerically dormant)\n",
              static_cast<long long>(report.checked),
              static_cast<long long>(report.skipped));
  for (const auto& [family, count] : coverage) {
    std::printf("  %-20s %d\n", family.c_str(), count);
  }
  std::printf("max relative error %s at %s[%lld] (analytic %s, numeric %s)\n",
              format_double(report.max_rel_error).c_str(), report.worst.param.c_str(),
              static_cast<long long>(report.worst.offset),
              format_double(report.worst.analytic).c_str(),
              format_double(report.worst.numeric).c_str());
  std::printf("tolerance %s: %s\n", format_double(opts.tolerance).c_str(),
              report.ok ? "PASS" : "FAIL");
  return report.ok ? 0 : 1;
}

int cmd_attn_dump(const std::string& checkpoint_path, const std::string& config_path,
                  const std::string& images_path, const std::string& out_csv) {
  const RunConfig config = parse_config_file(config_path);
  TvtModel model(config.model, config.train.seed);
  load_checkpoint(model.params(), checkpoint_path);

  const std::vector<Tensor> images = load_idx_images(images_path);
  if (images.empty()) throw ValueError("no images in " + images_path);

  const Index R = config.model.patch_count();
  std::string csv;
  std::string features;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Shape& shape = images[i].shape();
    if (shape[0] != config.model.image_size || shape[1] != config.model.image_size) {
      throw ConfigError("image " + std::to_string(i) + " shape " +
                        shape_to_string(shape) + " does not match model.image_size " +
                        std::to_string(config.model.image_size));
    }
    Tape tape;
    TvtModel::ForwardOptions opts;
    opts.mode = TamMode::weighted;
    opts.record_attention = true;
    const TvtModel::Forward fwd = model.forward_image(tape, images[i], opts);

    // id, R raw class->patch weights, R transferabilities, R effective
    // weights. Index 0 of the attention rows is the class self-weight and is
    // not part of the dump.
    csv += std::to_string(i);
    for (Index r = 1; r <= R; ++r) csv += "," + format_double(fwd.attn.raw(r));
    for (Index r = 0; r < R; ++r) {
      csv += "," + format_double(fwd.attn.transferability(r));
    }
    for (Index r = 1; r <= R; ++r) csv += "," + format_double(fwd.attn.effective(r));
    csv += '\n';

    features += std::to_string(i);
    const Tensor& cls = fwd.class_state.tensor();
    for (Index c = 0; c < cls.size(); ++c) {
      features += "," + format_double(cls.values()(c));
    }
    features += '\n';
  }

  const std::filesystem::path csv_path(out_csv);
  std::filesystem::path features_path = csv_path;
  features_path.replace_extension();
  features_path += "_features.csv";
  write_text_file(csv_path, csv);
  write_text_file(features_path, features);
  std::printf("wrote %zu attention rows to %s\n", images.size(), csv_path.c_str());
  std::printf("wrote class-token features to %s\n", features_path.c_str());
  return 0;
}

int cmd_export_synth(const std::string& config_path, const std::string& out_dir) {
  const RunConfig config = parse_config_file(config_path);
  const DomainPair pair = synth_domain_pair(config.data);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  const std::filesystem::path dir(out_dir);
  const struct {
    const LabeledImageSet* set;
    const char* stem;
  } splits[] = {{&pair.source_train, "source_train"},
                {&pair.source_test, "source_test"},
                {&pair.target_train, "target_train"},
                {&pair.target_test, "target_test"}};
  for (const auto& split : splits) {
    const auto images = dir / (std::string(split.stem) + "_images.idx");
    const auto labels = dir / (std::string(split.stem) + "_labels.idx");
    save_idx(*split.set, images.string(), labels.string());
    std::printf("wrote %lld %s examples to %s\n",
                static_cast<long long>(split.set->count()), split.stem,
                images.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transferable vision transformer: train, evaluate, verify, dump."};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string checkpoint_path;
  std::string images_path;
  bool source_only = false;
  bool no_tam = false;
  bool no_dcm = false;
  Index samples = 200;
  bool corrupt = false;

  CLI::App* train = app.add_subcommand("train", "Run the adaptation schedule");
  train->add_option("--config", config_path, "key=value run configuration")->required();
  train->add_option("--out", out_path, "output directory")->required();
  train->add_flag("--source-only", source_only,
                  "supervised source training only (alpha=beta=gamma=0)");
  train->add_flag("--no-tam", no_tam, "disable the transferability weighting (beta=0)");
  train->add_flag("--no-dcm", no_dcm, "disable the clustering term (gamma=0)");

  CLI::App* eval = app.add_subcommand("eval", "Target-domain accuracy of a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "trained model")->required();
  eval->add_option("--config", config_path, "key=value run configuration")->required();

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Compare tape gradients of the full objective against "
                   "finite differences");
  gradcheck->add_option("--config", config_path, "key=value run configuration")
      ->required();
  gradcheck->add_option("--samples", samples, "coordinates to sample (default 200)");
  gradcheck->add_flag("--corrupt", corrupt)->group("");  // negative control, hidden

  CLI::App* attn = app.add_subcommand("attn-dump", "Per-image class attention CSV");
  attn->add_option("--checkpoint", checkpoint_path, "trained model")->required();
  attn->add_option("--config", config_path, "key=value run configuration")->required();
  attn->add_option("--images", images_path, "IDX image file")->required();
  attn->add_option("--out", out_path, "CSV destination")->required();

  CLI::App* export_synth =
      app.add_subcommand("export-synth", "Write the synthetic corpus as IDX files");
  export_synth->add_option("--config", config_path, "key=value run configuration")
      ->required();
  export_synth->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      return cmd_train(config_path, out_path, source_only, no_tam, no_dcm);
    }
    if (eval->parsed()) return cmd_eval(checkpoint_path, config_path);
    if (gradcheck->parsed()) return cmd_gradcheck(config_path, samples, corrupt);
    if (attn->parsed()) {
      return cmd_attn_dump(checkpoint_path, config_path, images_path, out_path);
    }
    if (export_synth->parsed()) return cmd_export_synth(config_path, out_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
