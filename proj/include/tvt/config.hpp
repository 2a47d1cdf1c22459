#pragma once

#include "tvt/backbone.hpp"
#include "tvt/data.hpp"
#include "tvt/trainer.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace tvt {

/// IDX corpus locations. Either every path is set (train/eval read these
/// files) or every path is empty (the synthetic generator is used).
struct IdxPaths {
  std::string source_train_images;
  std::string source_train_labels;
  std::string source_test_images;
  std::string source_test_labels;
  std::string target_train_images;
  std::string target_train_labels;
  std::string target_test_images;
  std::string target_test_labels;
};

/// Everything a run needs, resolved from a flat key=value file. Absent keys
/// keep their defaults; unknown keys are rejected by name.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthConfig data;
  IdxPaths paths;

  bool uses_idx() const;
  /// Member validation plus cross-field consistency (model vs corpus
  /// geometry, all-or-nothing paths). Throws ConfigError.
  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment line, blank lines are
/// skipped. Unknown or duplicate keys and malformed values throw
/// ConfigError naming the offender. The result is validated.
RunConfig parse_config_text(std::string_view text);

/// File variant: unreadable path throws IoError naming it.
RunConfig parse_config_file(const std::filesystem::path& path);

/// The resolved configuration as parseable key=value text, every key
/// spelled out. parse_config_text(echo_config(c)) reproduces c.
std::string echo_config(const RunConfig& config);

/// Materializes the corpus the config describes: the synthetic pair, or the
/// four IDX splits re-tagged and checked against the model geometry.
DomainPair load_corpus(const RunConfig& config);

}  // namespace tvt
