#include "tvt/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace tvt {

namespace {

// Single source of truth for the key schema: parsing, echoing and schema
// checks all walk this list. The visitor gets (key, field reference) pairs
// and dispatches on the field type.
template <typename Config, typename Visitor>
void for_each_field(Config& config, Visitor&& visit) {
  visit("model.image_size", config.model.image_size);
  visit("model.channels", config.model.channels);
  visit("model.patch_size", config.model.patch_size);
  visit("model.embed_dim", config.model.embed_dim);
  visit("model.heads", config.model.heads);
  visit("model.depth", config.model.depth);
  visit("model.classes", config.model.classes);
  visit("model.mlp_ratio", config.model.mlp_ratio);

  visit("train.alpha", config.train.alpha);
  visit("train.beta", config.train.beta);
  visit("train.gamma", config.train.gamma);
  visit("train.peak_lr", config.train.peak_lr);
  visit("train.warmup_steps", config.train.warmup_steps);
  visit("train.total_steps", config.train.total_steps);
  visit("train.momentum", config.train.momentum);
  visit("train.clip_norm", config.train.clip_norm);
  visit("train.disc_lr_scale", config.train.disc_lr_scale);
  visit("train.source_batch", config.train.source_batch);
  visit("train.target_batch", config.train.target_batch);
  visit("train.seed", config.train.seed);
  visit("train.eval_interval", config.train.eval_interval);

  visit("data.classes", config.data.classes);
  visit("data.image_size", config.data.image_size);
  visit("data.train_per_domain", config.data.train_per_domain);
  visit("data.test_per_domain", config.data.test_per_domain);
  visit("data.seed", config.data.seed);
  visit("data.source_texture", config.data.source_style.texture);
  visit("data.source_noise", config.data.source_style.noise);
  visit("data.source_offset", config.data.source_style.offset);
  visit("data.source_contrast", config.data.source_style.contrast);
  visit("data.target_texture", config.data.target_style.texture);
  visit("data.target_noise", config.data.target_style.noise);
  visit("data.target_offset", config.data.target_style.offset);
  visit("data.target_contrast", config.data.target_style.contrast);

  visit("paths.source_train_images", config.paths.source_train_images);
  visit("paths.source_train_labels", config.paths.source_train_labels);
  visit("paths.source_test_images", config.paths.source_test_images);
  visit("paths.source_test_labels", config.paths.source_test_labels);
  visit("paths.target_train_images", config.paths.target_train_images);
  visit("paths.target_train_labels", config.paths.target_train_labels);
  visit("paths.target_test_images", config.paths.target_test_images);
  visit("paths.target_test_labels", config.paths.target_test_labels);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* kind) {
  throw ConfigError("key " + key + ": cannot parse \"" + value + "\" as " + kind);
}

long long parse_integer(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const long long parsed = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end != value.c_str() + value.size() || value.empty()) {
    bad_value(key, value, "an integer");
  }
  return parsed;
}

// Assigns `value` to whichever field matches `key`; reports whether any did.
struct AssignField {
  const std::string& key;
  const std::string& value;
  bool matched = false;

  void operator()(const char* name, Index& field) {
    if (key != name) return;
    field = static_cast<Index>(parse_integer(key, value));
    matched = true;
  }
  void operator()(const char* name, int& field) {
    if (key != name) return;
    field = static_cast<int>(parse_integer(key, value));
    matched = true;
  }
  void operator()(const char* name, std::uint64_t& field) {
    if (key != name) return;
    const long long parsed = parse_integer(key, value);
    if (parsed < 0) bad_value(key, value, "a nonnegative integer");
    field = static_cast<std::uint64_t>(parsed);
    matched = true;
  }
  void operator()(const char* name, double& field) {
    if (key != name) return;
    char* end = nullptr;
    errno = 0;
    const double parsed = std::strtod(value.c_str(), &end);
    if (errno != 0 || end != value.c_str() + value.size() || value.empty()) {
      bad_value(key, value, "a number");
    }
    field = parsed;
    matched = true;
  }
  void operator()(const char* name, std::string& field) {
    if (key != name) return;
    field = value;
    matched = true;
  }
};

// Serializes one field as a key=value line. Empty strings (unset paths) are
// skipped so the echo stays minimal yet round-trips exactly.
struct EmitField {
  std::string& out;

  void operator()(const char* name, const Index& field) {
    out += name;
    out += '=';
    out += std::to_string(field);
    out += '\n';
  }
  void operator()(const char* name, const int& field) {
    out += name;
    out += '=';
    out += std::to_string(field);
    out += '\n';
  }
  void operator()(const char* name, const std::uint64_t& field) {
    out += name;
    out += '=';
    out += std::to_string(field);
    out += '\n';
  }
  void operator()(const char* name, const double& field) {
    out += name;
    out += '=';
    out += format_double(field);
    out += '\n';
  }
  void operator()(const char* name, const std::string& field) {
    if (field.empty()) return;
    out += name;
    out += '=';
    out += field;
    out += '\n';
  }
};

const char* const kPathKeys[] = {
    "paths.source_train_images", "paths.source_train_labels",
    "paths.source_test_images",  "paths.source_test_labels",
    "paths.target_train_images", "paths.target_train_labels",
    "paths.target_test_images",  "paths.target_test_labels",
};

std::vector<const std::string*> path_fields(const IdxPaths& paths) {
  return {&paths.source_train_images, &paths.source_train_labels,
          &paths.source_test_images,  &paths.source_test_labels,
          &paths.target_train_images, &paths.target_train_labels,
          &paths.target_test_images,  &paths.target_test_labels};
}

void check_set_geometry(const LabeledImageSet& set, const ModelConfig& model,
                        const char* which) {
  for (const Tensor& image : set.images) {
    const Shape& shape = image.shape();
    if (shape.size() < 2 || shape[0] != model.image_size || shape[1] != model.image_size) {
      throw ConfigError(std::string(which) + ": image shape " + shape_to_string(shape) +
                        " does not match model.image_size " +
                        std::to_string(model.image_size));
    }
  }
  if (set.classes > static_cast<int>(model.classes)) {
    throw ConfigError(std::string(which) + ": labels span " + std::to_string(set.classes) +
                      " classes but model.classes is " + std::to_string(model.classes));
  }
}

}  // namespace

bool RunConfig::uses_idx() const {
  for (const std::string* field : path_fields(paths)) {
    if (!field->empty()) return true;
  }
  return false;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  data.validate();
  if (model.channels != 1) {
    throw ConfigError("model.channels: both corpus sources are single-channel, got " +
                      std::to_string(model.channels));
  }
  if (uses_idx()) {
    const auto fields = path_fields(paths);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i]->empty()) {
        throw ConfigError(std::string("paths are all-or-nothing; missing ") + kPathKeys[i]);
      }
    }
  } else {
    if (static_cast<int>(model.classes) != data.classes) {
      throw ConfigError("model.classes " + std::to_string(model.classes) +
                        " != data.classes " + std::to_string(data.classes));
    }
    if (static_cast<int>(model.image_size) != data.image_size) {
      throw ConfigError("model.image_size " + std::to_string(model.image_size) +
                        " != data.image_size " + std::to_string(data.image_size));
    }
  }
}

RunConfig parse_config_text(std::string_view text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream stream{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key=value, got \"" + std::string(body) + "\"");
    }
    const std::string key{trim(body.substr(0, eq))};
    const std::string value{trim(body.substr(eq + 1))};
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("duplicate key: " + key);
    }
    AssignField assign{key, value};
    for_each_field(config, assign);
    if (!assign.matched) throw ConfigError("unknown key: " + key);
  }
  config.validate();
  return config;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("error reading config file: " + path.string());
  return parse_config_text(buffer.str());
}

std::string echo_config(const RunConfig& config) {
  std::string out;
  EmitField emit{out};
  for_each_field(config, emit);
  return out;
}

DomainPair load_corpus(const RunConfig& config) {
  config.validate();
  if (!config.uses_idx()) return synth_domain_pair(config.data);

  DomainPair pair;
  struct SplitSpec {
    LabeledImageSet* slot;
    const std::string* images;
    const std::string* labels;
    const char* domain;
    const char* split;
  };
  const SplitSpec specs[] = {
      {&pair.source_train, &config.paths.source_train_images,
       &config.paths.source_train_labels, "source", "train"},
      {&pair.source_test, &config.paths.source_test_images,
       &config.paths.source_test_labels, "source", "test"},
      {&pair.target_train, &config.paths.target_train_images,
       &config.paths.target_train_labels, "target", "train"},
      {&pair.target_test, &config.paths.target_test_images,
       &config.paths.target_test_labels, "target", "test"},
  };
  for (const SplitSpec& spec : specs) {
    LabeledImageSet set = load_idx(*spec.images, *spec.labels);
    const std::string which = std::string(spec.domain) + " " + spec.split;
    check_set_geometry(set, config.model, which.c_str());
    set.classes = static_cast<int>(config.model.classes);
    set.domain = spec.domain;
    set.split = spec.split;
    set.validate();
    *spec.slot = std::move(set);
  }
  return pair;
}

}  // namespace tvt
