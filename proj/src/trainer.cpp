#include "tvt/trainer.hpp"

#include "tvt/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace tvt {

namespace {

Tensor domain_targets(Index source_rows, Index target_rows, Index repeats) {
  Tensor targets(Shape{(source_rows + target_rows) * repeats, 1});
  targets.values().head(source_rows * repeats) = 1.0;
  return targets;
}

}  // namespace

void TrainConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
    throw ConfigError("loss weights alpha/beta/gamma must be nonnegative");
  }
  if (peak_lr <= 0.0) throw ConfigError("peak_lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be nonnegative (0 disables)");
  if (disc_lr_scale <= 0.0) throw ConfigError("disc_lr_scale must be positive");
  if (warmup_steps < 0 || total_steps < 0) throw ConfigError("step counts must be nonnegative");
  if (total_steps > 0 && warmup_steps >= total_steps) {
    throw ConfigError("warmup_steps must be smaller than total_steps");
  }
  if (source_batch < 1 || target_batch < 1) throw ConfigError("batch sizes must be >= 1");
  if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
}

double lr_schedule(const TrainConfig& config, int step) {
  if (step < 0) throw ValueError("lr_schedule: negative step");
  if (step > config.total_steps) step = config.total_steps;  // clamp past the end
  if (step < config.warmup_steps) {
    return config.peak_lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  }
  const double span = static_cast<double>(config.total_steps - config.warmup_steps);
  const double t = span > 0.0 ? static_cast<double>(step - config.warmup_steps) / span : 1.0;
  return config.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

void SgdMomentum::step(const std::vector<ParamGroup>& groups, double clip_norm) {
  for (const ParamGroup& g : groups) {
    for (Parameter* p : g.params) {
      if (!p->tensor.has_grad()) {
        throw ValueError("optimizer step without a gradient for '" + p->name + "'");
      }
    }
  }
  double scale = 1.0;
  if (clip_norm > 0.0) {
    double squared = 0.0;
    for (const ParamGroup& g : groups) {
      for (Parameter* p : g.params) squared += (p->tensor.grad() * p->tensor.grad()).sum();
    }
    const double norm = std::sqrt(squared);
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  for (const ParamGroup& g : groups) {
    for (Parameter* p : g.params) {
      Eigen::ArrayXd& v = velocity_[p->name];
      if (v.size() == 0) v = Eigen::ArrayXd::Zero(p->tensor.size());
      v = momentum_ * v + scale * p->tensor.grad();
      p->tensor.values() -= g.lr * v;
    }
  }
}

void SgdMomentum::step(const std::vector<Parameter*>& params, double lr, double clip_norm) {
  step(std::vector<ParamGroup>{{params, lr}}, clip_norm);
}

ObjectiveParts total_objective(TvtModel& model, Tape& tape, const DomainBatch& batch,
                               const TrainConfig& config, TamMode mode, double lambda,
                               GradCheckReplay* replay) {
  const Index n_s = static_cast<Index>(batch.source_images.size());
  const Index n_t = static_cast<Index>(batch.target_images.size());
  if (n_s == 0 || n_t == 0) {
    throw ValueError("total_objective needs both source and target examples");
  }
  if (batch.source_labels.size() != batch.source_images.size()) {
    throw ValueError("source labels do not match source images");
  }

  TvtModel::ForwardOptions opts;
  opts.mode = mode;
  opts.lambda = lambda;
  opts.replay = replay;
  opts.want_patch_probs = config.beta > 0.0;

  std::vector<Var> class_rows;
  std::vector<Var> patch_rows;
  class_rows.reserve(static_cast<size_t>(n_s + n_t));
  for (Index i = 0; i < n_s + n_t; ++i) {
    const bool is_source = i < n_s;
    opts.replay_key = (is_source ? "src." : "tgt.") + std::to_string(is_source ? i : i - n_s);
    const Tensor& image = is_source ? batch.source_images[static_cast<size_t>(i)]
                                    : batch.target_images[static_cast<size_t>(i - n_s)];
    TvtModel::Forward fwd = model.forward_image(tape, image, opts);
    class_rows.push_back(fwd.class_state);
    if (opts.want_patch_probs) patch_rows.push_back(fwd.patch_probs);
  }

  Var class_states = concat_rows(class_rows);
  Var logits = model.classify(tape, class_states);

  ObjectiveParts parts;
  Var loss = cross_entropy_with_logits(slice_rows(logits, 0, n_s), batch.source_labels);
  parts.l_clc = loss.scalar_value();

  if (config.alpha > 0.0) {
    Var reversed = grl(class_states, lambda, replay, "grl.global");
    Var probs = discriminate(reversed, model.global_disc_vars(tape));
    Var l_dis = binary_cross_entropy(probs, domain_targets(n_s, n_t, 1));
    parts.l_dis = l_dis.scalar_value();
    loss = add(loss, scale(l_dis, config.alpha));
  }

  if (config.beta > 0.0) {
    Var probs = concat_rows(patch_rows);  // (n·R)×1, grl-reversed inside the model
    Var l_pat = binary_cross_entropy(probs, domain_targets(n_s, n_t, model.config().patch_count()));
    parts.l_pat = l_pat.scalar_value();
    loss = add(loss, scale(l_pat, config.beta));
  }

  if (config.gamma > 0.0) {
    Var target_probs = softmax_rows(slice_rows(logits, n_s, n_t));
    Var info = mutual_information(target_probs);
    parts.mi = info.scalar_value();
    loss = sub(loss, scale(info, config.gamma));  // information is maximized
  }

  if (!std::isfinite(loss.scalar_value())) {
    throw ValueError("objective diverged to a non-finite value");
  }
  parts.loss = loss;
  return parts;
}

Trainer::Trainer(TvtModel& model, TrainConfig config, TamMode mode)
    : model_(model), config_(config), mode_(mode), optimizer_(config.momentum) {
  config_.validate();
}

std::vector<ParamGroup> Trainer::trainable_groups(double lr) {
  std::vector<ParamGroup> groups(2);
  groups[0].lr = lr;
  groups[1].lr = lr * config_.disc_lr_scale;
  for (auto& p : model_.params()) {
    const bool global_disc = p->name.rfind("disc_global.", 0) == 0;
    const bool patch_disc = p->name.rfind("disc_patch.", 0) == 0;
    if (global_disc && config_.alpha == 0.0) continue;
    if (patch_disc && config_.beta == 0.0) continue;
    groups[global_disc || patch_disc ? 1 : 0].params.push_back(p.get());
  }
  return groups;
}

StepRecord Trainer::train_step(const DomainBatch& batch, double lr, double lambda) {
  Tape tape;
  ObjectiveParts parts = total_objective(model_, tape, batch, config_, mode_, lambda);
  tape.backward(parts.loss);
  optimizer_.step(trainable_groups(lr), config_.clip_norm);
  for (auto& p : model_.params()) p->tensor.drop_grad();

  StepRecord record;
  record.lr = lr;
  record.lambda = lambda;
  record.l_clc = parts.l_clc;
  record.l_dis = parts.l_dis;
  record.l_pat = parts.l_pat;
  record.mi = parts.mi;
  return record;
}

double Trainer::evaluate(const LabeledImageSet& split) {
  if (split.images.empty()) throw ValueError("evaluate called on an empty split");
  Index hits = 0;
  for (size_t i = 0; i < split.images.size(); ++i) {
    if (model_.predict(split.images[i], mode_) == split.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(split.images.size());
}

FitResult Trainer::fit(const DomainPair& data, const std::string& out_dir) {
  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    metrics.open(out_dir + "/metrics.jsonl", std::ios::binary | std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + out_dir + "/metrics.jsonl");
  }
  const auto save = [&](const std::string& name) -> std::string {
    if (out_dir.empty()) return {};
    const std::string path = out_dir + "/" + name;
    save_checkpoint(model_.params(), path);
    return path;
  };

  PairedBatches stream(data.source_train, data.target_train, config_.source_batch,
                       config_.target_batch, config_.seed);
  FitResult result;
  for (int step = 1; step <= config_.total_steps; ++step) {
    // Adversarial progress runs over the decay phase, not the whole
    // schedule: lambda stays 0 while the lr warms up, so the reversal's
    // full strength never coincides with the lr peak. The classifier forms
    // on source first; alignment then ramps in as the lr falls, which is
    // the pairing the reversal ramp was designed around.
    const double progress =
        std::max(0.0, static_cast<double>(step - config_.warmup_steps) /
                          static_cast<double>(config_.total_steps - config_.warmup_steps));
    const double lr = lr_schedule(config_, step);
    const double lambda = grl_schedule(progress);

    StepRecord record = train_step(stream.next(), lr, lambda);
    record.step = step;

    const bool last = step == config_.total_steps;
    if (step % config_.eval_interval == 0 || last) {
      record.acc = evaluate(data.target_test);
      if (!last) {
        char name[32];
        std::snprintf(name, sizeof name, "ckpt_%06d.tvt", step);
        save(name);
      }
    }
    if (metrics.is_open()) metrics << step_record_json(record) << '\n';
    result.records.push_back(record);
  }

  result.final_accuracy =
      result.records.empty() ? evaluate(data.target_test) : *result.records.back().acc;
  result.final_checkpoint = save("ckpt_final.tvt");
  if (metrics.is_open()) {
    metrics.flush();
    if (!metrics) throw IoError("failed writing " + out_dir + "/metrics.jsonl");
  }
  return result;
}

std::string step_record_json(const StepRecord& record) {
  std::string line = "{\"step\":" + std::to_string(record.step);
  line += ",\"lr\":" + format_double(record.lr);
  line += ",\"lambda\":" + format_double(record.lambda);
  line += ",\"l_clc\":" + format_double(record.l_clc);
  line += ",\"l_dis\":" + format_double(record.l_dis);
  line += ",\"l_pat\":" + format_double(record.l_pat);
  line += ",\"mi\":" + format_double(record.mi);
  if (record.acc) line += ",\"acc\":" + format_double(*record.acc);
  line += "}";
  return line;
}

}  // namespace tvt
