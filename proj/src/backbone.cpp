#include "tvt/backbone.hpp"

#include <cmath>

namespace tvt {

void ModelConfig::validate() const {
  if (image_size < 1 || channels < 1 || patch_size < 1) {
    throw ConfigError("image_size, channels, and patch_size must be positive");
  }
  if (image_size % patch_size != 0) {
    throw ConfigError("image_size " + std::to_string(image_size) +
                      " is not divisible by patch_size " + std::to_string(patch_size));
  }
  if (embed_dim < 2 || heads < 1 || embed_dim % heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) +
                      " must be >= 2 and divisible by heads " + std::to_string(heads));
  }
  if (embed_dim % 2 != 0) {
    throw ConfigError("embed_dim must be even for the discriminator bottleneck");
  }
  if (depth < 2) {
    throw ConfigError("depth must be at least 2 (standard blocks plus the adapted one)");
  }
  if (classes < 2) throw ConfigError("classes must be at least 2");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be at least 1");
}

Tensor patchify(const Tensor& image, Index patch_size) {
  if (image.rank() != 2 && image.rank() != 3) {
    throw ShapeError("patchify wants H×W or H×W×C, got " + shape_to_string(image.shape()));
  }
  const Index h = image.dim(0);
  const Index w = image.dim(1);
  const Index c = image.rank() == 3 ? image.dim(2) : 1;
  if (h != w) {
    throw ConfigError("patchify needs a square image, got " + shape_to_string(image.shape()));
  }
  if (patch_size < 1 || h % patch_size != 0) {
    throw ConfigError("image size " + std::to_string(h) + " is not divisible by patch size " +
                      std::to_string(patch_size));
  }
  if ((image.values() < 0.0).any() || (image.values() > 1.0).any()) {
    throw ValueError("patchify expects pixel values in [0, 1]");
  }
  const Index side = h / patch_size;
  Tensor out(Shape{side * side, patch_size * patch_size * c});
  MatMap o = out.matrix();
  const double* px = image.data();
  for (Index pr = 0; pr < side; ++pr) {
    for (Index pc = 0; pc < side; ++pc) {
      const Index row = pr * side + pc;
      Index at = 0;
      for (Index r = 0; r < patch_size; ++r) {
        for (Index col = 0; col < patch_size; ++col) {
          const Index base = ((pr * patch_size + r) * w + pc * patch_size + col) * c;
          for (Index ch = 0; ch < c; ++ch) o(row, at++) = px[base + ch];
        }
      }
    }
  }
  return out;
}

Tensor unpatchify(const Tensor& patches, Index image_size, Index channels, Index patch_size) {
  const Index side = image_size / patch_size;
  if (patch_size < 1 || image_size % patch_size != 0 ||
      patches.rows() != side * side ||
      patches.cols() != patch_size * patch_size * channels) {
    throw ShapeError("unpatchify got patches " + shape_to_string(patches.shape()) +
                     " inconsistent with image size " + std::to_string(image_size));
  }
  Tensor img(channels == 1 ? Shape{image_size, image_size}
                           : Shape{image_size, image_size, channels});
  double* px = img.data();
  ConstMatMap p = patches.matrix();
  for (Index pr = 0; pr < side; ++pr) {
    for (Index pc = 0; pc < side; ++pc) {
      const Index row = pr * side + pc;
      Index at = 0;
      for (Index r = 0; r < patch_size; ++r) {
        for (Index col = 0; col < patch_size; ++col) {
          const Index base = ((pr * patch_size + r) * image_size + pc * patch_size + col) * channels;
          for (Index ch = 0; ch < channels; ++ch) px[base + ch] = p(row, at++);
        }
      }
    }
  }
  return img;
}

Tensor truncated_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  if (stddev <= 0) throw ValueError("truncated_normal needs a positive stddev");
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < t.size(); ++i) {
    double x = dist(rng);
    while (std::abs(x) > 2.0 * stddev) x = dist(rng);
    t.values()(i) = x;
  }
  return t;
}

Var multi_head_attention(Var tokens, const AttentionVars& p, Index heads, const Tensor* mask,
                         AttnRecord* record) {
  Tape& t = *tokens.tape;
  const Index n = tokens.rows();
  const Index d = tokens.cols();
  if (heads < 1 || d % heads != 0) {
    throw ConfigError("token width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (mask != nullptr && (mask->rows() != n || mask->cols() != n)) {
    throw ShapeError("attention mask " + shape_to_string(mask->shape()) + " does not cover " +
                     std::to_string(n) + " tokens");
  }
  const Index dh = d / heads;
  Var q = linear(tokens, p.wq, p.bq);
  Var k = linear(tokens, p.wk, p.bk);
  Var v = linear(tokens, p.wv, p.bv);
  Var mask_var;
  if (mask != nullptr) mask_var = t.constant(*mask);
  if (record != nullptr) {
    record->raw = Eigen::ArrayXd::Zero(n);
    record->effective = Eigen::ArrayXd::Zero(n);
  }
  std::vector<Var> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (Index h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var w = softmax_rows(scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dh))));
    Var we = mask != nullptr ? hadamard(w, mask_var) : w;
    if (record != nullptr) {
      record->raw += w.tensor().matrix().row(0).transpose().array();
      record->effective += we.tensor().matrix().row(0).transpose().array();
    }
    outs.push_back(matmul(we, vh));
  }
  if (record != nullptr) {
    record->raw /= double(heads);
    record->effective /= double(heads);
  }
  return linear(concat_cols(outs), p.wo, p.bo);
}

TvtModel::TvtModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const Index d = cfg_.embed_dim;
  const Index hidden = d * cfg_.mlp_ratio;
  const double sd = 0.02;

  auto weight = [&](const std::string& name, Index rows, Index cols) {
    params_.create(name, truncated_normal(Shape{rows, cols}, sd, rng));
  };
  auto zeros = [&](const std::string& name, Index rows, Index cols) {
    params_.create(name, Tensor::zeros(Shape{rows, cols}));
  };
  auto ones = [&](const std::string& name, Index cols) {
    params_.create(name, Tensor::full(Shape{1, cols}, 1.0));
  };

  weight("embed.weight", cfg_.patch_dim(), d);
  zeros("embed.bias", 1, d);
  zeros("class_token", 1, d);
  weight("pos_embed", cfg_.token_count(), d);

  for (Index i = 0; i < cfg_.depth; ++i) {
    const std::string b = "blocks." + std::to_string(i) + ".";
    ones(b + "ln1.gain", d);
    zeros(b + "ln1.bias", 1, d);
    for (const char* name : {"q", "k", "v", "o"}) {
      weight(b + "attn." + name + "_weight", d, d);
      zeros(b + "attn." + name + "_bias", 1, d);
    }
    ones(b + "ln2.gain", d);
    zeros(b + "ln2.bias", 1, d);
    weight(b + "mlp.w1", d, hidden);
    zeros(b + "mlp.b1", 1, hidden);
    weight(b + "mlp.w2", hidden, d);
    zeros(b + "mlp.b2", 1, d);
  }

  ones("final_ln.gain", d);
  zeros("final_ln.bias", 1, d);
  weight("head.weight", d, cfg_.classes);
  zeros("head.bias", 1, cfg_.classes);

  // The trunk's 0.02 init is far too small for the fresh discriminator
  // MLPs: two GELU layers of near-zero weights pass almost no signal, so
  // the minimax starts from a frozen p = 0.5 plateau that SGD cannot leave
  // inside the schedule. Fan-in scaling on the hidden layers gives them
  // unit-scale activations from step one, while the zeroed output layer
  // starts both discriminators at exactly p = 0.5 (transferabilities = 1)
  // so the adversarial game ramps in smoothly instead of opening with a
  // shock from random confident logits. The patch discriminator gets half
  // the width: it sees one instance per patch, R times the global
  // discriminator's data, and at matched capacity it saturates early and
  // pins the transferabilities to zero.
  auto disc_weight = [&](const std::string& name, Index rows, Index cols) {
    params_.create(name,
                   truncated_normal(Shape{rows, cols}, std::sqrt(2.0 / double(rows)), rng));
  };
  const Index gw = d, pw = d / 2;
  for (const auto& [prefix, w] : {std::pair<std::string, Index>{"disc_global.", gw},
                                  {"disc_patch.", pw}}) {
    disc_weight(prefix + "w1", d, w);
    zeros(prefix + "b1", 1, w);
    disc_weight(prefix + "w2", w, w / 2);
    zeros(prefix + "b2", 1, w / 2);
    zeros(prefix + "w3", w / 2, 1);
    zeros(prefix + "b3", 1, 1);
  }
}

Var TvtModel::leaf(Tape& t, const std::string& name) { return t.leaf(params_.at(name)); }

DiscriminatorVars TvtModel::disc_vars(Tape& t, const std::string& prefix) {
  return DiscriminatorVars{leaf(t, prefix + "w1"), leaf(t, prefix + "b1"),
                           leaf(t, prefix + "w2"), leaf(t, prefix + "b2"),
                           leaf(t, prefix + "w3"), leaf(t, prefix + "b3")};
}

DiscriminatorVars TvtModel::global_disc_vars(Tape& t) { return disc_vars(t, "disc_global."); }

DiscriminatorVars TvtModel::patch_disc_vars(Tape& t) { return disc_vars(t, "disc_patch."); }

BlockVars TvtModel::block_vars(Tape& t, Index block) {
  if (block < 0 || block >= cfg_.depth) {
    throw IndexError("block " + std::to_string(block) + " out of range for depth " +
                     std::to_string(cfg_.depth));
  }
  const std::string b = "blocks." + std::to_string(block) + ".";
  BlockVars v;
  v.ln1_gain = leaf(t, b + "ln1.gain");
  v.ln1_bias = leaf(t, b + "ln1.bias");
  v.attn = AttentionVars{leaf(t, b + "attn.q_weight"), leaf(t, b + "attn.q_bias"),
                         leaf(t, b + "attn.k_weight"), leaf(t, b + "attn.k_bias"),
                         leaf(t, b + "attn.v_weight"), leaf(t, b + "attn.v_bias"),
                         leaf(t, b + "attn.o_weight"), leaf(t, b + "attn.o_bias")};
  v.ln2_gain = leaf(t, b + "ln2.gain");
  v.ln2_bias = leaf(t, b + "ln2.bias");
  v.mlp = MlpVars{leaf(t, b + "mlp.w1"), leaf(t, b + "mlp.b1"), leaf(t, b + "mlp.w2"),
                  leaf(t, b + "mlp.b2")};
  return v;
}

Var TvtModel::embed_image(Tape& t, const Tensor& image) {
  if (image.dim(0) != cfg_.image_size ||
      (image.rank() == 3 ? image.dim(2) : 1) != cfg_.channels) {
    throw ShapeError("image " + shape_to_string(image.shape()) + " does not match the model's " +
                     std::to_string(cfg_.image_size) + "-pixel, " +
                     std::to_string(cfg_.channels) + "-channel input");
  }
  Var patches = t.constant(patchify(image, cfg_.patch_size));
  Var embedded = linear(patches, leaf(t, "embed.weight"), leaf(t, "embed.bias"));
  Var tokens = concat_rows({leaf(t, "class_token"), embedded});
  return add(tokens, leaf(t, "pos_embed"));
}

Var TvtModel::block_ln1(Tape& t, Var tokens, Index block) {
  BlockVars v = block_vars(t, block);
  return layer_norm(tokens, v.ln1_gain, v.ln1_bias);
}

Var TvtModel::run_block_given_ln1(Tape& t, Var tokens, Var ln1, Index block, const Tensor* mask,
                                  AttnRecord* record) {
  BlockVars v = block_vars(t, block);
  Var att = multi_head_attention(ln1, v.attn, cfg_.heads, mask, record);
  Var x1 = add(att, tokens);
  Var ln2 = layer_norm(x1, v.ln2_gain, v.ln2_bias);
  Var h = gelu(linear(ln2, v.mlp.w1, v.mlp.b1));
  Var m = linear(h, v.mlp.w2, v.mlp.b2);
  return add(m, x1);
}

Var TvtModel::run_block(Tape& t, Var tokens, Index block, const Tensor* mask,
                        AttnRecord* record) {
  return run_block_given_ln1(t, tokens, block_ln1(t, tokens, block), block, mask, record);
}

Var TvtModel::final_norm(Tape& t, Var tokens) {
  return layer_norm(tokens, leaf(t, "final_ln.gain"), leaf(t, "final_ln.bias"));
}

TvtModel::Forward TvtModel::forward_image(Tape& t, const Tensor& image,
                                          const ForwardOptions& opts) {
  const Index r = cfg_.patch_count();
  const Index last = cfg_.depth - 1;
  Forward out;

  Var x = embed_image(t, image);
  for (Index i = 0; i < last; ++i) x = run_block(t, x, i);

  AttnRecord* rec = opts.record_attention ? &out.attn : nullptr;
  const bool need_probs = opts.want_patch_probs || opts.mode == TamMode::weighted;

  Var ln1 = block_ln1(t, x, last);
  if (need_probs) {
    Var patch_rows = slice_rows(ln1, 1, r);
    Var reversed = grl(patch_rows, opts.lambda, opts.replay,
                       opts.replay_key.empty() ? std::string("patch_features")
                                               : opts.replay_key + ".patch_features");
    out.patch_probs = discriminate(reversed, patch_disc_vars(t));
  }

  Tensor tvals = Tensor::full(Shape{r}, 1.0);
  if (opts.mode == TamMode::weighted) {
    tvals = patch_transferability(out.patch_probs.tensor());
    if (opts.replay != nullptr) {
      const std::string key = opts.replay_key.empty() ? std::string("transferability")
                                                      : opts.replay_key + ".transferability";
      tvals = Tensor(tvals.shape(), opts.replay->store_or_fetch(key, tvals).values());
    }
  }

  if (opts.mode == TamMode::vanilla) {
    x = run_block_given_ln1(t, x, ln1, last, nullptr, rec);
  } else {
    const Tensor mask = class_row_mask(tvals);
    x = run_block_given_ln1(t, x, ln1, last, &mask, rec);
  }
  if (rec != nullptr) rec->transferability = tvals.values();

  Var y = final_norm(t, x);
  out.class_state = row(y, 0);
  out.patch_states = slice_rows(y, 1, r);
  return out;
}

Var TvtModel::classify(Tape& t, Var class_states) {
  return linear(class_states, leaf(t, "head.weight"), leaf(t, "head.bias"));
}

Index TvtModel::predict(const Tensor& image, TamMode mode) {
  Tape t;
  ForwardOptions opts;
  opts.mode = mode;
  Forward f = forward_image(t, image, opts);
  Var logits = classify(t, f.class_state);
  Index best = 0;
  logits.tensor().matrix().row(0).maxCoeff(&best);
  return best;
}

}  // namespace tvt
