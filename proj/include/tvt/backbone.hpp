#pragma once

#include "tvt/heads.hpp"
#include "tvt/tam.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace tvt {

struct ModelConfig {
  Index image_size = 32;
  Index channels = 1;
  Index patch_size = 8;
  Index embed_dim = 64;
  Index heads = 4;
  Index depth = 4;  // standard blocks 0..depth-2, transferability block last
  Index classes = 4;
  Index mlp_ratio = 4;

  void validate() const;
  Index patches_per_side() const { return image_size / patch_size; }
  Index patch_count() const { return patches_per_side() * patches_per_side(); }
  Index patch_dim() const { return patch_size * patch_size * channels; }
  Index head_dim() const { return embed_dim / heads; }
  Index token_count() const { return patch_count() + 1; }
};

/// Splits a square H×W(×C) image into non-overlapping P×P patches in
/// raster order, each flattened row-major with channels last. Lossless:
/// unpatchify inverts it exactly.
Tensor patchify(const Tensor& image, Index patch_size);
Tensor unpatchify(const Tensor& patches, Index image_size, Index channels, Index patch_size);

/// Normal(0, stddev) samples redrawn until they land within 2 stddev.
Tensor truncated_normal(Shape shape, double stddev, std::mt19937_64& rng);

/// How the final block treats the class-token attention row.
enum class TamMode {
  weighted,     // reweight by discriminator-derived transferabilities
  forced_ones,  // apply the weighting path with all weights = 1
  vanilla       // plain attention, no weighting path at all
};

/// Class-row attention of the final block, head-averaged. Index 0 of
/// raw/effective is the class token's self-weight, which the weighting
/// never touches.
struct AttnRecord {
  Eigen::ArrayXd raw;
  Eigen::ArrayXd effective;
  Eigen::ArrayXd transferability;  // length R; ones outside weighted mode
};

struct AttentionVars {
  Var wq, bq;
  Var wk, bk;
  Var wv, bv;
  Var wo, bo;
};

struct MlpVars {
  Var w1, b1;
  Var w2, b2;
};

struct BlockVars {
  Var ln1_gain, ln1_bias;
  AttentionVars attn;
  Var ln2_gain, ln2_bias;
  MlpVars mlp;
};

/// Multi-head self-attention over (R+1)×d token states: per head,
/// softmax(q kᵀ/√d_head)·v on column slices, heads concatenated and mapped
/// by the output projection. `mask`, when given, is Hadamard-applied to
/// every head's softmax weights; `record` receives the head-averaged class
/// row before and after masking.
Var multi_head_attention(Var tokens, const AttentionVars& p, Index heads,
                         const Tensor* mask = nullptr, AttnRecord* record = nullptr);

/// The full model: patch embedding, class token, position embeddings,
/// depth-1 standard pre-norm blocks, a transferability-adapted final block,
/// final layer norm, a K-way affine head, and the two domain
/// discriminators. All parameters live in one store in creation order.
class TvtModel {
 public:
  TvtModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  struct ForwardOptions {
    TamMode mode = TamMode::weighted;
    bool want_patch_probs = false;  // force the patch-discriminator path
    double lambda = 0.0;            // reversal strength on the patch path
    GradCheckReplay* replay = nullptr;
    std::string replay_key;  // unique prefix per image within a batch
    bool record_attention = false;
  };

  struct Forward {
    Var class_state;   // 1×d after the final layer norm
    Var patch_probs;   // R×1 discriminator outputs; unbound if path skipped
    Var patch_states;  // R×d after the final layer norm
    AttnRecord attn;   // filled when record_attention
  };

  Forward forward_image(Tape& t, const Tensor& image, const ForwardOptions& opts);
  Forward forward_image(Tape& t, const Tensor& image) {
    return forward_image(t, image, ForwardOptions{});
  }

  /// Affine head on class states (n×d → n×K logits).
  Var classify(Tape& t, Var class_states);

  /// Forward + head + argmax for one image; no gradient bookkeeping kept.
  Index predict(const Tensor& image, TamMode mode = TamMode::weighted);

  // Composable pieces, exposed for tests and tooling.
  Var embed_image(Tape& t, const Tensor& image);
  Var block_ln1(Tape& t, Var tokens, Index block);
  Var run_block_given_ln1(Tape& t, Var tokens, Var ln1, Index block,
                          const Tensor* mask = nullptr, AttnRecord* record = nullptr);
  Var run_block(Tape& t, Var tokens, Index block, const Tensor* mask = nullptr,
                AttnRecord* record = nullptr);
  Var final_norm(Tape& t, Var tokens);
  BlockVars block_vars(Tape& t, Index block);
  DiscriminatorVars global_disc_vars(Tape& t);
  DiscriminatorVars patch_disc_vars(Tape& t);

 private:
  Var leaf(Tape& t, const std::string& name);
  DiscriminatorVars disc_vars(Tape& t, const std::string& prefix);

  ModelConfig cfg_;
  ParameterStore params_;
};

}  // namespace tvt
