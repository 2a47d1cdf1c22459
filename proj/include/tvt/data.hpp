#pragma once

#include "tvt/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tvt {

/// One split of one domain: H×W×C images in [0,1] plus integer labels.
/// Labels are stored for every split; whether a consumer may look at them
/// is that consumer's contract (the training stream never exposes target
/// labels, evaluation on a held-out target split does).
struct LabeledImageSet {
  std::vector<Tensor> images;
  std::vector<int> labels;
  int classes = 0;
  std::string domain;
  std::string split;

  Index count() const { return static_cast<Index>(images.size()); }
  void validate() const;
};

/// Per-domain nuisance knobs. The class-defining glyph geometry never
/// depends on these; they shape only background, brightness and noise.
struct DomainStyle {
  int texture = 0;          // background family: 0 gradient, 1 weave, 2 blocks
  double noise = 0.02;      // additive gaussian sigma
  double offset = 0.0;      // brightness shift
  double contrast = 0.9;    // glyph brightness above the local background
};

struct SynthConfig {
  int classes = 4;
  int image_size = 32;
  int train_per_domain = 2000;
  int test_per_domain = 500;
  std::uint64_t seed = 5;
  // The default pair keeps the same background family but brightens and
  // flattens the target: a shift strong enough that source-only transfer
  // loses a double-digit slice of accuracy, yet mild enough that adaptation
  // can close most of the gap.
  DomainStyle source_style{0, 0.02, 0.00, 0.90};
  DomainStyle target_style{0, 0.05, 0.06, 0.55};

  void validate() const;
};

struct DomainPair {
  LabeledImageSet source_train;
  LabeledImageSet source_test;
  LabeledImageSet target_train;
  LabeledImageSet target_test;
};

/// Renders the four-way split deterministically from the config seed. The
/// glyph alphabet (bar, cross, hollow square, diagonal) is shared across
/// domains; only DomainStyle nuisances differ.
DomainPair synth_domain_pair(const SynthConfig& config);

/// Big-endian IDX files: magic 2051 (count×rows×cols u8 images, scaled to
/// [0,1]) and 2049 (count u8 labels).
LabeledImageSet load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const LabeledImageSet& set, const std::string& images_path,
              const std::string& labels_path);

/// Just the image file, for tooling that needs no labels (attention dumps).
std::vector<Tensor> load_idx_images(const std::string& images_path);

/// One optimization step's worth of data. Target labels are deliberately
/// not part of this structure.
struct DomainBatch {
  std::vector<Tensor> source_images;
  std::vector<int> source_labels;
  std::vector<Tensor> target_images;
};

/// Endless stream of paired mini-batches. Each domain cycles through its
/// examples in per-epoch shuffled order (epoch-indexed seed), so one source
/// epoch touches every source example exactly once.
class PairedBatches {
 public:
  PairedBatches(const LabeledImageSet& source, const LabeledImageSet& target,
                int source_batch, int target_batch, std::uint64_t seed);

  DomainBatch next();

 private:
  struct Cursor {
    const LabeledImageSet* set = nullptr;
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    std::vector<size_t> order;
    size_t pos = 0;

    size_t draw();
    void reshuffle();
  };

  Cursor source_;
  Cursor target_;
  int source_batch_;
  int target_batch_;
};

}  // namespace tvt
