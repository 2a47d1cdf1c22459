#include "tvt/data.hpp"

#include "tvt/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace tvt {

namespace {

constexpr int kGlyphAlphabet = 4;  // bar, cross, hollow square, diagonal

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double background_value(const DomainStyle& style, int x, int y, int size) {
  const double fx = static_cast<double>(x) / static_cast<double>(size - 1);
  const double fy = static_cast<double>(y) / static_cast<double>(size - 1);
  double v = 0.0;
  switch (style.texture) {
    case 0:  // smooth corner-to-corner gradient
      v = 0.15 + 0.25 * 0.5 * (fx + fy);
      break;
    case 1:  // low-frequency weave
      v = 0.30 + 0.12 * std::sin(6.0 * fx * 3.14159265358979323846) *
                     std::cos(4.0 * fy * 3.14159265358979323846);
      break;
    case 2:  // coarse blocks
      v = 0.20 + 0.15 * static_cast<double>(((x / 4) + (y / 4)) % 2);
      break;
    default:
      throw ConfigError("unknown background texture family " + std::to_string(style.texture));
  }
  return v + style.offset;
}

// Class-defining geometry inside a g-by-g box; shared by every domain.
bool glyph_mask(int label, int i, int j, int g) {
  const int t = std::max(2, g / 8);
  const int mid = g / 2 - t / 2;
  const bool horizontal = i >= mid && i < mid + t;
  const bool vertical = j >= mid && j < mid + t;
  switch (label) {
    case 0:  // bar
      return horizontal;
    case 1:  // cross
      return horizontal || vertical;
    case 2:  // hollow square
      return std::min(std::min(i, j), std::min(g - 1 - i, g - 1 - j)) < t;
    case 3:  // diagonal stroke
      return std::abs(i - j) < t;
    default:
      throw ConfigError("no glyph for class " + std::to_string(label));
  }
}

Tensor render_image(int label, int size, const DomainStyle& style, std::mt19937_64& rng) {
  const int g = size / 2;
  std::uniform_int_distribution<int> place(0, size - g);
  const int oy = place(rng);
  const int ox = place(rng);

  Tensor image(Shape{size, size, 1});
  auto& v = image.values();
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double value = background_value(style, x, y, size);
      const int gi = y - oy;
      const int gj = x - ox;
      if (gi >= 0 && gi < g && gj >= 0 && gj < g && glyph_mask(label, gi, gj, g)) {
        value = clamp01(value + style.contrast);
      }
      v(y * size + x) = value;
    }
  }

  std::normal_distribution<double> jitter(0.0, 1.0);
  for (Index i = 0; i < v.size(); ++i) {
    v(i) = clamp01(v(i) + style.noise * jitter(rng));
  }
  return image;
}

LabeledImageSet render_split(const SynthConfig& config, const DomainStyle& style,
                             std::uint64_t domain_id, std::string domain,
                             std::uint64_t split_id, std::string split, int count) {
  LabeledImageSet set;
  set.classes = config.classes;
  set.domain = std::move(domain);
  set.split = std::move(split);
  set.images.reserve(static_cast<size_t>(count));
  set.labels.reserve(static_cast<size_t>(count));
  const std::uint64_t stream = mix_seed(mix_seed(config.seed, domain_id), split_id);
  for (int i = 0; i < count; ++i) {
    const int label = i % config.classes;
    std::mt19937_64 rng(mix_seed(stream, static_cast<std::uint64_t>(i)));
    set.images.push_back(render_image(label, config.image_size, style, rng));
    set.labels.push_back(label);
  }
  return set;
}

// ---- IDX plumbing ----------------------------------------------------------

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("truncated IDX file: " + path);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<unsigned char> read_bytes(std::istream& in, size_t n, const std::string& path) {
  std::vector<unsigned char> bytes(n);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n))) {
    throw IoError("truncated IDX file: " + path);
  }
  return bytes;
}

}  // namespace

void LabeledImageSet::validate() const {
  if (images.size() != labels.size()) {
    throw ValueError("image/label count mismatch: " + std::to_string(images.size()) +
                     " vs " + std::to_string(labels.size()));
  }
  for (int label : labels) {
    if (label < 0 || label >= classes) {
      throw ValueError("label " + std::to_string(label) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
}

void SynthConfig::validate() const {
  if (classes < 2 || classes > kGlyphAlphabet) {
    throw ConfigError("classes must lie in [2, " + std::to_string(kGlyphAlphabet) +
                      "], got " + std::to_string(classes));
  }
  if (image_size < 8 || image_size % 2 != 0) {
    throw ConfigError("image_size must be an even number >= 8");
  }
  if (train_per_domain < 1 || test_per_domain < 1) {
    throw ConfigError("split counts must be positive");
  }
  for (const DomainStyle* style : {&source_style, &target_style}) {
    if (style->texture < 0 || style->texture > 2) {
      throw ConfigError("texture family must lie in [0, 2]");
    }
    if (style->noise < 0.0 || style->contrast < 0.0) {
      throw ConfigError("noise and contrast must be nonnegative");
    }
  }
}

DomainPair synth_domain_pair(const SynthConfig& config) {
  config.validate();
  DomainPair pair;
  pair.source_train = render_split(config, config.source_style, 1, "source", 1, "train",
                                   config.train_per_domain);
  pair.source_test = render_split(config, config.source_style, 1, "source", 2, "test",
                                  config.test_per_domain);
  pair.target_train = render_split(config, config.target_style, 2, "target", 1, "train",
                                   config.train_per_domain);
  pair.target_test = render_split(config, config.target_style, 2, "target", 2, "test",
                                  config.test_per_domain);
  return pair;
}

namespace {

std::vector<Tensor> read_images_file(const std::string& images_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("cannot open IDX image file: " + images_path);
  const std::uint32_t image_magic = read_be32(imgs, images_path);
  if (image_magic != 2051) {
    throw IoError("bad IDX image magic " + std::to_string(image_magic) + " in " +
                  images_path + " (expected 2051)");
  }
  const std::uint32_t count = read_be32(imgs, images_path);
  const std::uint32_t rows = read_be32(imgs, images_path);
  const std::uint32_t cols = read_be32(imgs, images_path);

  std::vector<Tensor> images;
  images.reserve(count);
  const size_t pixels = static_cast<size_t>(rows) * cols;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto bytes = read_bytes(imgs, pixels, images_path);
    Tensor image(Shape{static_cast<Index>(rows), static_cast<Index>(cols), 1});
    for (size_t p = 0; p < pixels; ++p) {
      image.values()(static_cast<Index>(p)) = static_cast<double>(bytes[p]) / 255.0;
    }
    images.push_back(std::move(image));
  }
  return images;
}

}  // namespace

std::vector<Tensor> load_idx_images(const std::string& images_path) {
  return read_images_file(images_path);
}

LabeledImageSet load_idx(const std::string& images_path, const std::string& labels_path) {
  LabeledImageSet set;
  set.domain = "idx";
  set.split = "idx";
  set.images = read_images_file(images_path);
  const std::uint32_t count = static_cast<std::uint32_t>(set.images.size());

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("cannot open IDX label file: " + labels_path);
  const std::uint32_t label_magic = read_be32(labs, labels_path);
  if (label_magic != 2049) {
    throw IoError("bad IDX label magic " + std::to_string(label_magic) + " in " +
                  labels_path + " (expected 2049)");
  }
  const std::uint32_t label_count = read_be32(labs, labels_path);
  if (label_count != count) {
    throw IoError("IDX count mismatch: " + std::to_string(count) + " images in " +
                  images_path + " vs " + std::to_string(label_count) + " labels in " +
                  labels_path);
  }

  set.labels.reserve(count);
  const auto label_bytes = read_bytes(labs, count, labels_path);
  int max_label = -1;
  for (std::uint32_t i = 0; i < count; ++i) {
    set.labels.push_back(static_cast<int>(label_bytes[i]));
    max_label = std::max(max_label, set.labels.back());
  }
  set.classes = max_label + 1;
  set.validate();
  return set;
}

void save_idx(const LabeledImageSet& set, const std::string& images_path,
              const std::string& labels_path) {
  set.validate();
  if (set.images.empty()) throw ValueError("refusing to write an empty IDX set");
  const Shape& shape = set.images.front().shape();
  if (shape.size() != 3 || shape[2] != 1) {
    throw ValueError("IDX export requires single-channel H x W x 1 images, got " +
                     shape_to_string(shape));
  }

  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("cannot write IDX image file: " + images_path);
  write_be32(imgs, 2051);
  write_be32(imgs, static_cast<std::uint32_t>(set.images.size()));
  write_be32(imgs, static_cast<std::uint32_t>(shape[0]));
  write_be32(imgs, static_cast<std::uint32_t>(shape[1]));
  for (const Tensor& image : set.images) {
    if (image.shape() != shape) {
      throw ValueError("IDX export requires uniformly shaped images");
    }
    for (Index p = 0; p < image.size(); ++p) {
      const double v = image.values()(p);
      if (v < 0.0 || v > 1.0) throw ValueError("pixel outside [0, 1] in IDX export");
      const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
      imgs.put(static_cast<char>(byte));
    }
  }
  if (!imgs) throw IoError("failed writing IDX image file: " + images_path);

  std::ofstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("cannot write IDX label file: " + labels_path);
  write_be32(labs, 2049);
  write_be32(labs, static_cast<std::uint32_t>(set.labels.size()));
  for (int label : set.labels) {
    if (label > 255) throw ValueError("label " + std::to_string(label) + " exceeds IDX byte range");
    labs.put(static_cast<char>(static_cast<unsigned char>(label)));
  }
  if (!labs) throw IoError("failed writing IDX label file: " + labels_path);
}

// ---- batch pairing ---------------------------------------------------------

size_t PairedBatches::Cursor::draw() {
  if (pos >= order.size()) {
    ++epoch;
    reshuffle();
  }
  return order[pos++];
}

void PairedBatches::Cursor::reshuffle() {
  order.resize(static_cast<size_t>(set->count()));
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(mix_seed(seed, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  pos = 0;
}

PairedBatches::PairedBatches(const LabeledImageSet& source, const LabeledImageSet& target,
                             int source_batch, int target_batch, std::uint64_t seed)
    : source_batch_(source_batch), target_batch_(target_batch) {
  if (source.count() == 0 || target.count() == 0) {
    throw ValueError("paired batches need nonempty source and target sets");
  }
  if (source_batch < 1 || target_batch < 1) {
    throw ValueError("batch sizes must be positive");
  }
  source_.set = &source;
  source_.seed = mix_seed(seed, 0xA11CE);
  target_.set = &target;
  target_.seed = mix_seed(seed, 0xB0B);
  source_.reshuffle();
  target_.reshuffle();
}

DomainBatch PairedBatches::next() {
  DomainBatch batch;
  batch.source_images.reserve(static_cast<size_t>(source_batch_));
  batch.source_labels.reserve(static_cast<size_t>(source_batch_));
  batch.target_images.reserve(static_cast<size_t>(target_batch_));
  for (int i = 0; i < source_batch_; ++i) {
    const size_t pick = source_.draw();
    batch.source_images.push_back(source_.set->images[pick]);
    batch.source_labels.push_back(source_.set->labels[pick]);
  }
  for (int i = 0; i < target_batch_; ++i) {
    batch.target_images.push_back(target_.set->images[target_.draw()]);
  }
  return batch;
}

}  // namespace tvt
