#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fusegan/rng.hpp"
#include "fusegan/tensor.hpp"

namespace fusegan {

/// One point of the synthetic captioned-shapes distribution. The caption is
/// a deterministic template of the spec and the spec is recoverable from the
/// caption tokens, which makes semantic consistency machine-checkable.
struct ShapeSpec {
  int shape = 0;       // circle, square, triangle
  int color = 0;       // red, green, blue, yellow
  int background = 0;  // black, white, gray
  int position = 0;    // center, left, right

  static constexpr int kNumShapes = 3;
  static constexpr int kNumColors = 4;
  static constexpr int kNumBackgrounds = 3;
  static constexpr int kNumPositions = 3;
  static constexpr int kNumCombos = 108;

  int index() const;
  static ShapeSpec from_index(int idx);
  static std::optional<ShapeSpec> from_caption(const std::vector<std::string>& tokens);

  std::vector<std::string> caption_tokens() const;
  std::string caption() const;
  bool operator==(const ShapeSpec&) const = default;
};

/// All tokens the caption template can produce.
std::vector<std::string> shapes_vocabulary();

/// Deterministic raster of a spec at the given resolution. The jitter inputs
/// (both in [0,1)) perturb size and vertical placement without crossing
/// attribute boundaries.
Tensor render_shape(const ShapeSpec& spec, int64_t resolution, double size_jitter,
                    double offset_jitter);

/// Writes images/, manifest.tsv (id<TAB>path<TAB>caption), and vocab.txt.
/// Exhaustive mode cycles through all 108 combinations in order, so n=108
/// covers each exactly once. Fully seeded; identical seeds give byte-equal
/// directories.
void generate_shapes_dataset(const std::string& dir, int64_t n, uint64_t seed,
                             int64_t resolution, bool exhaustive = false);

enum class DatasetLayout { Shapes, CubLike, CocoLike };
DatasetLayout layout_from_string(const std::string& s);
std::string to_string(DatasetLayout l);

struct DatasetItem {
  std::string id;
  std::string image_path;
  std::vector<std::vector<std::string>> captions;  // >= 1
  std::optional<ShapeSpec> spec;                   // parsed when recognizable
};

/// Loaded dataset: images decoded, resized (shorter side + center crop) and
/// normalized to [-1,1] eagerly. Missing image files skip their item with a
/// warning; a malformed manifest is a hard error.
class Dataset {
 public:
  static Dataset load(const std::string& root, DatasetLayout layout, int64_t resolution);

  size_t size() const { return items_.size(); }
  const DatasetItem& item(size_t i) const { return items_[i]; }
  const Tensor& image(size_t i) const { return images_[i]; }
  int64_t resolution() const { return resolution_; }
  DatasetLayout layout() const { return layout_; }
  int skipped_items() const { return skipped_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  /// Batch of images gathered into [B,3,R,R].
  Tensor gather_images(const std::vector<size_t>& idx) const;

 private:
  std::vector<DatasetItem> items_;
  std::vector<Tensor> images_;
  std::vector<std::string> vocab_;
  int64_t resolution_ = 0;
  DatasetLayout layout_ = DatasetLayout::Shapes;
  int skipped_ = 0;
};

}  // namespace fusegan
