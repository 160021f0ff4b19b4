#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cova/features.hpp"
#include "cova/geometry.hpp"

namespace cova {

struct BlobNetArch {
  int temporal_depth = 2;
  int enc1_channels = 8;
  int enc2_channels = 16;

  friend bool operator==(const BlobNetArch&, const BlobNetArch&) = default;
};

/// Lightweight encoder-decoder segmentation network over macroblock features.
///
///   input  H x W x 3T
///   enc1   conv3x3 -> leaky-relu (skip 1) -> avgpool2
///   enc2   conv3x3 -> leaky-relu (skip 2) -> avgpool2
///   dec1   upsample2 ++ skip 2 -> conv3x3 -> leaky-relu
///   dec2   upsample2 ++ skip 1 -> conv3x3 -> leaky-relu
///   head   conv1x1 -> one logit per macroblock
///
/// Pooling keeps partial windows and upsampling crops back to the skip shape,
/// so any grid of at least 1x1 maps onto an output of identical shape. All
/// parameters, including the 12-entry combo embedding, live in one flat vector.
class BlobNetModel {
 public:
  struct Layer {
    std::string name;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };

  /// All-zero parameters.
  explicit BlobNetModel(BlobNetArch arch = {});
  /// Scaled-uniform (He) initialization; the embedding starts at zero.
  static BlobNetModel random(BlobNetArch arch, std::uint64_t seed);

  const BlobNetArch& arch() const noexcept { return arch_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  Embedding embedding() const;

  friend bool operator==(const BlobNetModel& a, const BlobNetModel& b) {
    return a.arch_ == b.arch_ && a.params_ == b.params_;
  }

 private:
  BlobNetArch arch_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

inline constexpr double kLeakySlope = 0.1;

/// Per-macroblock logits. Channel 0 of the input is re-derived from the
/// model's embedding through `x.combos`.
ProbabilityMap blobnet_logits(const BlobNetModel& model, const FeatureTensor& x);

/// Sigmoid of the logits; values in (0, 1).
ProbabilityMap blobnet_forward(const BlobNetModel& model, const FeatureTensor& x);

/// Mean binary cross-entropy over cells. When `grad` is non-empty it must
/// have parameter_count() entries; grad_scale * d(loss)/d(param) is added.
double blobnet_loss(const BlobNetModel& model, const FeatureTensor& x, const BinaryGrid& target,
                    std::span<double> grad = {}, double grad_scale = 1.0, double positive_weight = 1.0);

/// cell = 1 iff prob > theta (strict).
BinaryGrid threshold_mask(const ProbabilityMap& probs, double theta);

/// Binary checkpoint: "COVABNL1", u64 header length, JSON header, then the
/// parameters as little-endian IEEE-754 doubles.
void save_model(const BlobNetModel& model, const std::filesystem::path& path);
BlobNetModel load_model(const std::filesystem::path& path);

}  // namespace cova
