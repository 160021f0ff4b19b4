#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cova/blobnet.hpp"
#include "cova/mog.hpp"
#include "cova/scene.hpp"

namespace cova {

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 30;
  int batch_size = 8;
  int temporal_depth = 2;
  /// Binarization threshold applied to BlobNet output.
  double threshold = 0.5;
  /// Fraction of the video's frames used as training samples.
  double train_fraction = 0.03;
  /// Training frames are gathered in evenly spaced segments of this length...
  int segment_length = 10;
  /// ...each preceded by this many MoG warm-up frames that yield no samples.
  int burn_in = 100;
  double positive_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingSample {
  std::int64_t frame_index = 0;
  FeatureTensor input;
  BinaryGrid target;
};

/// Auto-labels a fraction of the video: renders frames, runs MoG background
/// subtraction and downsamples the masks to macroblock targets.
std::vector<TrainingSample> collect_training_samples(const Scene& scene, const MetadataStream& stream,
                                                     const TrainConfig& cfg, const MogParams& mog = {});

struct TrainResult {
  BlobNetModel model;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;
};

/// Mean loss of `model` over `samples`.
double dataset_loss(const BlobNetModel& model, std::span<const TrainingSample> samples, double positive_weight = 1.0);

/// Mini-batch Adam on mean binary cross-entropy; the embedding is trained
/// jointly. Deterministic for a fixed cfg.seed. Throws DivergenceError when
/// the loss becomes non-finite.
TrainResult blobnet_train(BlobNetModel model, std::span<const TrainingSample> samples, const TrainConfig& cfg);

}  // namespace cova
