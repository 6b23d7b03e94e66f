#pragma once

#include <string>
#include <vector>

#include "p2x/dataset.hpp"
#include "p2x/metrics.hpp"
#include "p2x/objective.hpp"

namespace p2x::nn {

struct TrainerConfig {
  int epochs = 300;
  long max_iterations = 0;  // 0 = bounded by epochs only
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int checkpoint_every = 50;  // epochs; 0 disables periodic checkpoints
  std::uint64_t seed = 1;
  bool shuffle = true;
};

struct LossLogRow {
  long iteration = 0;
  int epoch = 0;
  double loss_d = 0.0;
  double loss_g_gan = 0.0;
  double loss_g_fm = 0.0;
  double loss_total = 0.0;
};

struct TrainResult {
  std::vector<LossLogRow> log;
  long iterations = 0;
  double train_mae_initial = 0.0;  // masked MAE over training pairs, iteration 0
  double train_mae_final = 0.0;
  double edge_mae_median_final = 0.0;  // median edge-region MAE over training pairs
  std::string checkpoint_path;
};

std::string loss_log_csv(const std::vector<LossLogRow>& log, const ArtifactStamp& stamp);

// Alternating discriminator/generator optimization, one step each per sample,
// batch size one, ADAM for both networks. Deterministic for a fixed
// (seed, manifest) pair. Writes checkpoint(s) and the loss log under out_dir.
TrainResult train(const DatasetManifest& manifest, const std::string& base_dir,
                  const ArchConfig& arch, const DiscConfig& disc_config,
                  const FeatureNetConfig& feature_config, const LossConfig& loss_config,
                  const TrainerConfig& trainer_config, const std::string& out_dir,
                  const ArtifactStamp& stamp);

// Deterministic forward pass through a checkpointed generator; the checkpoint
// architecture hash must match the supplied architecture.
Generator load_generator(const std::string& checkpoint_path, const ArchConfig& arch);

// Masked MAE of the generator against raw labels, averaged over the given
// samples (generator outputs denormalized with the manifest's label stats).
double dataset_masked_mae(const Generator& generator, const DatasetManifest& manifest,
                          const std::string& base_dir, Split split);

// Median per-sample edge-region MAE (pixels whose weight-map value passes
// min_weight) in the denormalized label domain.
double dataset_edge_mae_median(const Generator& generator, const DatasetManifest& manifest,
                               const std::string& base_dir, Split split,
                               const LossConfig& loss_config, double min_weight);

}  // namespace p2x::nn
