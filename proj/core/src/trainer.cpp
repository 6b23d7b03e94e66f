#include "p2x/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace p2x::nn {

std::string loss_log_csv(const std::vector<LossLogRow>& log, const ArtifactStamp& stamp) {
  std::string s;
  s += "# p2x loss log format_version=" + std::to_string(stamp.format_version) +
       " config_hash=" + stamp.config_hash + " seed=" + std::to_string(stamp.seed) + "\n";
  s += "iteration,epoch,loss_d,loss_g_gan,loss_g_fm,loss_total\n";
  for (const auto& row : log) {
    s += std::to_string(row.iteration) + "," + std::to_string(row.epoch) + "," +
         format_double(row.loss_d) + "," + format_double(row.loss_g_gan) + "," +
         format_double(row.loss_g_fm) + "," + format_double(row.loss_total) + "\n";
  }
  return s;
}

namespace {

struct LoadedSample {
  PairedSample pair;
  WeightMap weight_map;  // valid when edge weighting is on
};

std::vector<float> generated_denormalized(const Generator& generator, const PairedSample& sample,
                                          const NormalizationStats& label_stats) {
  auto out = generator.forward(constant(sample.input));
  std::vector<float> gen = std::move(out->value.data);
  denormalize(gen, label_stats);
  return gen;
}

double masked_mae_over(const Generator& generator, const DatasetManifest& manifest,
                       const std::vector<LoadedSample>& samples) {
  double acc = 0.0;
  for (const auto& s : samples) {
    const auto gen =
        generated_denormalized(generator, s.pair, manifest.label_stats_for(s.pair.subject_id));
    acc += masked_mae_percent(gen, s.pair.label_raw);
  }
  return acc / static_cast<double>(samples.size());
}

double edge_mae_median_over(const Generator& generator, const DatasetManifest& manifest,
                            const std::vector<LoadedSample>& samples,
                            const LossConfig& loss_config, double min_weight) {
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) {
    const auto gen =
        generated_denormalized(generator, s.pair, manifest.label_stats_for(s.pair.subject_id));
    // The edge map depends on the label only; recompute it with weighting
    // forced on so that runs trained without weighting are scored on the same
    // pixel set.
    LossConfig map_config = loss_config;
    map_config.edge_weighting = true;
    const auto grad = sobel_gradient_map(s.pair.label_raw, s.pair.rows, s.pair.cols);
    const WeightMap map = make_weight_map(grad, s.pair.rows, s.pair.cols, map_config);
    values.push_back(edge_region_mae(gen, s.pair.label_raw, map, min_weight));
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

TrainResult train(const DatasetManifest& manifest, const std::string& base_dir,
                  const ArchConfig& arch, const DiscConfig& disc_config,
                  const FeatureNetConfig& feature_config, const LossConfig& loss_config,
                  const TrainerConfig& trainer_config, const std::string& out_dir,
                  const ArtifactStamp& stamp) {
  const auto train_idx = sample_indices(manifest, Split::train);
  if (train_idx.empty()) throw ArgumentError("train: empty train split");
  if (trainer_config.epochs < 1) throw ArgumentError("train: epochs must be >= 1");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir);

  // Batch size is one; all samples and their label edge maps are prepared up
  // front (the weight map depends only on the label, so it is computed once).
  std::vector<LoadedSample> samples;
  samples.reserve(train_idx.size());
  for (std::size_t idx : train_idx) {
    LoadedSample s;
    s.pair = load_sample(manifest, base_dir, idx);
    if (loss_config.edge_weighting) {
      const auto grad = sobel_gradient_map(s.pair.label.data, s.pair.rows, s.pair.cols);
      s.weight_map = make_weight_map(grad, s.pair.rows, s.pair.cols, loss_config);
    }
    samples.push_back(std::move(s));
  }

  Generator generator(arch, trainer_config.seed);
  Discriminator discriminator(disc_config, trainer_config.seed + 1);
  FeatureNet feature_net(feature_config);

  AdamState gen_opt, disc_opt;
  gen_opt.lr = disc_opt.lr = trainer_config.lr;
  gen_opt.beta1 = disc_opt.beta1 = trainer_config.beta1;
  gen_opt.beta2 = disc_opt.beta2 = trainer_config.beta2;
  gen_opt.eps = disc_opt.eps = trainer_config.eps;

  TrainResult result;
  result.train_mae_initial = masked_mae_over(generator, manifest, samples);

  std::mt19937_64 order_rng(trainer_config.seed ^ 0x5851f42d4c957f2dull);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  long iteration = 0;
  bool stop = false;
  for (int epoch = 0; epoch < trainer_config.epochs && !stop; ++epoch) {
    if (trainer_config.shuffle) std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t pick : order) {
      const LoadedSample& s = samples[pick];
      const WeightMap* map = loss_config.edge_weighting ? &s.weight_map : nullptr;
      auto input = constant(s.pair.input);
      auto label = constant(s.pair.label);

      auto gen_out = generator.forward(input);
      auto gen_detached = constant(gen_out->value);

      // Discriminator step; clears gradients accumulated through the
      // discriminator during the previous generator step.
      discriminator.params().zero_grads();
      auto loss_d = discriminator_loss(discriminator, input, label, gen_detached, map);
      backward(loss_d);
      adam_step(discriminator.params(), disc_opt);

      // Generator step against the just-updated discriminator.
      generator.params().zero_grads();
      auto gan_term = generator_gan_loss(discriminator, input, gen_out, map);
      if (loss_config.gan_weight != 1.0) gan_term = scale(gan_term, loss_config.gan_weight);
      auto fm_term =
          feature_matching_loss(feature_net, label, gen_out, map, loss_config.fm_stage_weights);
      auto loss_g = total_loss(gan_term, fm_term);
      backward(loss_g);
      adam_step(generator.params(), gen_opt);

      ++iteration;
      LossLogRow row;
      row.iteration = iteration;
      row.epoch = epoch;
      row.loss_d = loss_d->value.data[0];
      row.loss_g_gan = gan_term->value.data[0];
      row.loss_g_fm = fm_term->value.data[0];
      row.loss_total = loss_g->value.data[0];
      result.log.push_back(row);

      if (!std::isfinite(row.loss_d) || !std::isfinite(row.loss_total)) {
        std::ofstream diag(out_dir + "/diagnostic.txt");
        diag << "non-finite loss at iteration " << iteration << "\n"
             << "loss_d=" << row.loss_d << " loss_g_gan=" << row.loss_g_gan
             << " loss_g_fm=" << row.loss_g_fm << "\n";
        throw ContractError("train: non-finite loss at iteration " + std::to_string(iteration) +
                            " (see " + out_dir + "/diagnostic.txt)");
      }
      if (trainer_config.max_iterations > 0 && iteration >= trainer_config.max_iterations) {
        stop = true;
        break;
      }
    }
    if (trainer_config.checkpoint_every > 0 && (epoch + 1) % trainer_config.checkpoint_every == 0 &&
        !stop) {
      char name[48];
      std::snprintf(name, sizeof(name), "/checkpoint_epoch_%04d.ckpt", epoch + 1);
      save_checkpoint(generator.params(), arch.hash(), stamp, out_dir + name);
    }
  }

  result.iterations = iteration;
  result.train_mae_final = masked_mae_over(generator, manifest, samples);
  result.edge_mae_median_final =
      edge_mae_median_over(generator, manifest, samples, loss_config, loss_config.edge_threshold);

  result.checkpoint_path = out_dir + "/checkpoint.ckpt";
  save_checkpoint(generator.params(), arch.hash(), stamp, result.checkpoint_path);
  {
    std::ofstream log_file(out_dir + "/loss_log.csv");
    if (!log_file) throw IoError("cannot write " + out_dir + "/loss_log.csv");
    log_file << loss_log_csv(result.log, stamp);
  }
  return result;
}

Generator load_generator(const std::string& checkpoint_path, const ArchConfig& arch) {
  const CheckpointData data = load_checkpoint(checkpoint_path);
  if (data.arch_hash != arch.hash()) {
    throw CheckpointError("checkpoint architecture hash does not match the configured arch");
  }
  Generator generator(arch, 0);
  apply_checkpoint(generator.params(), data);
  return generator;
}

double dataset_masked_mae(const Generator& generator, const DatasetManifest& manifest,
                          const std::string& base_dir, Split split) {
  const auto idx = sample_indices(manifest, split);
  if (idx.empty()) throw ArgumentError("dataset_masked_mae: empty split");
  double acc = 0.0;
  for (std::size_t i : idx) {
    const PairedSample sample = load_sample(manifest, base_dir, i);
    const auto gen =
        generated_denormalized(generator, sample, manifest.label_stats_for(sample.subject_id));
    acc += masked_mae_percent(gen, sample.label_raw);
  }
  return acc / static_cast<double>(idx.size());
}

double dataset_edge_mae_median(const Generator& generator, const DatasetManifest& manifest,
                               const std::string& base_dir, Split split,
                               const LossConfig& loss_config, double min_weight) {
  const auto idx = sample_indices(manifest, split);
  if (idx.empty()) throw ArgumentError("dataset_edge_mae_median: empty split");
  std::vector<LoadedSample> samples;
  samples.reserve(idx.size());
  for (std::size_t i : idx) {
    LoadedSample s;
    s.pair = load_sample(manifest, base_dir, i);
    samples.push_back(std::move(s));
  }
  return edge_mae_median_over(generator, manifest, samples, loss_config, min_weight);
}

}  // namespace p2x::nn
