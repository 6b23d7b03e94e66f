#pragma once

#include <vector>

#include "p2x/model.hpp"

namespace p2x::nn {

// Normalized, thresholded Sobel gradient map of the label image; modulates
// every loss term. Derived from the label only, never from the generator
// output.
struct WeightMap {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;
  double threshold = 0.0;
  double baseline = 0.0;

  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct LossConfig {
  double edge_threshold = 0.4;
  double baseline_weight = 0.1;
  bool edge_weighting = true;
  bool binarize = false;  // keep magnitudes above threshold by default
  std::vector<double> fm_stage_weights;  // empty = all ones
  double gan_weight = 1.0;
};

// Raw Sobel gradient magnitude (replicate-padded borders, no normalization).
std::vector<float> sobel_magnitude(const std::vector<float>& img, int rows, int cols);

// Magnitude normalized by its maximum into [0,1]; an all-zero map stays zero.
std::vector<float> sobel_gradient_map(const std::vector<float>& img, int rows, int cols);

WeightMap make_weight_map(const std::vector<float>& grad_map, int rows, int cols,
                          const LossConfig& config);

WeightMap resize_weight_map(const WeightMap& map, int target_h, int target_w);

// Mean absolute difference over pixels whose weight passes the edge
// threshold; supports the edge-region error reports.
double edge_region_mae(const std::vector<float>& a, const std::vector<float>& b,
                       const WeightMap& map, double min_weight);

template <typename T>
VarT<T> weight_map_constant(const WeightMap& map) {
  TensorT<T> t({1, 1, map.rows, map.cols});
  for (std::size_t i = 0; i < map.data.size(); ++i) t.data[i] = static_cast<T>(map.data[i]);
  return constant(std::move(t));
}

// Per-element loss map reduced to a scalar; when a weight map is given it is
// bilinearly resized to the map's grid and multiplied in before the mean.
// A null map selects the plain unweighted mean (identical code path to an
// edge-weighting-free build).
template <typename T>
VarT<T> weighted_mean(const VarT<T>& elementwise, const WeightMap* map) {
  if (map == nullptr) return mean(elementwise);
  const WeightMap resized =
      resize_weight_map(*map, elementwise->value.shape.h, elementwise->value.shape.w);
  return mean(mul(elementwise, weight_map_constant<T>(resized)));
}

// Both discriminator terms, each patch logit weighted by the resized map:
// mean[E * bce(D(I,L), 1)] + mean[E * bce(D(I,G), 0)]. The candidate G must
// already be detached from the generator graph.
template <typename T>
VarT<T> discriminator_loss(const DiscriminatorT<T>& disc, const VarT<T>& condition,
                           const VarT<T>& label, const VarT<T>& generated,
                           const WeightMap* map) {
  auto real_term = weighted_mean(bce_with_logits(disc.forward(condition, label), T(1)), map);
  auto fake_term = weighted_mean(bce_with_logits(disc.forward(condition, generated), T(0)), map);
  return add(real_term, fake_term);
}

// Non-saturating generator objective: mean[E * bce(D(I,G), 1)].
template <typename T>
VarT<T> generator_gan_loss(const DiscriminatorT<T>& disc, const VarT<T>& condition,
                           const VarT<T>& generated, const WeightMap* map) {
  return weighted_mean(bce_with_logits(disc.forward(condition, generated), T(1)), map);
}

// Sum over stages of the weighted mean absolute feature difference, the map
// resized to each stage's grid.
template <typename T>
VarT<T> feature_matching_loss(const std::vector<VarT<T>>& label_maps,
                              const std::vector<VarT<T>>& gen_maps, const WeightMap* map,
                              const std::vector<double>& stage_weights) {
  if (label_maps.size() != gen_maps.size() || label_maps.empty()) {
    throw ShapeError("feature_matching_loss: stage counts disagree");
  }
  VarT<T> total;
  for (std::size_t s = 0; s < label_maps.size(); ++s) {
    auto term = weighted_mean(abs_op(sub(gen_maps[s], label_maps[s])), map);
    const double w = s < stage_weights.size() ? stage_weights[s] : 1.0;
    if (w != 1.0) term = scale(term, w);
    total = total ? add(total, term) : term;
  }
  return total;
}

template <typename T>
VarT<T> feature_matching_loss(const FeatureNetT<T>& feature_net, const VarT<T>& label,
                              const VarT<T>& generated, const WeightMap* map,
                              const std::vector<double>& stage_weights) {
  return feature_matching_loss(feature_net.forward(label), feature_net.forward(generated), map,
                               stage_weights);
}

// Final objective: the GAN and feature-matching parts, each already
// edge-weighted at its own native resolution.
template <typename T>
VarT<T> total_loss(const VarT<T>& gan_part, const VarT<T>& fm_part) {
  return add(gan_part, fm_part);
}

}  // namespace p2x::nn
