#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2x/checkpoint.hpp"
#include "p2x/optim.hpp"

namespace p2x::nn {

enum class FinalActivation { tanh, linear };

// Encoder-decoder translation network: stride-2 downsampling, per-level
// residual blocks, transposed-convolution upsampling.
struct ArchConfig {
  int levels = 3;
  std::vector<int> channels;   // one entry per level, level 0 = full resolution
  std::vector<int> resblocks;  // one entry per level
  int stem_kernel = 7;
  int down_kernel = 3;
  int up_kernel = 4;
  int res_kernel = 3;
  FinalActivation final_activation = FinalActivation::linear;

  void validate() const;
  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a64(canonical()); }
};

enum class GeneratorPresetName { reference, proposed };

GeneratorPresetName preset_from_name(std::string_view name);
std::string preset_name(GeneratorPresetName p);

// reference: all residual blocks at the lowest resolution level.
// proposed: residual blocks moved to the two highest-resolution levels with a
// reduced bottleneck width; parameter counts of the two presets stay within
// 15% of each other.
ArchConfig make_generator_preset(GeneratorPresetName p);

template <typename T>
class GeneratorT {
 public:
  GeneratorT(const ArchConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const int L = config_.levels;
    add_conv("stem", 1, config_.channels[0], config_.stem_kernel, rng);
    add_norm("stem_norm", config_.channels[0]);
    for (int l = 1; l < L; ++l) {
      add_conv("down" + std::to_string(l), config_.channels[l - 1], config_.channels[l],
               config_.down_kernel, rng);
      add_norm("down" + std::to_string(l) + "_norm", config_.channels[l]);
    }
    for (int r = 0; r < config_.resblocks[L - 1]; ++r) {
      add_resblock(L - 1, r, rng);
    }
    for (int l = L - 2; l >= 0; --l) {
      add_deconv("up" + std::to_string(l), config_.channels[l + 1], config_.channels[l],
                 config_.up_kernel, rng);
      add_norm("up" + std::to_string(l) + "_norm", config_.channels[l]);
      for (int r = 0; r < config_.resblocks[l]; ++r) {
        add_resblock(l, r, rng);
      }
    }
    add_conv("head", config_.channels[0], 1, config_.stem_kernel, rng);
  }

  VarT<T> forward(const VarT<T>& input) const {
    const Shape s = input->value.shape;
    const int L = config_.levels;
    const int factor = 1 << (L - 1);
    if (s.c != 1) throw ShapeError("generator: expected a single input channel");
    if (s.h % factor != 0 || s.w % factor != 0) {
      throw ShapeError("generator: input " + s.str() + " not divisible by " +
                       std::to_string(factor));
    }
    auto x = named_conv(input, "stem", 1, (config_.stem_kernel - 1) / 2);
    x = relu(named_norm(x, "stem_norm"));
    for (int l = 1; l < L; ++l) {
      x = named_conv(x, "down" + std::to_string(l), 2, (config_.down_kernel - 1) / 2);
      x = relu(named_norm(x, "down" + std::to_string(l) + "_norm"));
    }
    for (int r = 0; r < config_.resblocks[L - 1]; ++r) {
      x = resblock(x, L - 1, r);
    }
    for (int l = L - 2; l >= 0; --l) {
      x = named_deconv(x, "up" + std::to_string(l), 2, (config_.up_kernel - 2) / 2);
      x = relu(named_norm(x, "up" + std::to_string(l) + "_norm"));
      for (int r = 0; r < config_.resblocks[l]; ++r) {
        x = resblock(x, l, r);
      }
    }
    x = named_conv(x, "head", 1, (config_.stem_kernel - 1) / 2);
    if (config_.final_activation == FinalActivation::tanh) x = tanh_op(x);
    return x;
  }

  ParamStoreT<T>& params() { return params_; }
  const ParamStoreT<T>& params() const { return params_; }
  const ArchConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

 private:
  void add_conv(const std::string& name, int ci, int co, int k, std::mt19937_64& rng) {
    params_.add(name + ".w",
                kaiming_normal<T>({co, ci, k, k}, static_cast<std::size_t>(ci) * k * k, rng));
    params_.add(name + ".b", TensorT<T>({1, co, 1, 1}));
  }
  void add_deconv(const std::string& name, int ci, int co, int k, std::mt19937_64& rng) {
    params_.add(name + ".w",
                kaiming_normal<T>({ci, co, k, k}, static_cast<std::size_t>(ci) * k * k, rng));
    params_.add(name + ".b", TensorT<T>({1, co, 1, 1}));
  }
  void add_norm(const std::string& name, int c) {
    params_.add(name + ".gain", TensorT<T>({1, c, 1, 1}, T(1)));
    params_.add(name + ".shift", TensorT<T>({1, c, 1, 1}));
  }
  void add_resblock(int level, int index, std::mt19937_64& rng) {
    const std::string base = "res" + std::to_string(level) + "_" + std::to_string(index);
    const int c = config_.channels[level];
    add_conv(base + ".c1", c, c, config_.res_kernel, rng);
    add_norm(base + ".n1", c);
    add_conv(base + ".c2", c, c, config_.res_kernel, rng);
    add_norm(base + ".n2", c);
  }

  VarT<T> named_conv(const VarT<T>& x, const std::string& name, int stride, int pad) const {
    return conv2d(x, params_.find(name + ".w"), params_.find(name + ".b"), stride, pad);
  }
  VarT<T> named_deconv(const VarT<T>& x, const std::string& name, int stride, int pad) const {
    return conv_transpose2d(x, params_.find(name + ".w"), params_.find(name + ".b"), stride, pad);
  }
  VarT<T> named_norm(const VarT<T>& x, const std::string& name) const {
    return instance_norm(x, params_.find(name + ".gain"), params_.find(name + ".shift"));
  }
  VarT<T> resblock(const VarT<T>& x, int level, int index) const {
    const std::string base = "res" + std::to_string(level) + "_" + std::to_string(index);
    const int pad = (config_.res_kernel - 1) / 2;
    auto y = named_conv(x, base + ".c1", 1, pad);
    y = relu(named_norm(y, base + ".n1"));
    y = named_conv(y, base + ".c2", 1, pad);
    y = named_norm(y, base + ".n2");
    return add(x, y);
  }

  ArchConfig config_;
  std::uint64_t seed_ = 0;
  ParamStoreT<T> params_;
};

using Generator = GeneratorT<float>;

// PatchGAN-style conditional discriminator: the input is the channel
// concatenation of the condition image and the candidate image; the output is
// a one-channel logit map with one logit per receptive-field patch.
struct DiscConfig {
  int base_channels = 16;
  int n_stride2 = 3;
  int kernel = 4;
  double slope = 0.2;

  void validate() const;
  std::string canonical() const;
};

template <typename T>
class DiscriminatorT {
 public:
  DiscriminatorT(const DiscConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const int k = config_.kernel;
    int ci = 2;
    int co = config_.base_channels;
    for (int l = 0; l < config_.n_stride2; ++l) {
      params_.add("d" + std::to_string(l) + ".w",
                  kaiming_normal<T>({co, ci, k, k}, static_cast<std::size_t>(ci) * k * k, rng));
      params_.add("d" + std::to_string(l) + ".b", TensorT<T>({1, co, 1, 1}));
      if (l > 0) {
        params_.add("d" + std::to_string(l) + ".gain", TensorT<T>({1, co, 1, 1}, T(1)));
        params_.add("d" + std::to_string(l) + ".shift", TensorT<T>({1, co, 1, 1}));
      }
      ci = co;
      co *= 2;
    }
    params_.add("pen.w", kaiming_normal<T>({co, ci, k, k}, static_cast<std::size_t>(ci) * k * k, rng));
    params_.add("pen.b", TensorT<T>({1, co, 1, 1}));
    params_.add("pen.gain", TensorT<T>({1, co, 1, 1}, T(1)));
    params_.add("pen.shift", TensorT<T>({1, co, 1, 1}));
    params_.add("out.w", kaiming_normal<T>({1, co, k, k}, static_cast<std::size_t>(co) * k * k, rng));
    params_.add("out.b", TensorT<T>({1, 1, 1, 1}));
  }

  VarT<T> forward(const VarT<T>& condition, const VarT<T>& candidate) const {
    auto x = concat_channels(condition, candidate);
    const int k = config_.kernel;
    const int pad = (k - 2) / 2 + (k % 2);  // k=4 -> pad 1
    for (int l = 0; l < config_.n_stride2; ++l) {
      const std::string base = "d" + std::to_string(l);
      x = conv2d(x, params_.find(base + ".w"), params_.find(base + ".b"), 2, pad);
      if (l > 0) x = instance_norm(x, params_.find(base + ".gain"), params_.find(base + ".shift"));
      x = leaky_relu(x, config_.slope);
    }
    x = conv2d(x, params_.find("pen.w"), params_.find("pen.b"), 1, pad);
    x = instance_norm(x, params_.find("pen.gain"), params_.find("pen.shift"));
    x = leaky_relu(x, config_.slope);
    return conv2d(x, params_.find("out.w"), params_.find("out.b"), 1, pad);
  }

  // Logit-map edge length for a square input, from the declared stack.
  int logit_map_size(int input_size) const {
    int n = input_size;
    for (int l = 0; l < config_.n_stride2; ++l) n = (n + 2 - config_.kernel) / 2 + 1;
    n = n + 2 - config_.kernel + 1;  // penultimate, stride 1
    n = n + 2 - config_.kernel + 1;  // logit head, stride 1
    if (n < 1) throw ShapeError("discriminator: input too small for the stack");
    return n;
  }

  ParamStoreT<T>& params() { return params_; }
  const ParamStoreT<T>& params() const { return params_; }
  const DiscConfig& config() const { return config_; }

 private:
  DiscConfig config_;
  ParamStoreT<T> params_;
};

using Discriminator = DiscriminatorT<float>;

enum class FeatureWeights { frozen_random, loaded };

// Frozen feature network standing in for a pre-trained perceptual backbone:
// S stages of stride-2 convolution + relu, parameters never updated.
struct FeatureNetConfig {
  int stages = 4;
  std::vector<int> channels{16, 32, 64, 64};
  std::uint64_t seed = 77;
  FeatureWeights weights = FeatureWeights::frozen_random;

  void validate() const;
  std::string canonical() const;
};

template <typename T>
class FeatureNetT {
 public:
  explicit FeatureNetT(const FeatureNetConfig& config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(config.seed);
    int ci = 1;
    for (int s = 0; s < config_.stages; ++s) {
      const int co = config_.channels[s];
      // Frozen: plain constants, excluded from every optimizer store.
      weights_.push_back(constant(
          kaiming_normal<T>({co, ci, 3, 3}, static_cast<std::size_t>(ci) * 9, rng)));
      biases_.push_back(constant(TensorT<T>({1, co, 1, 1})));
      ci = co;
    }
  }

  // Returns all S activation maps; map s has spatial size H / 2^(s+1).
  std::vector<VarT<T>> forward(const VarT<T>& input) const {
    std::vector<VarT<T>> maps;
    auto x = input;
    for (int s = 0; s < config_.stages; ++s) {
      x = relu(conv2d(x, weights_[s], biases_[s], 2, 1));
      maps.push_back(x);
    }
    return maps;
  }

  // Loader for externally supplied weights (PTCKPT1 file with tensors named
  // stage<i>.w / stage<i>.b).
  void load_weights(const std::string& path);

  const FeatureNetConfig& config() const { return config_; }
  const std::vector<VarT<T>>& stage_weights() const { return weights_; }

 private:
  FeatureNetConfig config_;
  std::vector<VarT<T>> weights_;
  std::vector<VarT<T>> biases_;
};

using FeatureNet = FeatureNetT<float>;

template <>
inline void FeatureNetT<float>::load_weights(const std::string& path) {
  const CheckpointData data = load_checkpoint(path);
  for (int s = 0; s < config_.stages; ++s) {
    bool found_w = false, found_b = false;
    for (const auto& [name, tensor] : data.tensors) {
      if (name == "stage" + std::to_string(s) + ".w") {
        if (!(tensor.shape == weights_[s]->value.shape)) {
          throw CheckpointError("feature net weight shape mismatch for " + name);
        }
        weights_[s]->value = tensor;
        found_w = true;
      } else if (name == "stage" + std::to_string(s) + ".b") {
        if (!(tensor.shape == biases_[s]->value.shape)) {
          throw CheckpointError("feature net bias shape mismatch for " + name);
        }
        biases_[s]->value = tensor;
        found_b = true;
      }
    }
    if (!found_w || !found_b) {
      throw CheckpointError("feature net stage " + std::to_string(s) + " missing from " + path);
    }
  }
  config_.weights = FeatureWeights::loaded;
}

template <typename T>
std::size_t count_params(const ParamStoreT<T>& store) {
  return store.count_scalars();
}

}  // namespace p2x::nn
