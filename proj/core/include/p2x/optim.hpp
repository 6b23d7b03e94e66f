#pragma once

#include <cmath>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "p2x/autograd.hpp"

namespace p2x::nn {

// Ordered named trainable parameters; iteration order is insertion order.
template <typename T>
class ParamStoreT {
 public:
  VarT<T> add(const std::string& name, TensorT<T> init) {
    if (index_.count(name)) throw ArgumentError("param store: duplicate name '" + name + "'");
    auto var = parameter(std::move(init));
    index_[name] = items_.size();
    items_.emplace_back(name, var);
    return var;
  }

  VarT<T> find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].second;
  }

  const std::vector<std::pair<std::string, VarT<T>>>& items() const { return items_; }

  std::size_t count_scalars() const {
    std::size_t total = 0;
    for (const auto& [name, var] : items_) total += var->value.data.size();
    return total;
  }

  void zero_grads() {
    for (auto& [name, var] : items_) var->zero_grad();
  }

 private:
  std::vector<std::pair<std::string, VarT<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ParamStore = ParamStoreT<float>;

template <typename T>
struct AdamStateT {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  void validate() const {
    if (!(lr > 0.0)) throw ArgumentError("adam: lr must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw ArgumentError("adam: betas must lie in [0, 1)");
    }
  }
};

using AdamState = AdamStateT<float>;

// Bias-corrected update; increments the step counter and zeroes grads.
template <typename T>
void adam_step(ParamStoreT<T>& params, AdamStateT<T>& state) {
  state.validate();
  const auto& items = params.items();
  if (state.m.empty()) {
    state.m.resize(items.size());
    state.v.resize(items.size());
    for (std::size_t p = 0; p < items.size(); ++p) {
      state.m[p].assign(items[p].second->value.data.size(), T(0));
      state.v[p].assign(items[p].second->value.data.size(), T(0));
    }
  }
  if (state.m.size() != items.size()) throw ContractError("adam: state/param count mismatch");

  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t p = 0; p < items.size(); ++p) {
    auto& var = *items[p].second;
    if (var.grad.empty()) {
      throw ContractError("adam: parameter '" + items[p].first + "' has no gradient");
    }
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < var.value.data.size(); ++i) {
      const double g = var.grad.data[i];
      m[i] = static_cast<T>(state.beta1 * m[i] + (1.0 - state.beta1) * g);
      v[i] = static_cast<T>(state.beta2 * v[i] + (1.0 - state.beta2) * g * g);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      var.value.data[i] =
          static_cast<T>(var.value.data[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
  params.zero_grads();
}

// Kaiming fan-in scaled normal init; draws doubles so float and double builds
// see the same sequence.
template <typename T>
TensorT<T> kaiming_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  TensorT<T> t(shape);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

// ---------------------------------------------------------------------------
// Finite-difference verification (64-bit, central differences).

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// fn builds a scalar loss from the given leaves; called repeatedly while the
// harness perturbs leaf values in place.
template <typename Fn>
GradCheckReport grad_check(Fn fn, const std::vector<Shape>& input_shapes, double tolerance,
                           std::uint64_t seed, double h = 1e-6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<VarT<double>> inputs;
  for (const Shape& s : input_shapes) {
    TensorT<double> t(s);
    for (auto& v : t.data) v = dist(rng);
    inputs.push_back(parameter(std::move(t)));
  }

  auto loss = fn(inputs);
  backward(loss);
  std::vector<TensorT<double>> analytic;
  for (auto& in : inputs) {
    in->ensure_grad();
    analytic.push_back(in->grad);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    for (std::size_t i = 0; i < inputs[p]->value.data.size(); ++i) {
      const double saved = inputs[p]->value.data[i];
      inputs[p]->value.data[i] = saved + h;
      const double lp = fn(inputs)->value.data[0];
      inputs[p]->value.data[i] = saved - h;
      const double lm = fn(inputs)->value.data[0];
      inputs[p]->value.data[i] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = analytic[p].data[i];
      const double scale = std::max({std::abs(an), std::abs(fd), 1.0});
      report.max_rel_error = std::max(report.max_rel_error, std::abs(an - fd) / scale);
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace p2x::nn
