#include "p2x/objective.hpp"

#include <algorithm>
#include <cmath>

namespace p2x::nn {

std::vector<float> sobel_magnitude(const std::vector<float>& img, int rows, int cols) {
  if (rows < 3 || cols < 3) throw ArgumentError("sobel: image must be at least 3x3");
  if (img.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("sobel: buffer size does not match rows*cols");
  }
  std::vector<float> mag(img.size());
  auto pix = [&](int r, int c) -> double {
    r = std::clamp(r, 0, rows - 1);
    c = std::clamp(c, 0, cols - 1);
    return img[static_cast<std::size_t>(r) * cols + c];
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double gx = -pix(r - 1, c - 1) + pix(r - 1, c + 1) - 2.0 * pix(r, c - 1) +
                        2.0 * pix(r, c + 1) - pix(r + 1, c - 1) + pix(r + 1, c + 1);
      const double gy = -pix(r - 1, c - 1) - 2.0 * pix(r - 1, c) - pix(r - 1, c + 1) +
                        pix(r + 1, c - 1) + 2.0 * pix(r + 1, c) + pix(r + 1, c + 1);
      mag[static_cast<std::size_t>(r) * cols + c] = static_cast<float>(std::sqrt(gx * gx + gy * gy));
    }
  }
  return mag;
}

std::vector<float> sobel_gradient_map(const std::vector<float>& img, int rows, int cols) {
  std::vector<float> mag = sobel_magnitude(img, rows, cols);
  const float peak = *std::max_element(mag.begin(), mag.end());
  if (peak > 0.0f) {
    for (float& v : mag) v /= peak;
  }
  return mag;
}

WeightMap make_weight_map(const std::vector<float>& grad_map, int rows, int cols,
                          const LossConfig& config) {
  if (grad_map.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("weight map: buffer size does not match rows*cols");
  }
  WeightMap map;
  map.rows = rows;
  map.cols = cols;
  map.threshold = config.edge_threshold;
  map.baseline = config.baseline_weight;
  map.data.resize(grad_map.size());
  if (!config.edge_weighting) {
    std::fill(map.data.begin(), map.data.end(), 1.0f);
    return map;
  }
  const float th = static_cast<float>(config.edge_threshold);
  const float base = static_cast<float>(config.baseline_weight);
  for (std::size_t i = 0; i < grad_map.size(); ++i) {
    if (grad_map[i] >= th) {
      map.data[i] = config.binarize ? 1.0f : grad_map[i];
    } else {
      map.data[i] = base;
    }
  }
  return map;
}

WeightMap resize_weight_map(const WeightMap& map, int target_h, int target_w) {
  if (target_h == map.rows && target_w == map.cols) return map;
  TensorT<float> t({1, 1, map.rows, map.cols});
  t.data = map.data;
  TensorT<float> resized = bilinear_resize(t, target_h, target_w);
  WeightMap out;
  out.rows = target_h;
  out.cols = target_w;
  out.threshold = map.threshold;
  out.baseline = map.baseline;
  out.data = std::move(resized.data);
  return out;
}

double edge_region_mae(const std::vector<float>& a, const std::vector<float>& b,
                       const WeightMap& map, double min_weight) {
  if (a.size() != b.size() || a.size() != map.data.size()) {
    throw ShapeError("edge_region_mae: size mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (map.data[i] >= min_weight) {
      sum += std::abs(static_cast<double>(a[i]) - b[i]);
      ++count;
    }
  }
  if (count == 0) throw ContractError("edge_region_mae: no pixels pass the weight threshold");
  return sum / static_cast<double>(count);
}

}  // namespace p2x::nn
