#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "p2x/common.hpp"

namespace p2x::nn {

// (batch, channels, height, width); lower-rank data uses leading 1s.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * static_cast<std::size_t>(h) * w;
  }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

template <typename T>
struct TensorT {
  Shape shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(Shape s) : shape(s), data(s.numel(), T(0)) {}
  TensorT(Shape s, T fill) : shape(s), data(s.numel(), fill) {}

  T& at(int n, int c, int y, int x) {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
  T at(int n, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }

  bool empty() const { return data.empty(); }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

// Bilinear resampling, half-pixel-center convention: source position
// (i + 0.5) * in/out - 0.5, clamped. Not part of the differentiated graph;
// used on constant weight maps.
template <typename T>
TensorT<T> bilinear_resize(const TensorT<T>& in, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ArgumentError("bilinear_resize: target dims must be >= 1");
  TensorT<T> out({in.shape.n, in.shape.c, out_h, out_w});
  const double sy = static_cast<double>(in.shape.h) / out_h;
  const double sx = static_cast<double>(in.shape.w) / out_w;
  for (int n = 0; n < in.shape.n; ++n) {
    for (int c = 0; c < in.shape.c; ++c) {
      for (int oy = 0; oy < out_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        fy = fy < 0.0 ? 0.0 : (fy > in.shape.h - 1 ? in.shape.h - 1 : fy);
        const int y0 = static_cast<int>(fy);
        const int y1 = y0 + 1 < in.shape.h ? y0 + 1 : y0;
        const double ay = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
          double fx = (ox + 0.5) * sx - 0.5;
          fx = fx < 0.0 ? 0.0 : (fx > in.shape.w - 1 ? in.shape.w - 1 : fx);
          const int x0 = static_cast<int>(fx);
          const int x1 = x0 + 1 < in.shape.w ? x0 + 1 : x0;
          const double ax = fx - x0;
          const double v0 = in.at(n, c, y0, x0) * (1.0 - ax) + in.at(n, c, y0, x1) * ax;
          const double v1 = in.at(n, c, y1, x0) * (1.0 - ax) + in.at(n, c, y1, x1) * ax;
          out.at(n, c, oy, ox) = static_cast<T>(v0 * (1.0 - ay) + v1 * ay);
        }
      }
    }
  }
  return out;
}

}  // namespace p2x::nn
