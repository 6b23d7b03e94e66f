#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "p2x/tensor.hpp"

namespace p2x::nn {

// Reverse-mode graph node. requires_grad is propagated from leaves: it marks
// nodes whose gradient is needed, so backward skips subtrees with none.
template <typename T>
struct Node {
  TensorT<T> value;
  TensorT<T> grad;  // allocated lazily; accumulates until zeroed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;

  void ensure_grad() {
    if (grad.empty()) grad = TensorT<T>(value.shape);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.data.begin(), grad.data.end(), T(0));
  }
};

template <typename T>
using VarT = std::shared_ptr<Node<T>>;

using Var = VarT<float>;

template <typename T>
VarT<T> constant(TensorT<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return node;
}

template <typename T>
VarT<T> parameter(TensorT<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

namespace detail {

template <typename T>
VarT<T> make_op(TensorT<T> value, std::vector<VarT<T>> parents,
                std::function<void(Node<T>&)> backprop) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->parents = std::move(parents);
  for (const auto& p : node->parents) {
    if (p && p->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) node->backprop = std::move(backprop);
  return node;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution kernels (cross-correlation). Shared by conv2d forward/backward
// and transposed convolution; outputs are written gather-style so that each
// element is produced by exactly one thread, keeping results bitwise
// deterministic under OpenMP.

template <typename T>
TensorT<T> conv_fwd(const TensorT<T>& x, const TensorT<T>& w, int stride, int pad) {
  const int N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
  const int Co = w.shape.n, kh = w.shape.h, kw = w.shape.w;
  if (w.shape.c != Ci) throw ShapeError("conv: weight channels " + w.shape.str() +
                                        " incompatible with input " + x.shape.str());
  if (stride < 1) throw ArgumentError("conv: stride must be >= 1");
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (Ho < 1 || Wo < 1) throw ShapeError("conv: output would be empty for input " + x.shape.str());
  TensorT<T> y({N, Co, Ho, Wo});
  for (int n = 0; n < N; ++n) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < Co; ++co) {
      for (int oy = 0; oy < Ho; ++oy) {
        T* yrow = &y.data[((static_cast<std::size_t>(n) * Co + co) * Ho + oy) * Wo];
        for (int ci = 0; ci < Ci; ++ci) {
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            const T* xrow = &x.data[((static_cast<std::size_t>(n) * Ci + ci) * H + iy) * W];
            const T* wrow = &w.data[((static_cast<std::size_t>(co) * Ci + ci) * kh + ky) * kw];
            for (int ox = 0; ox < Wo; ++ox) {
              const int base = ox * stride - pad;
              const int k0 = base < 0 ? -base : 0;
              const int k1 = base + kw > W ? W - base : kw;
              T acc = 0;
              for (int kx = k0; kx < k1; ++kx) acc += xrow[base + kx] * wrow[kx];
              yrow[ox] += acc;
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
TensorT<T> conv_bwd_data(const TensorT<T>& dy, const TensorT<T>& w, int stride, int pad,
                         int H, int W) {
  const int N = dy.shape.n, Co = dy.shape.c, Ho = dy.shape.h, Wo = dy.shape.w;
  const int Ci = w.shape.c, kh = w.shape.h, kw = w.shape.w;
  if (w.shape.n != Co) throw ShapeError("conv_bwd_data: weight/output channel mismatch");
  TensorT<T> dx({N, Ci, H, W});
  for (int n = 0; n < N; ++n) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int ci = 0; ci < Ci; ++ci) {
      for (int iy = 0; iy < H; ++iy) {
        T* drow = &dx.data[((static_cast<std::size_t>(n) * Ci + ci) * H + iy) * W];
        for (int co = 0; co < Co; ++co) {
          for (int ky = 0; ky < kh; ++ky) {
            const int oy_num = iy + pad - ky;
            if (oy_num < 0 || oy_num % stride != 0) continue;
            const int oy = oy_num / stride;
            if (oy >= Ho) continue;
            const T* dyrow = &dy.data[((static_cast<std::size_t>(n) * Co + co) * Ho + oy) * Wo];
            const T* wrow = &w.data[((static_cast<std::size_t>(co) * Ci + ci) * kh + ky) * kw];
            for (int ix = 0; ix < W; ++ix) {
              T acc = 0;
              for (int kx = 0; kx < kw; ++kx) {
                const int ox_num = ix + pad - kx;
                if (ox_num < 0 || ox_num % stride != 0) continue;
                const int ox = ox_num / stride;
                if (ox < Wo) acc += dyrow[ox] * wrow[kx];
              }
              drow[ix] += acc;
            }
          }
        }
      }
    }
  }
  return dx;
}

template <typename T>
TensorT<T> conv_bwd_weight(const TensorT<T>& x, const TensorT<T>& dy, int stride, int pad,
                           int kh, int kw) {
  const int N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
  const int Co = dy.shape.c, Ho = dy.shape.h, Wo = dy.shape.w;
  TensorT<T> dw({Co, Ci, kh, kw});
#pragma omp parallel for collapse(2) schedule(static)
  for (int co = 0; co < Co; ++co) {
    for (int ci = 0; ci < Ci; ++ci) {
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          T acc = 0;
          for (int n = 0; n < N; ++n) {
            for (int oy = 0; oy < Ho; ++oy) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= H) continue;
              const T* xrow = &x.data[((static_cast<std::size_t>(n) * Ci + ci) * H + iy) * W];
              const T* dyrow = &dy.data[((static_cast<std::size_t>(n) * Co + co) * Ho + oy) * Wo];
              // ox range with ix = ox*stride - pad + kx inside [0, W)
              int ox0 = 0;
              if (pad - kx > 0) ox0 = (pad - kx + stride - 1) / stride;
              int ox1 = (W - 1 + pad - kx) / stride + 1;
              if (ox1 > Wo) ox1 = Wo;
              for (int ox = ox0; ox < ox1; ++ox) {
                acc += xrow[ox * stride - pad + kx] * dyrow[ox];
              }
            }
          }
          dw.at(co, ci, ky, kx) = acc;
        }
      }
    }
  }
  return dw;
}

// ---------------------------------------------------------------------------
// Graph operations

namespace detail {

template <typename T>
void accumulate(const VarT<T>& dst, const TensorT<T>& contribution) {
  if (!dst->requires_grad) return;
  dst->ensure_grad();
  T* g = dst->grad.data.data();
  const T* c = contribution.data.data();
  const std::size_t n = contribution.data.size();
  for (std::size_t i = 0; i < n; ++i) g[i] += c[i];
}

inline void check_bias_shape(const Shape& b, int channels, const char* op) {
  if (b.n != 1 || b.c != channels || b.h != 1 || b.w != 1) {
    throw ShapeError(std::string(op) + ": bias must have shape (1," +
                     std::to_string(channels) + ",1,1)");
  }
}

}  // namespace detail

template <typename T>
VarT<T> conv2d(const VarT<T>& x, const VarT<T>& w, const VarT<T>& b, int stride, int pad) {
  TensorT<T> y = conv_fwd(x->value, w->value, stride, pad);
  const int Co = w->value.shape.n;
  if (b) {
    detail::check_bias_shape(b->value.shape, Co, "conv2d");
    const int per = y.shape.h * y.shape.w;
    for (int n = 0; n < y.shape.n; ++n) {
      for (int co = 0; co < Co; ++co) {
        T* p = &y.data[(static_cast<std::size_t>(n) * Co + co) * per];
        const T bias = b->value.data[co];
        for (int i = 0; i < per; ++i) p[i] += bias;
      }
    }
  }
  std::vector<VarT<T>> parents = b ? std::vector<VarT<T>>{x, w, b} : std::vector<VarT<T>>{x, w};
  return detail::make_op<T>(std::move(y), std::move(parents), [x, w, b, stride, pad](Node<T>& self) {
    const TensorT<T>& dy = self.grad;
    if (x->requires_grad) {
      detail::accumulate(x, conv_bwd_data(dy, w->value, stride, pad, x->value.shape.h,
                                          x->value.shape.w));
    }
    if (w->requires_grad) {
      detail::accumulate(w, conv_bwd_weight(x->value, dy, stride, pad, w->value.shape.h,
                                            w->value.shape.w));
    }
    if (b && b->requires_grad) {
      TensorT<T> db(b->value.shape);
      const int Co = dy.shape.c, per = dy.shape.h * dy.shape.w;
      for (int n = 0; n < dy.shape.n; ++n) {
        for (int co = 0; co < Co; ++co) {
          const T* p = &dy.data[(static_cast<std::size_t>(n) * Co + co) * per];
          T acc = 0;
          for (int i = 0; i < per; ++i) acc += p[i];
          db.data[co] += acc;
        }
      }
      detail::accumulate(b, db);
    }
  });
}

// Adjoint of conv2d's forward map. Weight layout (C_in, C_out, kh, kw); the
// output spatial size is (H-1)*stride - 2*pad + k.
template <typename T>
VarT<T> conv_transpose2d(const VarT<T>& x, const VarT<T>& w, const VarT<T>& b, int stride,
                         int pad) {
  const int Ci = x->value.shape.c;
  if (w->value.shape.n != Ci) {
    throw ShapeError("conv_transpose2d: weight " + w->value.shape.str() +
                     " incompatible with input " + x->value.shape.str());
  }
  const int Co = w->value.shape.c;
  const int Ho = (x->value.shape.h - 1) * stride - 2 * pad + w->value.shape.h;
  const int Wo = (x->value.shape.w - 1) * stride - 2 * pad + w->value.shape.w;
  if (Ho < 1 || Wo < 1) throw ShapeError("conv_transpose2d: output would be empty");
  TensorT<T> y = conv_bwd_data(x->value, w->value, stride, pad, Ho, Wo);
  if (b) {
    detail::check_bias_shape(b->value.shape, Co, "conv_transpose2d");
    const int per = Ho * Wo;
    for (int n = 0; n < y.shape.n; ++n) {
      for (int co = 0; co < Co; ++co) {
        T* p = &y.data[(static_cast<std::size_t>(n) * Co + co) * per];
        const T bias = b->value.data[co];
        for (int i = 0; i < per; ++i) p[i] += bias;
      }
    }
  }
  std::vector<VarT<T>> parents = b ? std::vector<VarT<T>>{x, w, b} : std::vector<VarT<T>>{x, w};
  return detail::make_op<T>(std::move(y), std::move(parents), [x, w, b, stride, pad](Node<T>& self) {
    const TensorT<T>& dy = self.grad;
    if (x->requires_grad) detail::accumulate(x, conv_fwd(dy, w->value, stride, pad));
    if (w->requires_grad) {
      detail::accumulate(w, conv_bwd_weight(dy, x->value, stride, pad, w->value.shape.h,
                                            w->value.shape.w));
    }
    if (b && b->requires_grad) {
      TensorT<T> db(b->value.shape);
      const int Co = dy.shape.c, per = dy.shape.h * dy.shape.w;
      for (int n = 0; n < dy.shape.n; ++n) {
        for (int co = 0; co < Co; ++co) {
          const T* p = &dy.data[(static_cast<std::size_t>(n) * Co + co) * per];
          T acc = 0;
          for (int i = 0; i < per; ++i) acc += p[i];
          db.data[co] += acc;
        }
      }
      detail::accumulate(b, db);
    }
  });
}

inline constexpr double kInstanceNormEps = 1e-5;

// Per-sample, per-channel standardization followed by a learned affine map.
template <typename T>
VarT<T> instance_norm(const VarT<T>& x, const VarT<T>& gain, const VarT<T>& shift) {
  const Shape s = x->value.shape;
  if (s.h * s.w <= 1) throw ShapeError("instance_norm: spatial size must exceed 1");
  detail::check_bias_shape(gain->value.shape, s.c, "instance_norm");
  detail::check_bias_shape(shift->value.shape, s.c, "instance_norm");

  const int per = s.h * s.w;
  TensorT<T> y(s);
  auto xhat = std::make_shared<TensorT<T>>(s);
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(s.n) * s.c);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* xp = &x->value.data[(static_cast<std::size_t>(n) * s.c + c) * per];
      double mu = 0.0;
      for (int i = 0; i < per; ++i) mu += xp[i];
      mu /= per;
      double var = 0.0;
      for (int i = 0; i < per; ++i) {
        const double d = xp[i] - mu;
        var += d * d;
      }
      var /= per;
      const double inv = 1.0 / std::sqrt(var + kInstanceNormEps);
      (*inv_std)[static_cast<std::size_t>(n) * s.c + c] = static_cast<T>(inv);
      T* xh = &xhat->data[(static_cast<std::size_t>(n) * s.c + c) * per];
      T* yp = &y.data[(static_cast<std::size_t>(n) * s.c + c) * per];
      const T g = gain->value.data[c], sh = shift->value.data[c];
      for (int i = 0; i < per; ++i) {
        xh[i] = static_cast<T>((xp[i] - mu) * inv);
        yp[i] = xh[i] * g + sh;
      }
    }
  }
  return detail::make_op<T>(std::move(y), {x, gain, shift},
                            [x, gain, shift, xhat, inv_std, per](Node<T>& self) {
    const Shape s = x->value.shape;
    const TensorT<T>& dy = self.grad;
    TensorT<T> dgain(gain->value.shape), dshift(shift->value.shape), dx(s);
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * per;
        const T* dyp = &dy.data[base];
        const T* xh = &xhat->data[base];
        double sum_dy = 0.0, sum_dyxh = 0.0;
        for (int i = 0; i < per; ++i) {
          sum_dy += dyp[i];
          sum_dyxh += dyp[i] * xh[i];
        }
        dshift.data[c] += static_cast<T>(sum_dy);
        dgain.data[c] += static_cast<T>(sum_dyxh);
        const double g = gain->value.data[c];
        const double inv = (*inv_std)[static_cast<std::size_t>(n) * s.c + c];
        const double mean_dy = sum_dy / per;
        const double mean_dyxh = sum_dyxh / per;
        T* dxp = &dx.data[base];
        for (int i = 0; i < per; ++i) {
          dxp[i] = static_cast<T>(g * inv * (dyp[i] - mean_dy - xh[i] * mean_dyxh));
        }
      }
    }
    detail::accumulate(x, dx);
    detail::accumulate(gain, dgain);
    detail::accumulate(shift, dshift);
  });
}

template <typename T>
VarT<T> relu(const VarT<T>& x) {
  TensorT<T> y(x->value.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = std::max(T(0), x->value.data[i]);
  return detail::make_op<T>(std::move(y), {x}, [x](Node<T>& self) {
    TensorT<T> dx(x->value.shape);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      dx.data[i] = x->value.data[i] > T(0) ? self.grad.data[i] : T(0);
    }
    detail::accumulate(x, dx);
  });
}

template <typename T>
VarT<T> leaky_relu(const VarT<T>& x, double slope) {
  TensorT<T> y(x->value.shape);
  const T a = static_cast<T>(slope);
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const T v = x->value.data[i];
    y.data[i] = v > T(0) ? v : a * v;
  }
  return detail::make_op<T>(std::move(y), {x}, [x, a](Node<T>& self) {
    TensorT<T> dx(x->value.shape);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      dx.data[i] = self.grad.data[i] * (x->value.data[i] > T(0) ? T(1) : a);
    }
    detail::accumulate(x, dx);
  });
}

template <typename T>
VarT<T> tanh_op(const VarT<T>& x) {
  TensorT<T> y(x->value.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = std::tanh(x->value.data[i]);
  auto yv = std::make_shared<TensorT<T>>(y);
  return detail::make_op<T>(std::move(y), {x}, [x, yv](Node<T>& self) {
    TensorT<T> dx(x->value.shape);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      dx.data[i] = self.grad.data[i] * (T(1) - yv->data[i] * yv->data[i]);
    }
    detail::accumulate(x, dx);
  });
}

namespace detail {

// b broadcasts against a: every dimension of b equals a's or 1.
inline bool broadcast_compatible(const Shape& a, const Shape& b) {
  return (b.n == a.n || b.n == 1) && (b.c == a.c || b.c == 1) && (b.h == a.h || b.h == 1) &&
         (b.w == a.w || b.w == 1);
}

inline std::size_t broadcast_index(const Shape& b, int n, int c, int y, int x) {
  const int bn = b.n == 1 ? 0 : n;
  const int bc = b.c == 1 ? 0 : c;
  const int by = b.h == 1 ? 0 : y;
  const int bx = b.w == 1 ? 0 : x;
  return ((static_cast<std::size_t>(bn) * b.c + bc) * b.h + by) * b.w + bx;
}

// Reduce a full-shaped tensor onto the (possibly broadcast) shape of b.
template <typename T>
TensorT<T> reduce_to(const TensorT<T>& full, const Shape& target) {
  if (full.shape == target) return full;
  TensorT<T> out(target);
  const Shape& s = full.shape;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          out.data[broadcast_index(target, n, c, y, x)] += full.at(n, c, y, x);
        }
      }
    }
  }
  return out;
}

template <typename T, typename FwdFn, typename DaFn, typename DbFn>
VarT<T> binary_broadcast(const VarT<T>& a, const VarT<T>& b, FwdFn fwd, DaFn da_fn, DbFn db_fn,
                         const char* op) {
  const Shape& sa = a->value.shape;
  const Shape& sb = b->value.shape;
  if (!broadcast_compatible(sa, sb)) {
    throw ShapeError(std::string(op) + ": shapes " + sa.str() + " and " + sb.str() +
                     " are not broadcast-compatible");
  }
  TensorT<T> y(sa);
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < sa.c; ++c) {
      for (int yy = 0; yy < sa.h; ++yy) {
        for (int xx = 0; xx < sa.w; ++xx) {
          y.at(n, c, yy, xx) = fwd(a->value.at(n, c, yy, xx),
                                   b->value.data[broadcast_index(sb, n, c, yy, xx)]);
        }
      }
    }
  }
  return make_op<T>(std::move(y), {a, b}, [a, b, da_fn, db_fn](Node<T>& self) {
    const Shape& sa = a->value.shape;
    const Shape& sb = b->value.shape;
    if (a->requires_grad) {
      TensorT<T> da(sa);
      for (int n = 0; n < sa.n; ++n)
        for (int c = 0; c < sa.c; ++c)
          for (int yy = 0; yy < sa.h; ++yy)
            for (int xx = 0; xx < sa.w; ++xx)
              da.at(n, c, yy, xx) =
                  da_fn(self.grad.at(n, c, yy, xx), a->value.at(n, c, yy, xx),
                        b->value.data[broadcast_index(sb, n, c, yy, xx)]);
      accumulate(a, da);
    }
    if (b->requires_grad) {
      TensorT<T> full(sa);
      for (int n = 0; n < sa.n; ++n)
        for (int c = 0; c < sa.c; ++c)
          for (int yy = 0; yy < sa.h; ++yy)
            for (int xx = 0; xx < sa.w; ++xx)
              full.at(n, c, yy, xx) =
                  db_fn(self.grad.at(n, c, yy, xx), a->value.at(n, c, yy, xx),
                        b->value.data[broadcast_index(sb, n, c, yy, xx)]);
      accumulate(b, reduce_to(full, sb));
    }
  });
}

}  // namespace detail

template <typename T>
VarT<T> add(const VarT<T>& a, const VarT<T>& b) {
  return detail::binary_broadcast<T>(
      a, b, [](T x, T y) { return x + y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return g; }, "add");
}

template <typename T>
VarT<T> sub(const VarT<T>& a, const VarT<T>& b) {
  return detail::binary_broadcast<T>(
      a, b, [](T x, T y) { return x - y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return -g; }, "sub");
}

template <typename T>
VarT<T> mul(const VarT<T>& a, const VarT<T>& b) {
  return detail::binary_broadcast<T>(
      a, b, [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
      [](T g, T x, T) { return g * x; }, "mul");
}

template <typename T>
VarT<T> abs_op(const VarT<T>& x) {
  TensorT<T> y(x->value.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = std::abs(x->value.data[i]);
  return detail::make_op<T>(std::move(y), {x}, [x](Node<T>& self) {
    TensorT<T> dx(x->value.shape);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      const T v = x->value.data[i];
      dx.data[i] = v > T(0) ? self.grad.data[i] : (v < T(0) ? -self.grad.data[i] : T(0));
    }
    detail::accumulate(x, dx);
  });
}

template <typename T>
VarT<T> scale(const VarT<T>& x, double factor) {
  const T f = static_cast<T>(factor);
  TensorT<T> y(x->value.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = f * x->value.data[i];
  return detail::make_op<T>(std::move(y), {x}, [x, f](Node<T>& self) {
    TensorT<T> dx(x->value.shape);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] = f * self.grad.data[i];
    detail::accumulate(x, dx);
  });
}

template <typename T>
VarT<T> sum(const VarT<T>& x) {
  T acc = 0;
  for (T v : x->value.data) acc += v;
  TensorT<T> y({1, 1, 1, 1});
  y.data[0] = acc;
  return detail::make_op<T>(std::move(y), {x}, [x](Node<T>& self) {
    TensorT<T> dx(x->value.shape, self.grad.data[0]);
    detail::accumulate(x, dx);
  });
}

template <typename T>
VarT<T> mean(const VarT<T>& x) {
  const std::size_t n = x->value.data.size();
  T acc = 0;
  for (T v : x->value.data) acc += v;
  TensorT<T> y({1, 1, 1, 1});
  y.data[0] = acc / static_cast<T>(n);
  return detail::make_op<T>(std::move(y), {x}, [x, n](Node<T>& self) {
    TensorT<T> dx(x->value.shape, self.grad.data[0] / static_cast<T>(n));
    detail::accumulate(x, dx);
  });
}

template <typename T>
VarT<T> l1_diff(const VarT<T>& a, const VarT<T>& b) {
  return mean(abs_op(sub(a, b)));
}

// Numerically stable elementwise binary cross-entropy on logits against a
// constant target: max(z,0) - z*t + log(1 + exp(-|z|)).
template <typename T>
VarT<T> bce_with_logits(const VarT<T>& z, T target) {
  TensorT<T> y(z->value.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const T v = z->value.data[i];
    y.data[i] = std::max(v, T(0)) - v * target + std::log1p(std::exp(-std::abs(v)));
  }
  return detail::make_op<T>(std::move(y), {z}, [z, target](Node<T>& self) {
    TensorT<T> dz(z->value.shape);
    for (std::size_t i = 0; i < dz.data.size(); ++i) {
      const T v = z->value.data[i];
      const T sig = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                              : std::exp(v) / (T(1) + std::exp(v));
      dz.data[i] = self.grad.data[i] * (sig - target);
    }
    detail::accumulate(z, dz);
  });
}

template <typename T>
VarT<T> concat_channels(const VarT<T>& a, const VarT<T>& b) {
  const Shape& sa = a->value.shape;
  const Shape& sb = b->value.shape;
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: shapes " + sa.str() + " and " + sb.str() + " disagree");
  }
  TensorT<T> y({sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t per = static_cast<std::size_t>(sa.h) * sa.w;
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(&a->value.data[static_cast<std::size_t>(n) * sa.c * per], sa.c * per,
                &y.data[static_cast<std::size_t>(n) * (sa.c + sb.c) * per]);
    std::copy_n(&b->value.data[static_cast<std::size_t>(n) * sb.c * per], sb.c * per,
                &y.data[(static_cast<std::size_t>(n) * (sa.c + sb.c) + sa.c) * per]);
  }
  return detail::make_op<T>(std::move(y), {a, b}, [a, b, per](Node<T>& self) {
    const Shape& sa = a->value.shape;
    const Shape& sb = b->value.shape;
    if (a->requires_grad) {
      TensorT<T> da(sa);
      for (int n = 0; n < sa.n; ++n) {
        std::copy_n(&self.grad.data[static_cast<std::size_t>(n) * (sa.c + sb.c) * per],
                    sa.c * per, &da.data[static_cast<std::size_t>(n) * sa.c * per]);
      }
      detail::accumulate(a, da);
    }
    if (b->requires_grad) {
      TensorT<T> db(sb);
      for (int n = 0; n < sb.n; ++n) {
        std::copy_n(&self.grad.data[(static_cast<std::size_t>(n) * (sa.c + sb.c) + sa.c) * per],
                    sb.c * per, &db.data[static_cast<std::size_t>(n) * sb.c * per]);
      }
      detail::accumulate(b, db);
    }
  });
}

// ---------------------------------------------------------------------------
// Reverse pass. Repeated calls without zeroing accumulate into existing grads.

template <typename T>
void backward(const VarT<T>& loss) {
  if (!loss) throw ArgumentError("backward: null root");
  if (loss->value.data.size() != 1) {
    throw ArgumentError("backward: root must be a scalar, got " + loss->value.shape.str());
  }
  if (!loss->requires_grad) return;

  // Post-order DFS; visiting order depends only on graph structure.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next].get();
      ++next;
      if (parent && parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad.data[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backprop && !node->grad.empty()) node->backprop(*node);
  }
}

}  // namespace p2x::nn
