#include "coad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace coad {

namespace {

template <typename T>
using Node = detail::Node<T>;
template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;
template <typename T>
using Buffer = detail::AlignedVector<T>;

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

template <typename T>
Tensor<T> make_result(Shape shape, Buffer<T> data, std::vector<NodePtr<T>> inputs,
                      std::function<void(Node<T>&)> fn) {
  Tensor<T> out(std::move(shape), std::move(data));
  bool track = grad_enabled() &&
               std::any_of(inputs.begin(), inputs.end(), [](const NodePtr<T>& n) { return n && n->requires_grad; });
  if (track) {
    auto& node = *out.node();
    node.requires_grad = true;
    node.inputs = std::move(inputs);
    node.backward_fn = std::move(fn);
  }
  return out;
}

void require(bool cond, const std::string& message) {
  if (!cond) throw ShapeError(message);
}

template <typename T>
void require_defined(const Tensor<T>& t, const char* op, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": " + what + " is undefined");
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op, const char* what) {
  require_defined(t, op, what);
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require_defined(a, op, "lhs");
  require_defined(b, op, "rhs");
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Patch matrix of shape (C*k*k) x (Ho*Wo).
template <typename T>
void im2col(const T* x, std::int64_t channels, std::int64_t height, std::int64_t width, std::int64_t k,
            const ConvOptions& opt, std::int64_t out_h, std::int64_t out_w, T* col) {
  const std::int64_t plane = out_h * out_w;
  for (std::int64_t c = 0; c < channels; ++c) {
    const T* xc = x + c * height * width;
    for (std::int64_t ki = 0; ki < k; ++ki) {
      for (std::int64_t kj = 0; kj < k; ++kj) {
        T* row = col + ((c * k + ki) * k + kj) * plane;
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
          const std::int64_t iy = oy * opt.stride - opt.padding + ki * opt.dilation;
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          const T* src = xc + iy * width;
          const std::int64_t x0 = kj * opt.dilation - opt.padding;
          for (std::int64_t ox = 0; ox < out_w; ++ox) {
            const std::int64_t ix = ox * opt.stride + x0;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add the patch matrix back into the image.
template <typename T>
void col2im(const T* col, std::int64_t channels, std::int64_t height, std::int64_t width, std::int64_t k,
            const ConvOptions& opt, std::int64_t out_h, std::int64_t out_w, T* x) {
  const std::int64_t plane = out_h * out_w;
  for (std::int64_t c = 0; c < channels; ++c) {
    T* xc = x + c * height * width;
    for (std::int64_t ki = 0; ki < k; ++ki) {
      for (std::int64_t kj = 0; kj < k; ++kj) {
        const T* row = col + ((c * k + ki) * k + kj) * plane;
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
          const std::int64_t iy = oy * opt.stride - opt.padding + ki * opt.dilation;
          if (iy < 0 || iy >= height) continue;
          const T* src = row + oy * out_w;
          T* dst = xc + iy * width;
          const std::int64_t x0 = kj * opt.dilation - opt.padding;
          for (std::int64_t ox = 0; ox < out_w; ++ox) {
            const std::int64_t ix = ox * opt.stride + x0;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(std::int64_t k, const ConvOptions& opt) {
  return k == 1 && opt.stride == 1 && opt.padding == 0;
}

}  // namespace

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, const ConvOptions& opt) {
  if (kernel < 1 || opt.dilation < 1 || opt.stride < 1 || opt.padding < 0) {
    throw ConfigError("convolution needs kernel >= 1, dilation >= 1, stride >= 1, padding >= 0");
  }
  const std::int64_t span = in + 2 * opt.padding - opt.dilation * (kernel - 1) - 1;
  if (span < 0) {
    throw ConfigError("convolution output extent < 1 (input " + std::to_string(in) + ", kernel " +
                      std::to_string(kernel) + ", dilation " + std::to_string(opt.dilation) + ")");
  }
  return span / opt.stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, const ConvOptions& opt) {
  require_rank(input, 3, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  const std::int64_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::int64_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) + " input channels, input " +
                     shape_str(input.shape()) + " has " + std::to_string(cin));
  }
  require(weight.dim(3) == k, "conv2d: only square kernels are supported, got " + shape_str(weight.shape()));
  if (bias.defined()) {
    require(bias.size() == static_cast<std::size_t>(cout),
            "conv2d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(cout) + " outputs");
  }
  const std::int64_t oh = conv_out_extent(h, k, opt), ow = conv_out_extent(w, k, opt);
  const std::int64_t plane = oh * ow, patch = cin * k * k;

  Buffer<T> out(static_cast<std::size_t>(cout * plane));
  MapM<T> out_m(out.data(), cout, plane);
  CMapM<T> w_m(weight.data().data(), cout, patch);
  if (is_pointwise(k, opt)) {
    out_m.noalias() = w_m * CMapM<T>(input.data().data(), cin, plane);
  } else {
    Buffer<T> col(static_cast<std::size_t>(patch * plane));
    im2col(input.data().data(), cin, h, w, k, opt, oh, ow, col.data());
    out_m.noalias() = w_m * CMapM<T>(col.data(), patch, plane);
  }
  if (bias.defined()) {
    for (std::int64_t c = 0; c < cout; ++c) out_m.row(c).array() += bias.data()[c];
  }

  std::vector<NodePtr<T>> inputs{input.node(), weight.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return make_result<T>(
      {cout, oh, ow}, std::move(out), std::move(inputs),
      [cin, h, w, cout, k, opt, oh, ow, plane, patch](Node<T>& self) {
        auto& x = *self.inputs[0];
        auto& wt = *self.inputs[1];
        CMapM<T> g(self.grad.data(), cout, plane);
        const bool pointwise = is_pointwise(k, opt);
        Buffer<T> col;
        const T* col_ptr = x.data.data();
        if (!pointwise && wt.requires_grad) {
          col.resize(static_cast<std::size_t>(patch * plane));
          im2col(x.data.data(), cin, h, w, k, opt, oh, ow, col.data());
          col_ptr = col.data();
        }
        if (wt.requires_grad) {
          MapM<T>(wt.ensure_grad().data(), cout, patch).noalias() += g * CMapM<T>(col_ptr, patch, plane).transpose();
        }
        if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
          auto& bg = self.inputs[2]->ensure_grad();
          for (std::int64_t c = 0; c < cout; ++c) bg[c] += g.row(c).sum();
        }
        if (x.requires_grad) {
          CMapM<T> w_m(wt.data.data(), cout, patch);
          if (pointwise) {
            MapM<T>(x.ensure_grad().data(), cin, plane).noalias() += w_m.transpose() * g;
          } else {
            Buffer<T> dcol(static_cast<std::size_t>(patch * plane));
            MapM<T>(dcol.data(), patch, plane).noalias() = w_m.transpose() * g;
            col2im(dcol.data(), cin, h, w, k, opt, oh, ow, x.ensure_grad().data());
          }
        }
      });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding) {
  require_rank(input, 3, "conv_transpose2d", "input");
  require_rank(weight, 4, "conv_transpose2d", "weight");
  const std::int64_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::int64_t cout = weight.dim(1), k = weight.dim(2);
  if (weight.dim(0) != cin) {
    throw ShapeError("conv_transpose2d: weight expects " + std::to_string(weight.dim(0)) +
                     " input channels, input " + shape_str(input.shape()) + " has " + std::to_string(cin));
  }
  require(weight.dim(3) == k, "conv_transpose2d: only square kernels are supported");
  if (stride < 1 || padding < 0) throw ConfigError("conv_transpose2d: stride must be >= 1 and padding >= 0");
  if (bias.defined()) {
    require(bias.size() == static_cast<std::size_t>(cout), "conv_transpose2d: bias does not match output channels");
  }
  const std::int64_t oh = (h - 1) * stride - 2 * padding + k;
  const std::int64_t ow = (w - 1) * stride - 2 * padding + k;
  if (oh < 1 || ow < 1) throw ConfigError("conv_transpose2d: output extent < 1");
  const ConvOptions geo{stride, padding, 1};
  // The matching forward conv maps (oh, ow) back to (h, w); make sure it does.
  if (conv_out_extent(oh, k, geo) != h || conv_out_extent(ow, k, geo) != w) {
    throw ConfigError("conv_transpose2d: geometry is not invertible");
  }
  const std::int64_t in_plane = h * w, patch = cout * k * k;

  Buffer<T> col(static_cast<std::size_t>(patch * in_plane));
  MapM<T>(col.data(), patch, in_plane).noalias() =
      CMapM<T>(weight.data().data(), cin, patch).transpose() * CMapM<T>(input.data().data(), cin, in_plane);
  Buffer<T> out(static_cast<std::size_t>(cout * oh * ow), T(0));
  col2im(col.data(), cout, oh, ow, k, geo, h, w, out.data());
  if (bias.defined()) {
    for (std::int64_t c = 0; c < cout; ++c) {
      T b = bias.data()[c];
      T* dst = out.data() + c * oh * ow;
      for (std::int64_t i = 0; i < oh * ow; ++i) dst[i] += b;
    }
  }

  std::vector<NodePtr<T>> inputs{input.node(), weight.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return make_result<T>({cout, oh, ow}, std::move(out), std::move(inputs),
                        [cin, h, w, cout, k, geo, oh, ow, in_plane, patch](Node<T>& self) {
                          auto& x = *self.inputs[0];
                          auto& wt = *self.inputs[1];
                          Buffer<T> dcol(static_cast<std::size_t>(patch * in_plane));
                          im2col(self.grad.data(), cout, oh, ow, k, geo, h, w, dcol.data());
                          CMapM<T> dcol_m(dcol.data(), patch, in_plane);
                          if (x.requires_grad) {
                            MapM<T>(x.ensure_grad().data(), cin, in_plane).noalias() +=
                                CMapM<T>(wt.data.data(), cin, patch) * dcol_m;
                          }
                          if (wt.requires_grad) {
                            MapM<T>(wt.ensure_grad().data(), cin, patch).noalias() +=
                                CMapM<T>(x.data.data(), cin, in_plane) * dcol_m.transpose();
                          }
                          if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                            auto& bg = self.inputs[2]->ensure_grad();
                            for (std::int64_t c = 0; c < cout; ++c) {
                              const T* src = self.grad.data() + c * oh * ow;
                              T acc = 0;
                              for (std::int64_t i = 0; i < oh * ow; ++i) acc += src[i];
                              bg[c] += acc;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> softmax_along(const Tensor<T>& input, int axis) {
  require_defined(input, "softmax_along", "input");
  if (axis < 0 || static_cast<std::size_t>(axis) >= input.rank()) {
    throw ShapeError("softmax_along: axis " + std::to_string(axis) + " out of range for " + shape_str(input.shape()));
  }
  const auto& shape = input.shape();
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::int64_t n = shape[axis];
  const auto x = input.data();
  Buffer<T> y(x.size());
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      const std::int64_t base = o * n * inner + i;
      T mx = x[base];
      for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, x[base + j * inner]);
      T total = 0;
      for (std::int64_t j = 0; j < n; ++j) {
        T e = std::exp(x[base + j * inner] - mx);
        y[base + j * inner] = e;
        total += e;
      }
      for (std::int64_t j = 0; j < n; ++j) y[base + j * inner] /= total;
    }
  }
  return make_result<T>(shape, std::move(y), {input.node()}, [outer, inner, n](Node<T>& self) {
    auto& x = *self.inputs[0];
    auto& gx = x.ensure_grad();
    const auto& yv = self.data;
    const auto& g = self.grad;
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t i = 0; i < inner; ++i) {
        const std::int64_t base = o * n * inner + i;
        T dot = 0;
        for (std::int64_t j = 0; j < n; ++j) dot += g[base + j * inner] * yv[base + j * inner];
        for (std::int64_t j = 0; j < n; ++j) {
          const std::int64_t idx = base + j * inner;
          gx[idx] += yv[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul", "lhs");
  require_rank(b, 2, "matmul", "rhs");
  const std::int64_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
  if (b.dim(0) != kk) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  Buffer<T> out(static_cast<std::size_t>(m * n));
  MapM<T>(out.data(), m, n).noalias() = CMapM<T>(a.data().data(), m, kk) * CMapM<T>(b.data().data(), kk, n);
  return make_result<T>({m, n}, std::move(out), {a.node(), b.node()}, [m, kk, n](Node<T>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    CMapM<T> g(self.grad.data(), m, n);
    if (an.requires_grad) {
      MapM<T>(an.ensure_grad().data(), m, kk).noalias() += g * CMapM<T>(bn.data.data(), kk, n).transpose();
    }
    if (bn.requires_grad) {
      MapM<T>(bn.ensure_grad().data(), kk, n).noalias() += CMapM<T>(an.data.data(), m, kk).transpose() * g;
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(weight, 2, "linear", "weight");
  require_defined(x, "linear", "input");
  const std::int64_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  if (static_cast<std::int64_t>(x.size()) != in_dim) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " + shape_str(weight.shape()));
  }
  if (bias.defined()) require(static_cast<std::int64_t>(bias.size()) == out_dim, "linear: bias size mismatch");
  Buffer<T> y(static_cast<std::size_t>(out_dim));
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> y_v(y.data(), out_dim);
  y_v.noalias() = CMapM<T>(weight.data().data(), out_dim, in_dim) *
                  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(x.data().data(), in_dim);
  if (bias.defined()) {
    for (std::int64_t i = 0; i < out_dim; ++i) y[i] += bias.data()[i];
  }
  std::vector<NodePtr<T>> inputs{x.node(), weight.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return make_result<T>({out_dim}, std::move(y), std::move(inputs), [out_dim, in_dim](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    const auto& g = self.grad;
    if (wn.requires_grad) {
      auto& gw = wn.ensure_grad();
      for (std::int64_t o = 0; o < out_dim; ++o) {
        for (std::int64_t i = 0; i < in_dim; ++i) gw[o * in_dim + i] += g[o] * xn.data[i];
      }
    }
    if (xn.requires_grad) {
      auto& gx = xn.ensure_grad();
      for (std::int64_t o = 0; o < out_dim; ++o) {
        for (std::int64_t i = 0; i < in_dim; ++i) gx[i] += g[o] * wn.data[o * in_dim + i];
      }
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      auto& gb = self.inputs[2]->ensure_grad();
      for (std::int64_t o = 0; o < out_dim; ++o) gb[o] += g[o];
    }
  });
}

template <typename T>
Tensor<T> reduce_pool(const Tensor<T>& input, PoolKind kind, int window, int stride) {
  require_rank(input, 3, "reduce_pool", "input");
  const std::int64_t c = input.dim(0), h = input.dim(1), w = input.dim(2), plane = h * w;
  const auto x = input.data();
  switch (kind) {
    case PoolKind::kChannelMean: {
      Buffer<T> y(static_cast<std::size_t>(plane), T(0));
      for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t i = 0; i < plane; ++i) y[i] += x[ch * plane + i];
      }
      for (auto& v : y) v /= static_cast<T>(c);
      return make_result<T>({1, h, w}, std::move(y), {input.node()}, [c, plane](Node<T>& self) {
        auto& gx = self.inputs[0]->ensure_grad();
        for (std::int64_t ch = 0; ch < c; ++ch) {
          for (std::int64_t i = 0; i < plane; ++i) gx[ch * plane + i] += self.grad[i] / static_cast<T>(c);
        }
      });
    }
    case PoolKind::kChannelMax: {
      Buffer<T> y(x.begin(), x.begin() + plane);
      std::vector<std::int64_t> arg(static_cast<std::size_t>(plane), 0);
      for (std::int64_t ch = 1; ch < c; ++ch) {
        for (std::int64_t i = 0; i < plane; ++i) {
          if (x[ch * plane + i] > y[i]) {
            y[i] = x[ch * plane + i];
            arg[i] = ch;
          }
        }
      }
      return make_result<T>({1, h, w}, std::move(y), {input.node()}, [arg = std::move(arg), plane](Node<T>& self) {
        auto& gx = self.inputs[0]->ensure_grad();
        for (std::int64_t i = 0; i < plane; ++i) gx[arg[i] * plane + i] += self.grad[i];
      });
    }
    case PoolKind::kSpatialGlobalMean: {
      Buffer<T> y(static_cast<std::size_t>(c), T(0));
      for (std::int64_t ch = 0; ch < c; ++ch) {
        T acc = 0;
        for (std::int64_t i = 0; i < plane; ++i) acc += x[ch * plane + i];
        y[ch] = acc / static_cast<T>(plane);
      }
      return make_result<T>({c}, std::move(y), {input.node()}, [c, plane](Node<T>& self) {
        auto& gx = self.inputs[0]->ensure_grad();
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const T g = self.grad[ch] / static_cast<T>(plane);
          for (std::int64_t i = 0; i < plane; ++i) gx[ch * plane + i] += g;
        }
      });
    }
    case PoolKind::kSpatialMax: {
      if (window < 1 || stride < 1 || window > h || window > w) {
        throw ConfigError("reduce_pool: spatial_max needs 1 <= window <= extent and stride >= 1, got window " +
                          std::to_string(window) + " stride " + std::to_string(stride));
      }
      const std::int64_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
      Buffer<T> y(static_cast<std::size_t>(c * oh * ow));
      std::vector<std::int64_t> arg(y.size());
      for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            std::int64_t best = ch * plane + (oy * stride) * w + ox * stride;
            for (std::int64_t dy = 0; dy < window; ++dy) {
              for (std::int64_t dx = 0; dx < window; ++dx) {
                const std::int64_t idx = ch * plane + (oy * stride + dy) * w + ox * stride + dx;
                if (x[idx] > x[best]) best = idx;
              }
            }
            const std::int64_t o = (ch * oh + oy) * ow + ox;
            y[o] = x[best];
            arg[o] = best;
          }
        }
      }
      return make_result<T>({c, oh, ow}, std::move(y), {input.node()}, [arg = std::move(arg)](Node<T>& self) {
        auto& gx = self.inputs[0]->ensure_grad();
        for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += self.grad[o];
      });
    }
  }
  throw ConfigError("reduce_pool: unknown pool kind");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Buffer<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return make_result<T>(a.shape(), std::move(y), {a.node(), b.node()}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& g = in->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Buffer<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return make_result<T>(a.shape(), std::move(y), {a.node(), b.node()}, [](Node<T>& self) {
    if (self.inputs[0]->requires_grad) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.inputs[1]->requires_grad) {
      auto& g = self.inputs[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Buffer<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return make_result<T>(a.shape(), std::move(y), {a.node(), b.node()}, [](Node<T>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    if (an.requires_grad) {
      auto& g = an.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.data[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  require_defined(a, "scale", "input");
  Buffer<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * factor;
  return make_result<T>(a.shape(), std::move(y), {a.node()}, [factor](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  require_defined(a, "sigmoid", "input");
  Buffer<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T v = a[i];
    if (v >= 0) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  return make_result<T>(a.shape(), std::move(y), {a.node()}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.data[i] * (T(1) - self.data[i]);
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  require_defined(a, "relu", "input");
  Buffer<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] > T(0) ? a[i] : T(0);
  return make_result<T>(a.shape(), std::move(y), {a.node()}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (self.data[i] > T(0)) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  for (const auto& p : parts) require_defined(p, "concat", "operand");
  Shape shape = parts.front().shape();
  std::int64_t lead = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat: operand " + shape_str(p.shape()) + " incompatible with " + shape_str(shape));
    }
    lead += p.dim(0);
  }
  shape[0] = lead;
  Buffer<T> y;
  y.reserve(static_cast<std::size_t>(shape_numel(shape)));
  std::vector<NodePtr<T>> inputs;
  for (const auto& p : parts) {
    y.insert(y.end(), p.data().begin(), p.data().end());
    inputs.push_back(p.node());
  }
  return make_result<T>(std::move(shape), std::move(y), std::move(inputs), [](Node<T>& self) {
    std::size_t offset = 0;
    for (auto& in : self.inputs) {
      const std::size_t n = in->data.size();
      if (in->requires_grad) {
        auto& g = in->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::int64_t begin, std::int64_t end) {
  require_defined(input, "slice_channels", "input");
  if (begin < 0 || end > input.dim(0) || begin >= end) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + shape_str(input.shape()));
  }
  Shape shape = input.shape();
  const std::int64_t stride = shape_numel(shape) / shape[0];
  shape[0] = end - begin;
  Buffer<T> y(input.data().begin() + begin * stride, input.data().begin() + end * stride);
  const std::size_t offset = static_cast<std::size_t>(begin * stride);
  return make_result<T>(std::move(shape), std::move(y), {input.node()}, [offset](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> broadcast_mul_channelvec(const Tensor<T>& x, const Tensor<T>& vec) {
  require_rank(x, 3, "broadcast_mul_channelvec", "input");
  require_defined(vec, "broadcast_mul_channelvec", "vector");
  const std::int64_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  if (static_cast<std::int64_t>(vec.size()) != c) {
    throw ShapeError("broadcast_mul_channelvec: vector " + shape_str(vec.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  Buffer<T> y(x.size());
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < plane; ++i) y[ch * plane + i] = x[ch * plane + i] * vec[ch];
  }
  return make_result<T>(x.shape(), std::move(y), {x.node(), vec.node()}, [c, plane](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& vn = *self.inputs[1];
    if (xn.requires_grad) {
      auto& g = xn.ensure_grad();
      for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t i = 0; i < plane; ++i) g[ch * plane + i] += self.grad[ch * plane + i] * vn.data[ch];
      }
    }
    if (vn.requires_grad) {
      auto& g = vn.ensure_grad();
      for (std::int64_t ch = 0; ch < c; ++ch) {
        T acc = 0;
        for (std::int64_t i = 0; i < plane; ++i) acc += self.grad[ch * plane + i] * xn.data[ch * plane + i];
        g[ch] += acc;
      }
    }
  });
}

template <typename T>
Tensor<T> broadcast_mul_plane(const Tensor<T>& x, const Tensor<T>& plane_t) {
  require_rank(x, 3, "broadcast_mul_plane", "input");
  require_rank(plane_t, 3, "broadcast_mul_plane", "plane");
  const std::int64_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  if (plane_t.dim(0) != 1 || plane_t.dim(1) != x.dim(1) || plane_t.dim(2) != x.dim(2)) {
    throw ShapeError("broadcast_mul_plane: plane " + shape_str(plane_t.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  Buffer<T> y(x.size());
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < plane; ++i) y[ch * plane + i] = x[ch * plane + i] * plane_t[i];
  }
  return make_result<T>(x.shape(), std::move(y), {x.node(), plane_t.node()}, [c, plane](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& pn = *self.inputs[1];
    if (xn.requires_grad) {
      auto& g = xn.ensure_grad();
      for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t i = 0; i < plane; ++i) g[ch * plane + i] += self.grad[ch * plane + i] * pn.data[i];
      }
    }
    if (pn.requires_grad) {
      auto& g = pn.ensure_grad();
      for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t i = 0; i < plane; ++i) g[i] += self.grad[ch * plane + i] * xn.data[ch * plane + i];
      }
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape) {
  require_defined(input, "reshape", "input");
  if (shape_numel(shape) != static_cast<std::int64_t>(input.size())) {
    throw ShapeError("reshape: cannot view " + shape_str(input.shape()) + " as " + shape_str(shape));
  }
  Buffer<T> y(input.data().begin(), input.data().end());
  return make_result<T>(std::move(shape), std::move(y), {input.node()}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& input) {
  require_rank(input, 2, "transpose2d", "input");
  const std::int64_t m = input.dim(0), n = input.dim(1);
  Buffer<T> y(input.size());
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) y[j * m + i] = input[i * n + j];
  }
  return make_result<T>({n, m}, std::move(y), {input.node()}, [m, n](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    }
  });
}

namespace {
struct LerpTap {
  std::int64_t lo, hi;
  double frac;
};

// Source taps along one axis for half-pixel bilinear sampling.
std::vector<LerpTap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    auto lo = static_cast<std::int64_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::int64_t hi = lo < in - 1 ? lo + 1 : lo;
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}
}  // namespace

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, std::int64_t out_h, std::int64_t out_w) {
  require_rank(input, 3, "bilinear_resize", "input");
  if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: target extents must be >= 1");
  const std::int64_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  auto ty = bilinear_taps(h, out_h);
  auto tx = bilinear_taps(w, out_w);
  Buffer<T> y(static_cast<std::size_t>(c * out_h * out_w));
  const auto x = input.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const T* src = x.data() + ch * h * w;
    T* dst = y.data() + ch * out_h * out_w;
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      const auto& a = ty[oy];
      const T fy = static_cast<T>(a.frac);
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        const auto& b = tx[ox];
        const T fx = static_cast<T>(b.frac);
        const T top = src[a.lo * w + b.lo] * (T(1) - fx) + src[a.lo * w + b.hi] * fx;
        const T bot = src[a.hi * w + b.lo] * (T(1) - fx) + src[a.hi * w + b.hi] * fx;
        dst[oy * out_w + ox] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return make_result<T>({c, out_h, out_w}, std::move(y), {input.node()},
                        [c, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](Node<T>& self) {
                          auto& g = self.inputs[0]->ensure_grad();
                          for (std::int64_t ch = 0; ch < c; ++ch) {
                            T* dst = g.data() + ch * h * w;
                            const T* src = self.grad.data() + ch * out_h * out_w;
                            for (std::int64_t oy = 0; oy < out_h; ++oy) {
                              const auto& a = ty[oy];
                              const T fy = static_cast<T>(a.frac);
                              for (std::int64_t ox = 0; ox < out_w; ++ox) {
                                const auto& b = tx[ox];
                                const T fx = static_cast<T>(b.frac);
                                const T go = src[oy * out_w + ox];
                                dst[a.lo * w + b.lo] += go * (T(1) - fy) * (T(1) - fx);
                                dst[a.lo * w + b.hi] += go * (T(1) - fy) * fx;
                                dst[a.hi * w + b.lo] += go * fy * (T(1) - fx);
                                dst[a.hi * w + b.hi] += go * fy * fx;
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
  require_defined(input, "sum", "input");
  double acc = 0;
  for (T v : input.data()) acc += v;
  return make_result<T>({1}, {static_cast<T>(acc)}, {input.node()}, [](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& input) {
  require_defined(input, "mean", "input");
  double acc = 0;
  for (T v : input.data()) acc += v;
  const double n = static_cast<double>(input.size());
  return make_result<T>({1}, {static_cast<T>(acc / n)}, {input.node()}, [n](Node<T>& self) {
    auto& g = self.inputs[0]->ensure_grad();
    const T share = self.grad[0] / static_cast<T>(n);
    for (auto& v : g) v += share;
  });
}

template <typename T>
Tensor<T> softmax_weighted_sum(const Tensor<T>& stacked) {
  require_defined(stacked, "softmax_weighted_sum", "input");
  const std::int64_t n = stacked.dim(0);
  const std::int64_t m = static_cast<std::int64_t>(stacked.size()) / n;
  Shape shape(stacked.shape().begin() + 1, stacked.shape().end());
  if (shape.empty()) shape = {1};
  const auto x = stacked.data();
  Buffer<T> y(static_cast<std::size_t>(m));
  Buffer<T> weights(static_cast<std::size_t>(n * m));
  Buffer<T> terms(static_cast<std::size_t>(n));
  auto sorted_sum = [&terms]() {
    std::sort(terms.begin(), terms.end());
    T acc = 0;
    for (T t : terms) acc += t;
    return acc;
  };
  for (std::int64_t j = 0; j < m; ++j) {
    T mx = x[j];
    for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, x[i * m + j]);
    for (std::int64_t i = 0; i < n; ++i) {
      weights[i * m + j] = std::exp(x[i * m + j] - mx);
      terms[i] = weights[i * m + j];
    }
    const T total = sorted_sum();
    for (std::int64_t i = 0; i < n; ++i) {
      weights[i * m + j] /= total;
      terms[i] = weights[i * m + j] * x[i * m + j];
    }
    y[j] = sorted_sum();
  }
  return make_result<T>(std::move(shape), std::move(y), {stacked.node()},
                        [n, m, weights = std::move(weights)](Node<T>& self) {
                          auto& xn = *self.inputs[0];
                          auto& g = xn.ensure_grad();
                          // d y_j / d x_ij = w_ij (1 + x_ij - y_j)
                          for (std::int64_t i = 0; i < n; ++i) {
                            for (std::int64_t j = 0; j < m; ++j) {
                              const std::int64_t idx = i * m + j;
                              g[idx] += self.grad[j] * weights[idx] * (T(1) + xn.data[idx] - self.data[j]);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> lerp(const Tensor<T>& u, const Tensor<T>& g, const Tensor<T>& p) {
  require_same_shape(u, g, "lerp");
  require_same_shape(u, p, "lerp");
  Buffer<T> y(u.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::lerp(u[i], g[i], p[i]);
  return make_result<T>(u.shape(), std::move(y), {u.node(), g.node(), p.node()}, [](Node<T>& self) {
    auto& un = *self.inputs[0];
    auto& gn = *self.inputs[1];
    auto& pn = *self.inputs[2];
    const auto& go = self.grad;
    if (un.requires_grad) {
      auto& d = un.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[i] * (T(1) - pn.data[i]);
    }
    if (gn.requires_grad) {
      auto& d = gn.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[i] * pn.data[i];
    }
    if (pn.requires_grad) {
      auto& d = pn.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[i] * (gn.data[i] - un.data[i]);
    }
  });
}

template <typename T>
Tensor<T> bce_mean(const Tensor<T>& prediction, const Tensor<T>& target, double eps) {
  require_same_shape(prediction, target, "bce_mean");
  const T lo = static_cast<T>(eps), hi = static_cast<T>(1.0 - eps);
  const auto p = prediction.data();
  const auto t = target.data();
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], lo, hi);
    acc -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
  }
  const double n = static_cast<double>(p.size());
  return make_result<T>({1}, {static_cast<T>(acc / n)}, {prediction.node()}, [lo, hi, n, tgt = target](Node<T>& self) {
    auto& pn = *self.inputs[0];
    auto& g = pn.ensure_grad();
    const double scale_g = static_cast<double>(self.grad[0]) / n;
    const auto tv = tgt.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T pv = pn.data[i];
      if (pv < lo || pv > hi) continue;  // clamp has zero slope outside the band
      const double pd = pv;
      g[i] += static_cast<T>(scale_g * ((1.0 - tv[i]) / (1.0 - pd) - tv[i] / pd));
    }
  });
}

#define COAD_INSTANTIATE_OPS(T)                                                                           \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvOptions&);    \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);    \
  template Tensor<T> softmax_along(const Tensor<T>&, int);                                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> reduce_pool(const Tensor<T>&, PoolKind, int, int);                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                                          \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                           \
  template Tensor<T> relu(const Tensor<T>&);                                                              \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                                               \
  template Tensor<T> slice_channels(const Tensor<T>&, std::int64_t, std::int64_t);                        \
  template Tensor<T> broadcast_mul_channelvec(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> broadcast_mul_plane(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                    \
  template Tensor<T> transpose2d(const Tensor<T>&);                                                       \
  template Tensor<T> bilinear_resize(const Tensor<T>&, std::int64_t, std::int64_t);                       \
  template Tensor<T> sum(const Tensor<T>&);                                                               \
  template Tensor<T> mean(const Tensor<T>&);                                                              \
  template Tensor<T> softmax_weighted_sum(const Tensor<T>&);                                              \
  template Tensor<T> lerp(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> bce_mean(const Tensor<T>&, const Tensor<T>&, double);

COAD_INSTANTIATE_OPS(float)
COAD_INSTANTIATE_OPS(double)

}  // namespace coad
