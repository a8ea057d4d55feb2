#pragma once

// Straightforward reference implementations used to pin the optimised
// kernels. Everything accumulates in long double with plain nested loops.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "coad/tensor.hpp"

namespace coad::oracle {

using Vec = std::vector<double>;

inline Vec values(const Tensor<double>& t) { return Vec(t.data().begin(), t.data().end()); }

inline Tensor<double> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

// Largest |a - b| / max(|b|, 1).
inline double max_rel_diff(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(a[i] - b[i]) / std::max(std::fabs(b[i]), 1.0));
  }
  return worst;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

// out[co][oy][ox] = b[co] + sum_ci,ky,kx w[co][ci][ky][kx] * x[ci][oy*s - p + ky*d][ox*s - p + kx*d]
inline Vec conv2d(const Vec& x, std::int64_t cin, std::int64_t h, std::int64_t w, const Vec& wt, std::int64_t cout,
                  std::int64_t k, const Vec& bias, int stride, int pad, int dil, std::int64_t& oh, std::int64_t& ow) {
  oh = (h + 2 * pad - dil * (k - 1) - 1) / stride + 1;
  ow = (w + 2 * pad - dil * (k - 1) - 1) / stride + 1;
  Vec out(static_cast<std::size_t>(cout * oh * ow));
  for (std::int64_t co = 0; co < cout; ++co) {
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        long double acc = bias.empty() ? 0.0L : bias[co];
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          for (std::int64_t ky = 0; ky < k; ++ky) {
            for (std::int64_t kx = 0; kx < k; ++kx) {
              const std::int64_t iy = oy * stride - pad + ky * dil, ix = ox * stride - pad + kx * dil;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += static_cast<long double>(wt[((co * cin + ci) * k + ky) * k + kx]) * x[(ci * h + iy) * w + ix];
            }
          }
        }
        out[(co * oh + oy) * ow + ox] = static_cast<double>(acc);
      }
    }
  }
  return out;
}

// Transposed convolution as a scatter: every input pixel stamps its
// weighted kernel onto the (padded) output canvas. Weight is Cin x Cout x k x k.
inline Vec conv_transpose2d(const Vec& x, std::int64_t cin, std::int64_t h, std::int64_t w, const Vec& wt,
                            std::int64_t cout, std::int64_t k, const Vec& bias, int stride, int pad, std::int64_t& oh,
                            std::int64_t& ow) {
  oh = (h - 1) * stride - 2 * pad + k;
  ow = (w - 1) * stride - 2 * pad + k;
  const std::int64_t fh = (h - 1) * stride + k, fw = (w - 1) * stride + k;
  std::vector<long double> full(static_cast<std::size_t>(cout * fh * fw), 0.0L);
  for (std::int64_t ci = 0; ci < cin; ++ci) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t xx = 0; xx < w; ++xx) {
        const long double v = x[(ci * h + y) * w + xx];
        for (std::int64_t co = 0; co < cout; ++co) {
          for (std::int64_t ky = 0; ky < k; ++ky) {
            for (std::int64_t kx = 0; kx < k; ++kx) {
              full[(co * fh + y * stride + ky) * fw + xx * stride + kx] += v * wt[((ci * cout + co) * k + ky) * k + kx];
            }
          }
        }
      }
    }
  }
  Vec out(static_cast<std::size_t>(cout * oh * ow));
  for (std::int64_t co = 0; co < cout; ++co) {
    for (std::int64_t y = 0; y < oh; ++y) {
      for (std::int64_t xx = 0; xx < ow; ++xx) {
        out[(co * oh + y) * ow + xx] =
            static_cast<double>(full[(co * fh + y + pad) * fw + xx + pad] + (bias.empty() ? 0.0L : bias[co]));
      }
    }
  }
  return out;
}

// Softmax along `axis` of a rows x cols matrix (axis 0: down each column).
inline Vec softmax2d(const Vec& x, std::int64_t rows, std::int64_t cols, int axis) {
  Vec out(x.size());
  const std::int64_t outer = axis == 0 ? cols : rows, inner = axis == 0 ? rows : cols;
  for (std::int64_t o = 0; o < outer; ++o) {
    auto at = [&](std::int64_t i) { return axis == 0 ? i * cols + o : o * cols + i; };
    long double z = 0;
    for (std::int64_t i = 0; i < inner; ++i) z += std::exp(static_cast<long double>(x[at(i)]));
    for (std::int64_t i = 0; i < inner; ++i) out[at(i)] = static_cast<double>(std::exp(static_cast<long double>(x[at(i)])) / z);
  }
  return out;
}

inline Vec matmul(const Vec& a, const Vec& b, std::int64_t m, std::int64_t k, std::int64_t n) {
  Vec out(static_cast<std::size_t>(m * n));
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      long double acc = 0;
      for (std::int64_t t = 0; t < k; ++t) acc += static_cast<long double>(a[i * k + t]) * b[t * n + j];
      out[i * n + j] = static_cast<double>(acc);
    }
  }
  return out;
}

inline Vec channel_mean(const Vec& x, std::int64_t c, std::int64_t plane) {
  Vec out(static_cast<std::size_t>(plane));
  for (std::int64_t p = 0; p < plane; ++p) {
    long double s = 0;
    for (std::int64_t ch = 0; ch < c; ++ch) s += x[ch * plane + p];
    out[p] = static_cast<double>(s / c);
  }
  return out;
}

inline Vec channel_max(const Vec& x, std::int64_t c, std::int64_t plane) {
  Vec out(static_cast<std::size_t>(plane), -INFINITY);
  for (std::int64_t p = 0; p < plane; ++p) {
    for (std::int64_t ch = 0; ch < c; ++ch) out[p] = std::max(out[p], x[ch * plane + p]);
  }
  return out;
}

inline Vec global_mean(const Vec& x, std::int64_t c, std::int64_t plane) {
  Vec out(static_cast<std::size_t>(c));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    long double s = 0;
    for (std::int64_t p = 0; p < plane; ++p) s += x[ch * plane + p];
    out[ch] = static_cast<double>(s / plane);
  }
  return out;
}

inline Vec max_pool(const Vec& x, std::int64_t c, std::int64_t h, std::int64_t w, int win, int stride) {
  const std::int64_t oh = (h - win) / stride + 1, ow = (w - win) / stride + 1;
  Vec out(static_cast<std::size_t>(c * oh * ow), -INFINITY);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t xx = 0; xx < ow; ++xx)
        for (int dy = 0; dy < win; ++dy)
          for (int dx = 0; dx < win; ++dx)
            out[(ch * oh + y) * ow + xx] =
                std::max(out[(ch * oh + y) * ow + xx], x[(ch * h + y * stride + dy) * w + xx * stride + dx]);
  return out;
}

// Half-pixel bilinear sampling, source coordinate clamped at 0 and edges.
inline Vec bilinear(const Vec& x, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t oh, std::int64_t ow) {
  Vec out(static_cast<std::size_t>(c * oh * ow));
  const double sy = static_cast<double>(h) / oh, sx = static_cast<double>(w) / ow;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < oh; ++y) {
      const double fy = std::max((y + 0.5) * sy - 0.5, 0.0);
      const auto y0 = std::min<std::int64_t>(static_cast<std::int64_t>(fy), h - 1);
      const auto y1 = std::min<std::int64_t>(y0 + 1, h - 1);
      const double ly = fy - y0;
      for (std::int64_t xx = 0; xx < ow; ++xx) {
        const double fx = std::max((xx + 0.5) * sx - 0.5, 0.0);
        const auto x0 = std::min<std::int64_t>(static_cast<std::int64_t>(fx), w - 1);
        const auto x1 = std::min<std::int64_t>(x0 + 1, w - 1);
        const double lx = fx - x0;
        auto px = [&](std::int64_t yy, std::int64_t xc) { return x[(ch * h + yy) * w + xc]; };
        out[(ch * oh + y) * ow + xx] = (1 - ly) * ((1 - lx) * px(y0, x0) + lx * px(y0, x1)) +
                                       ly * ((1 - lx) * px(y1, x0) + lx * px(y1, x1));
      }
    }
  }
  return out;
}

}  // namespace coad::oracle
