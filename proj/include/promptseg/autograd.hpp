// Copyright 2026 The promptseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/SpecialFunctions>

#include <cassert>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "promptseg/errors.hpp"

namespace promptseg {

/// Row-major dense matrix. Token sets are stored as (tokens x channels),
/// feature maps as (height*width x channels), mask stacks as (masks x pixels).
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense matrices.
///
/// Nodes are appended in evaluation order, so a single reverse sweep from the
/// root visits every consumer before its producers. Nodes that do not depend
/// on any gradient-requiring leaf are recorded without a backward closure.
template <typename Scalar>
class Graph {
 public:
  using Matrix = Mat<Scalar>;
  using BackwardFn = std::function<void(Graph&, const Matrix&)>;

  /// Constant input; never receives a gradient.
  Var constant(Matrix value) { return push(std::move(value), nullptr, false, {}); }

  /// Leaf aliasing external storage (parameters). The storage must outlive
  /// the graph and stay unmodified while the graph is alive.
  Var leaf(const Matrix& external, bool requires_grad) {
    return push(Matrix(), &external, requires_grad, {});
  }

  Var record(Matrix value, bool requires_grad, BackwardFn backward) {
    return push(std::move(value), nullptr, requires_grad,
                requires_grad ? std::move(backward) : BackwardFn{});
  }

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external ? *n.external : n.owned;
  }

  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  template <typename... Vs>
  bool any_requires_grad(Vs... vs) const {
    return (requires_grad(vs) || ...);
  }

  /// Accumulated gradient, or nullptr if nothing flowed into this node.
  const Matrix* grad(Var v) const {
    const Node& n = nodes_[v.id];
    return n.has_grad ? &n.grad : nullptr;
  }

  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad.noalias() += g;
    }
  }

  /// Adds `g` into the (row, col) block of v's gradient.
  template <typename Derived>
  void accumulate_block(Var v, Eigen::Index row, Eigen::Index col,
                        const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      const auto& val = value(v);
      n.grad = Matrix::Zero(val.rows(), val.cols());
      n.has_grad = true;
    }
    n.grad.block(row, col, g.rows(), g.cols()) += g;
  }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and sweeps the tape backwards.
  void backward(Var root) {
    if (value(root).size() != 1) throw ShapeError("backward root must be a scalar");
    if (!requires_grad(root)) return;
    accumulate(root, Matrix::Ones(1, 1));
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Matrix value, const Matrix* external, bool rg, BackwardFn fn) {
    Node n;
    n.owned = std::move(value);
    n.external = external;
    n.requires_grad = rg;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra ops.

template <typename S>
Var matmul(Graph<S>& g, Var a, Var b) {
  Mat<S> out = g.value(a) * g.value(b);
  return g.record(std::move(out), g.any_requires_grad(a, b),
                  [a, b](Graph<S>& g, const Mat<S>& go) {
                    if (g.requires_grad(a)) g.accumulate(a, go * g.value(b).transpose());
                    if (g.requires_grad(b)) g.accumulate(b, g.value(a).transpose() * go);
                  });
}

/// a * b^T
template <typename S>
Var matmul_nt(Graph<S>& g, Var a, Var b) {
  Mat<S> out = g.value(a) * g.value(b).transpose();
  return g.record(std::move(out), g.any_requires_grad(a, b),
                  [a, b](Graph<S>& g, const Mat<S>& go) {
                    if (g.requires_grad(a)) g.accumulate(a, go * g.value(b));
                    if (g.requires_grad(b)) g.accumulate(b, go.transpose() * g.value(a));
                  });
}

/// x * w (+ bias broadcast over rows). `w` is (in x out), `bias` is (1 x out).
template <typename S>
Var linear(Graph<S>& g, Var x, Var w, Var bias = {}) {
  Mat<S> out = g.value(x) * g.value(w);
  if (bias.valid()) out.rowwise() += g.value(bias).row(0);
  bool rg = g.any_requires_grad(x, w) || (bias.valid() && g.requires_grad(bias));
  return g.record(std::move(out), rg, [x, w, bias](Graph<S>& g, const Mat<S>& go) {
    if (g.requires_grad(x)) g.accumulate(x, go * g.value(w).transpose());
    if (g.requires_grad(w)) g.accumulate(w, g.value(x).transpose() * go);
    if (bias.valid() && g.requires_grad(bias)) g.accumulate(bias, go.colwise().sum());
  });
}

template <typename S>
Var add(Graph<S>& g, Var a, Var b) {
  const auto& va = g.value(a);
  const auto& vb = g.value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) throw ShapeError("add: shape mismatch");
  Mat<S> out = va + vb;
  return g.record(std::move(out), g.any_requires_grad(a, b),
                  [a, b](Graph<S>& g, const Mat<S>& go) {
                    g.accumulate(a, go);
                    g.accumulate(b, go);
                  });
}

/// x + row, with a (1 x C) row broadcast over all rows of x.
template <typename S>
Var add_row(Graph<S>& g, Var x, Var row) {
  Mat<S> out = g.value(x);
  out.rowwise() += g.value(row).row(0);
  return g.record(std::move(out), g.any_requires_grad(x, row),
                  [x, row](Graph<S>& g, const Mat<S>& go) {
                    g.accumulate(x, go);
                    if (g.requires_grad(row)) g.accumulate(row, go.colwise().sum());
                  });
}

template <typename S>
Var scale(Graph<S>& g, Var x, S factor) {
  Mat<S> out = g.value(x) * factor;
  return g.record(std::move(out), g.requires_grad(x),
                  [x, factor](Graph<S>& g, const Mat<S>& go) { g.accumulate(x, go * factor); });
}

/// Exact (erf-based) GELU.
template <typename S>
Var gelu(Graph<S>& g, Var x) {
  const S inv_sqrt2 = S(1) / std::sqrt(S(2));
  const auto& v = g.value(x);
  Mat<S> cdf = ((v.array() * inv_sqrt2).erf() + S(1)) * S(0.5);
  Mat<S> out = v.cwiseProduct(cdf);
  return g.record(std::move(out), g.requires_grad(x),
                  [x, cdf = std::move(cdf)](Graph<S>& g, const Mat<S>& go) {
                    const S inv_sqrt_2pi = S(1) / std::sqrt(S(2) * std::numbers::pi_v<S>);
                    const auto& v = g.value(x);
                    Mat<S> d = cdf.array() + v.array() * inv_sqrt_2pi *
                                                 (v.array().square() * S(-0.5)).exp();
                    g.accumulate(x, go.cwiseProduct(d));
                  });
}

template <typename S>
Var relu(Graph<S>& g, Var x) {
  Mat<S> out = g.value(x).cwiseMax(S(0));
  return g.record(std::move(out), g.requires_grad(x), [x](Graph<S>& g, const Mat<S>& go) {
    Mat<S> mask = (g.value(x).array() > S(0)).template cast<S>();
    g.accumulate(x, go.cwiseProduct(mask));
  });
}

template <typename S>
Var softmax_rows(Graph<S>& g, Var x) {
  const auto& v = g.value(x);
  Mat<S> out = (v.colwise() - v.rowwise().maxCoeff()).array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  // The closure reads this node's own output.
  const Var self{static_cast<int>(g.size())};
  return g.record(std::move(out), g.requires_grad(x), [x, self](Graph<S>& g, const Mat<S>& go) {
    const auto& p = g.value(self);
    Eigen::Matrix<S, Eigen::Dynamic, 1> dots = go.cwiseProduct(p).rowwise().sum();
    g.accumulate(x, p.cwiseProduct(go - dots.replicate(1, go.cols())));
  });
}

/// Row-wise layer normalization with affine (1 x C) gamma/beta.
template <typename S>
Var layer_norm(Graph<S>& g, Var x, Var gamma, Var beta, S eps) {
  const auto& v = g.value(x);
  const Eigen::Index c = v.cols();
  Eigen::Matrix<S, Eigen::Dynamic, 1> mean = v.rowwise().mean();
  Mat<S> centered = v.colwise() - mean;
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std =
      ((centered.array().square().rowwise().sum() / S(c)) + eps).rsqrt();
  Mat<S> xhat = centered.array().colwise() * inv_std.array();
  Mat<S> out = xhat.array().rowwise() * g.value(gamma).row(0).array();
  out.rowwise() += g.value(beta).row(0);
  bool rg = g.any_requires_grad(x, gamma, beta);
  return g.record(std::move(out), rg,
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), c](
                      Graph<S>& g, const Mat<S>& go) {
                    if (g.requires_grad(gamma))
                      g.accumulate(gamma, go.cwiseProduct(xhat).colwise().sum());
                    if (g.requires_grad(beta)) g.accumulate(beta, go.colwise().sum());
                    if (!g.requires_grad(x)) return;
                    Mat<S> gx = go.array().rowwise() * g.value(gamma).row(0).array();
                    Eigen::Matrix<S, Eigen::Dynamic, 1> m1 = gx.rowwise().mean();
                    Eigen::Matrix<S, Eigen::Dynamic, 1> m2 =
                        gx.cwiseProduct(xhat).rowwise().sum() / S(c);
                    Mat<S> dx = gx.colwise() - m1;
                    dx -= (xhat.array().colwise() * m2.array()).matrix();
                    dx.array().colwise() *= inv_std.array();
                    g.accumulate(x, dx);
                  });
}

// ---------------------------------------------------------------------------
// Structural ops.

template <typename S>
Var slice_rows(Graph<S>& g, Var x, Eigen::Index begin, Eigen::Index count) {
  const auto& v = g.value(x);
  if (begin < 0 || begin + count > v.rows()) throw ShapeError("slice_rows out of range");
  Mat<S> out = v.middleRows(begin, count);
  return g.record(std::move(out), g.requires_grad(x),
                  [x, begin](Graph<S>& g, const Mat<S>& go) {
                    g.accumulate_block(x, begin, 0, go);
                  });
}

template <typename S>
Var slice_cols(Graph<S>& g, Var x, Eigen::Index begin, Eigen::Index count) {
  const auto& v = g.value(x);
  if (begin < 0 || begin + count > v.cols()) throw ShapeError("slice_cols out of range");
  Mat<S> out = v.middleCols(begin, count);
  return g.record(std::move(out), g.requires_grad(x),
                  [x, begin](Graph<S>& g, const Mat<S>& go) {
                    g.accumulate_block(x, 0, begin, go);
                  });
}

template <typename S>
Var concat_rows(Graph<S>& g, const std::vector<Var>& parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = g.value(parts.at(0)).cols();
  bool rg = false;
  for (Var p : parts) {
    if (g.value(p).cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += g.value(p).rows();
    rg = rg || g.requires_grad(p);
  }
  Mat<S> out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, g.value(p).rows()) = g.value(p);
    r += g.value(p).rows();
  }
  return g.record(std::move(out), rg, [parts](Graph<S>& g, const Mat<S>& go) {
    Eigen::Index r = 0;
    for (Var p : parts) {
      const Eigen::Index n = g.value(p).rows();
      if (g.requires_grad(p)) g.accumulate(p, go.middleRows(r, n));
      r += n;
    }
  });
}

template <typename S>
Var concat_cols(Graph<S>& g, const std::vector<Var>& parts) {
  Eigen::Index cols = 0;
  const Eigen::Index rows = g.value(parts.at(0)).rows();
  bool rg = false;
  for (Var p : parts) {
    if (g.value(p).rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += g.value(p).cols();
    rg = rg || g.requires_grad(p);
  }
  Mat<S> out(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, g.value(p).cols()) = g.value(p);
    c += g.value(p).cols();
  }
  return g.record(std::move(out), rg, [parts](Graph<S>& g, const Mat<S>& go) {
    Eigen::Index c = 0;
    for (Var p : parts) {
      const Eigen::Index n = g.value(p).cols();
      if (g.requires_grad(p)) g.accumulate(p, go.middleCols(c, n));
      c += n;
    }
  });
}

/// Broadcasts a (1 x C) row to (rows x C).
template <typename S>
Var repeat_row(Graph<S>& g, Var row, Eigen::Index rows) {
  Mat<S> out = g.value(row).row(0).replicate(rows, 1);
  return g.record(std::move(out), g.requires_grad(row),
                  [row](Graph<S>& g, const Mat<S>& go) { g.accumulate(row, go.colwise().sum()); });
}

namespace detail {

// Column index of (channel, ky, kx) inside a flattened k x k patch, matching
// the [out, in, kh, kw] flattening of convolution weights.
inline Eigen::Index patch_col(Eigen::Index c, int ky, int kx, int k) {
  return c * k * k + ky * k + kx;
}

}  // namespace detail

/// 3x3 zero-padded neighbourhood gather on an (H*W x C) feature map,
/// producing (H*W x 9C) so that a 3x3 convolution becomes a matmul.
template <typename S>
Var im2col3x3(Graph<S>& g, Var x, int height, int width) {
  const auto& v = g.value(x);
  const Eigen::Index c = v.cols();
  if (v.rows() != Eigen::Index(height) * width) throw ShapeError("im2col3x3: bad map size");
  Mat<S> out = Mat<S>::Zero(v.rows(), 9 * c);
  for (int y = 0; y < height; ++y)
    for (int xx = 0; xx < width; ++xx) {
      const Eigen::Index row = Eigen::Index(y) * width + xx;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int sy = y + ky - 1, sx = xx + kx - 1;
          if (sy < 0 || sy >= height || sx < 0 || sx >= width) continue;
          const Eigen::Index src = Eigen::Index(sy) * width + sx;
          for (Eigen::Index ch = 0; ch < c; ++ch)
            out(row, detail::patch_col(ch, ky, kx, 3)) = v(src, ch);
        }
    }
  return g.record(std::move(out), g.requires_grad(x),
                  [x, height, width, c](Graph<S>& g, const Mat<S>& go) {
                    Mat<S> gx = Mat<S>::Zero(Eigen::Index(height) * width, c);
                    for (int y = 0; y < height; ++y)
                      for (int xx = 0; xx < width; ++xx) {
                        const Eigen::Index row = Eigen::Index(y) * width + xx;
                        for (int ky = 0; ky < 3; ++ky)
                          for (int kx = 0; kx < 3; ++kx) {
                            const int sy = y + ky - 1, sx = xx + kx - 1;
                            if (sy < 0 || sy >= height || sx < 0 || sx >= width) continue;
                            const Eigen::Index src = Eigen::Index(sy) * width + sx;
                            for (Eigen::Index ch = 0; ch < c; ++ch)
                              gx(src, ch) += go(row, detail::patch_col(ch, ky, kx, 3));
                          }
                      }
                    g.accumulate(x, gx);
                  });
}

/// Plain (non-differentiable) k x k non-overlapping patch gather of a
/// planar image (C x H*W) into (H/k*W/k x C*k*k).
template <typename S>
Mat<S> patchify(const Mat<S>& planes, int height, int width, int k) {
  const Eigen::Index channels = planes.rows();
  const int gh = height / k, gw = width / k;
  Mat<S> out(Eigen::Index(gh) * gw, channels * k * k);
  for (int py = 0; py < gh; ++py)
    for (int px = 0; px < gw; ++px) {
      const Eigen::Index row = Eigen::Index(py) * gw + px;
      for (Eigen::Index c = 0; c < channels; ++c)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx)
            out(row, detail::patch_col(c, ky, kx, k)) =
                planes(c, Eigen::Index(py * k + ky) * width + (px * k + kx));
    }
  return out;
}

/// (H*W x C) -> (H/k*W/k x C*k*k); the input of a stride-k, kernel-k conv.
template <typename S>
Var space_to_depth(Graph<S>& g, Var x, int height, int width, int k) {
  const auto& v = g.value(x);
  const Eigen::Index c = v.cols();
  const int gh = height / k, gw = width / k;
  Mat<S> out(Eigen::Index(gh) * gw, c * k * k);
  for (int y = 0; y < height; ++y)
    for (int xx = 0; xx < width; ++xx) {
      const Eigen::Index dst = Eigen::Index(y / k) * gw + xx / k;
      for (Eigen::Index ch = 0; ch < c; ++ch)
        out(dst, detail::patch_col(ch, y % k, xx % k, k)) = v(Eigen::Index(y) * width + xx, ch);
    }
  return g.record(std::move(out), g.requires_grad(x),
                  [x, height, width, k, c, gw](Graph<S>& g, const Mat<S>& go) {
                    Mat<S> gx(Eigen::Index(height) * width, c);
                    for (int y = 0; y < height; ++y)
                      for (int xx = 0; xx < width; ++xx) {
                        const Eigen::Index src = Eigen::Index(y / k) * gw + xx / k;
                        for (Eigen::Index ch = 0; ch < c; ++ch)
                          gx(Eigen::Index(y) * width + xx, ch) =
                              go(src, detail::patch_col(ch, y % k, xx % k, k));
                      }
                    g.accumulate(x, gx);
                  });
}

/// (H*W x C*k*k) -> (kH*kW x C); the output scatter of a stride-k, kernel-k
/// transposed conv whose weight columns are flattened as (out, ky, kx).
template <typename S>
Var depth_to_space(Graph<S>& g, Var x, int height, int width, int k) {
  const auto& v = g.value(x);
  const Eigen::Index c = v.cols() / (k * k);
  const int oh = height * k, ow = width * k;
  Mat<S> out(Eigen::Index(oh) * ow, c);
  for (int y = 0; y < oh; ++y)
    for (int xx = 0; xx < ow; ++xx) {
      const Eigen::Index src = Eigen::Index(y / k) * width + xx / k;
      for (Eigen::Index ch = 0; ch < c; ++ch)
        out(Eigen::Index(y) * ow + xx, ch) = v(src, detail::patch_col(ch, y % k, xx % k, k));
    }
  return g.record(std::move(out), g.requires_grad(x),
                  [x, height, width, k, c, oh, ow](Graph<S>& g, const Mat<S>& go) {
                    Mat<S> gx(Eigen::Index(height) * width, c * k * k);
                    for (int y = 0; y < oh; ++y)
                      for (int xx = 0; xx < ow; ++xx) {
                        const Eigen::Index dst = Eigen::Index(y / k) * width + xx / k;
                        for (Eigen::Index ch = 0; ch < c; ++ch)
                          gx(dst, detail::patch_col(ch, y % k, xx % k, k)) =
                              go(Eigen::Index(y) * ow + xx, ch);
                      }
                    g.accumulate(x, gx);
                  });
}

/// Bilinear interpolation weights (out x in), half-pixel centres, edge clamp.
template <typename S>
Mat<S> bilinear_weights(int in, int out) {
  Mat<S> w = Mat<S>::Zero(out, in);
  const double ratio = double(in) / double(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const double lambda = src - i0;
    w(o, i0) += S(1 - lambda);
    w(o, i1) += S(lambda);
  }
  return w;
}

/// Resizes each row of x, viewed as an (h x w) image, to (out_h x out_w).
template <typename S>
Var resize_rows_bilinear(Graph<S>& g, Var x, int h, int w, int out_h, int out_w) {
  const auto& v = g.value(x);
  if (v.cols() != Eigen::Index(h) * w) throw ShapeError("resize_rows_bilinear: bad map size");
  Mat<S> ry = bilinear_weights<S>(h, out_h);
  Mat<S> rx = bilinear_weights<S>(w, out_w);
  Mat<S> out(v.rows(), Eigen::Index(out_h) * out_w);
  for (Eigen::Index m = 0; m < v.rows(); ++m) {
    Eigen::Map<const Mat<S>> src(v.row(m).data(), h, w);
    Eigen::Map<Mat<S>> dst(out.row(m).data(), out_h, out_w);
    dst.noalias() = ry * src * rx.transpose();
  }
  return g.record(std::move(out), g.requires_grad(x),
                  [x, h, w, out_h, out_w, ry = std::move(ry), rx = std::move(rx)](
                      Graph<S>& g, const Mat<S>& go) {
                    Mat<S> gx(go.rows(), Eigen::Index(h) * w);
                    for (Eigen::Index m = 0; m < go.rows(); ++m) {
                      Eigen::Map<const Mat<S>> src(go.row(m).data(), out_h, out_w);
                      Eigen::Map<Mat<S>> dst(gx.row(m).data(), h, w);
                      dst.noalias() = ry.transpose() * src * rx;
                    }
                    g.accumulate(x, gx);
                  });
}

/// Weighted sum of 1x1 scalars.
template <typename S>
Var weighted_sum(Graph<S>& g, const std::vector<std::pair<Var, S>>& terms) {
  Mat<S> out = Mat<S>::Zero(1, 1);
  bool rg = false;
  for (const auto& [v, wgt] : terms) {
    out(0, 0) += wgt * g.value(v)(0, 0);
    rg = rg || g.requires_grad(v);
  }
  return g.record(std::move(out), rg, [terms](Graph<S>& g, const Mat<S>& go) {
    for (const auto& [v, wgt] : terms) g.accumulate(v, go * wgt);
  });
}

}  // namespace promptseg
