// Copyright 2026 The antforge Authors.
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

#include "antforge/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace antforge {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;

template <typename T>
void require_same_tape(Var<T> a, Var<T> b) {
  if (a.tape == nullptr || a.tape != b.tape) throw StateError("vars belong to different tapes");
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InputError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename T>
void accumulate(std::span<T> dst, std::span<const T> src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// cols[(c*k+ki)*k+kj][oh*Wo+ow] = x[c][oh*s-p+ki][ow*s-p+kj]
template <typename T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int k, int stride, int pad, int64_t Ho,
            int64_t Wo, T* cols) {
  for (int64_t c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = cols + ((c * k + ki) * k + kj) * Ho * Wo;
        for (int64_t oh = 0; oh < Ho; ++oh) {
          const int64_t ih = oh * stride - pad + ki;
          T* dst = row + oh * Wo;
          if (ih < 0 || ih >= H) {
            std::fill(dst, dst + Wo, T{0});
            continue;
          }
          const T* src = x + (c * H + ih) * W;
          for (int64_t ow = 0; ow < Wo; ++ow) {
            const int64_t iw = ow * stride - pad + kj;
            dst[ow] = (iw >= 0 && iw < W) ? src[iw] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int64_t C, int64_t H, int64_t W, int k, int stride, int pad,
                int64_t Ho, int64_t Wo, T* x) {
  for (int64_t c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = cols + ((c * k + ki) * k + kj) * Ho * Wo;
        for (int64_t oh = 0; oh < Ho; ++oh) {
          const int64_t ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) continue;
          T* dst = x + (c * H + ih) * W;
          const T* src = row + oh * Wo;
          for (int64_t ow = 0; ow < Wo; ++ow) {
            const int64_t iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < W) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

// ---- Tape ----------------------------------------------------------------

template <typename T>
int Tape<T>::check(Var<T> v) const {
  if (v.tape != this || v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
    throw StateError("var does not belong to this tape");
  }
  return v.id;
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  if (consumed_) throw StateError("tape already consumed by backward()");
  Node n;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var<T> Tape<T>::input(Tensor<T> value) {
  Var<T> v = constant(std::move(value));
  nodes_.back().needs_grad = record_;
  return v;
}

template <typename T>
Var<T> Tape<T>::parameter(Tensor<T>& tensor, bool track) {
  if (consumed_) throw StateError("tape already consumed by backward()");
  Node n;
  n.external = &tensor;
  if (record_ && track && tensor.requires_grad()) {
    n.needs_grad = true;
    n.sink = &tensor;
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var<T> v) const {
  const Node& n = nodes_[check(v)];
  return n.external ? *n.external : n.own;
}

template <typename T>
std::span<const T> Tape<T>::grad(Var<T> v) const {
  return nodes_[check(v)].grad;
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(Var<T> v) {
  Node& n = nodes_[check(v)];
  const size_t len = static_cast<size_t>((n.external ? *n.external : n.own).numel());
  if (n.grad.size() != len) n.grad.assign(len, T{0});
  return n.grad;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, bool needs_grad,
                       std::function<void(std::span<const T>)> backward) {
  if (consumed_) throw StateError("tape already consumed by backward()");
  Node n;
  n.own = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (consumed_) throw StateError("backward() called twice on the same tape");
  if (!record_) throw StateError("backward() on a non-recording tape");
  const int root = check(loss);
  if (value(loss).numel() != 1) throw InputError("backward() needs a scalar loss");
  consumed_ = true;
  if (!nodes_[root].needs_grad) return;
  grad_buffer(loss)[0] = T{1};
  for (int i = root; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(n.grad);
    if (n.sink) accumulate<T>(n.sink->mutable_grad(), n.grad);
  }
}

// ---- elementwise -----------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  Tape<T>& t = *a.tape;
  const Tensor<T>& va = t.value(a);
  const Tensor<T>& vb = t.value(b);
  require_same_shape(va, vb, "add");
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] + vb[i];
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                  [&t, a, b](std::span<const T> g) {
                    if (t.needs_grad(a)) accumulate<T>(t.grad_buffer(a), g);
                    if (t.needs_grad(b)) accumulate<T>(t.grad_buffer(b), g);
                  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  Tape<T>& t = *a.tape;
  const Tensor<T>& va = t.value(a);
  const Tensor<T>& vb = t.value(b);
  require_same_shape(va, vb, "mul");
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * vb[i];
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                  [&t, a, b](std::span<const T> g) {
                    const Tensor<T>& va = t.value(a);
                    const Tensor<T>& vb = t.value(b);
                    if (t.needs_grad(a)) {
                      auto ga = t.grad_buffer(a);
                      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[static_cast<int64_t>(i)];
                    }
                    if (t.needs_grad(b)) {
                      auto gb = t.grad_buffer(b);
                      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[static_cast<int64_t>(i)];
                    }
                  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& va = t.value(a);
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * factor;
  return t.record(std::move(out), t.needs_grad(a), [&t, a, factor](std::span<const T> g) {
    auto ga = t.grad_buffer(a);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

template <typename T>
Var<T> scale_rows(Var<T> a, std::vector<T> factors) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& va = t.value(a);
  if (va.rank() == 0 || va.dim(0) != static_cast<int64_t>(factors.size())) {
    throw InputError("scale_rows: need one factor per leading index");
  }
  const int64_t row = va.dim(0) == 0 ? 0 : va.numel() / va.dim(0);
  Tensor<T> out(va.shape());
  for (int64_t r = 0; r < va.dim(0); ++r) {
    for (int64_t i = 0; i < row; ++i) out[r * row + i] = va[r * row + i] * factors[r];
  }
  return t.record(std::move(out), t.needs_grad(a),
                  [&t, a, f = std::move(factors), row](std::span<const T> g) {
                    auto ga = t.grad_buffer(a);
                    for (size_t r = 0; r < f.size(); ++r) {
                      for (int64_t i = 0; i < row; ++i) {
                        const size_t k = r * static_cast<size_t>(row) + static_cast<size_t>(i);
                        ga[k] += g[k] * f[r];
                      }
                    }
                  });
}

template <typename T>
Var<T> scale_rows_renorm(Var<T> a, std::vector<T> factors, std::vector<uint8_t> active) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& va = t.value(a);
  if (va.rank() == 0 || va.dim(0) != static_cast<int64_t>(factors.size())) {
    throw InputError("scale_rows_renorm: need one factor per leading index");
  }
  if (static_cast<int64_t>(active.size()) != va.numel()) {
    throw InputError("scale_rows_renorm: active mask must match the input size");
  }
  const int64_t row = va.dim(0) == 0 ? 0 : va.numel() / va.dim(0);
  Tensor<T> out(va.shape());
  for (int64_t r = 0; r < va.dim(0); ++r) {
    for (int64_t i = 0; i < row; ++i) out[r * row + i] = va[r * row + i] * factors[r];
  }
  return t.record(std::move(out), t.needs_grad(a),
                  [&t, a, f = std::move(factors), m = std::move(active), row](std::span<const T> g) {
                    const Tensor<T>& va = t.value(a);
                    auto ga = t.grad_buffer(a);
                    for (size_t r = 0; r < f.size(); ++r) {
                      const size_t base = r * static_cast<size_t>(row);
                      double dot = 0.0, norm2 = 0.0;
                      for (int64_t i = 0; i < row; ++i) {
                        const size_t k = base + static_cast<size_t>(i);
                        dot += static_cast<double>(g[k]) * static_cast<double>(va[static_cast<int64_t>(k)]);
                        if (m[k]) norm2 += static_cast<double>(va[static_cast<int64_t>(k)]) * va[static_cast<int64_t>(k)];
                      }
                      // d gamma / d a_i = -gamma a_i / norm2 on the active set.
                      const double coef = norm2 > 0.0 ? static_cast<double>(f[r]) * dot / norm2 : 0.0;
                      for (int64_t i = 0; i < row; ++i) {
                        const size_t k = base + static_cast<size_t>(i);
                        double v = static_cast<double>(g[k]) * f[r];
                        if (m[k]) v -= coef * static_cast<double>(va[static_cast<int64_t>(k)]);
                        ga[k] += static_cast<T>(v);
                      }
                    }
                  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& va = t.value(a);
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] > T{0} ? va[i] : T{0};
  return t.record(std::move(out), t.needs_grad(a), [&t, a](std::span<const T> g) {
    const Tensor<T>& va = t.value(a);
    auto ga = t.grad_buffer(a);
    for (size_t i = 0; i < g.size(); ++i) {
      if (va[static_cast<int64_t>(i)] > T{0}) ga[i] += g[i];
    }
  });
}

template <typename T>
Var<T> clip01(Var<T> a) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& va = t.value(a);
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(va[i], T{0}, T{1});
  return t.record(std::move(out), t.needs_grad(a), [&t, a](std::span<const T> g) {
    const Tensor<T>& va = t.value(a);
    auto ga = t.grad_buffer(a);
    for (size_t i = 0; i < g.size(); ++i) {
      const T v = va[static_cast<int64_t>(i)];
      if (v > T{0} && v < T{1}) ga[i] += g[i];
    }
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& va = t.value(a);
  T s{0};
  for (int64_t i = 0; i < va.numel(); ++i) s += va[i];
  return t.record(Tensor<T>(Shape{1}, std::vector<T>{s}), t.needs_grad(a),
                  [&t, a](std::span<const T> g) {
                    auto ga = t.grad_buffer(a);
                    for (auto& x : ga) x += g[0];
                  });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = t.value(a);
  out.set_requires_grad(false);
  out.drop_grad();
  out.reshape(std::move(shape));
  return t.record(std::move(out), t.needs_grad(a), [&t, a](std::span<const T> g) {
    accumulate<T>(t.grad_buffer(a), g);
  });
}

template <typename T>
Var<T> flatten(Var<T> a) {
  const Shape& s = a.value().shape();
  if (s.empty()) throw InputError("flatten of a scalar");
  const int64_t b = s[0];
  return reshape(a, Shape{b, b == 0 ? 0 : numel(s) / b});
}

// ---- dense layers ----------------------------------------------------------

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  require_same_tape(x, w);
  require_same_tape(x, b);
  Tape<T>& t = *x.tape;
  const Tensor<T>& vx = t.value(x);
  const Tensor<T>& vw = t.value(w);
  const Tensor<T>& vb = t.value(b);
  if (vx.rank() != 2 || vw.rank() != 2 || vb.rank() != 1 || vx.dim(1) != vw.dim(1) ||
      vb.dim(0) != vw.dim(0)) {
    throw ConfigError("linear: incompatible shapes x" + shape_str(vx.shape()) + " w" +
                      shape_str(vw.shape()) + " b" + shape_str(vb.shape()));
  }
  const int64_t B = vx.dim(0), in = vx.dim(1), out_f = vw.dim(0);
  Tensor<T> out(Shape{B, out_f});
  MapM<T> Y(out.ptr(), B, out_f);
  Y.noalias() = MapC<T>(vx.ptr(), B, in) * MapC<T>(vw.ptr(), out_f, in).transpose();
  Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(vb.ptr(), out_f);
  const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.record(std::move(out), ng, [&t, x, w, b, B, in, out_f](std::span<const T> g) {
    MapC<T> G(g.data(), B, out_f);
    if (t.needs_grad(x)) {
      MapM<T>(t.grad_buffer(x).data(), B, in).noalias() += G * MapC<T>(t.value(w).ptr(), out_f, in);
    }
    if (t.needs_grad(w)) {
      MapM<T>(t.grad_buffer(w).data(), out_f, in).noalias() +=
          G.transpose() * MapC<T>(t.value(x).ptr(), B, in);
    }
    if (t.needs_grad(b)) {
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(t.grad_buffer(b).data(), out_f) +=
          G.colwise().sum();
    }
  });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad) {
  require_same_tape(x, w);
  require_same_tape(x, b);
  Tape<T>& t = *x.tape;
  const Tensor<T>& vx = t.value(x);
  const Tensor<T>& vw = t.value(w);
  const Tensor<T>& vb = t.value(b);
  if (vx.rank() != 4 || vw.rank() != 4 || vb.rank() != 1) {
    throw ConfigError("conv2d: expected x[B,C,H,W], w[Cout,Cin,k,k], b[Cout]");
  }
  const int64_t B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  const int64_t Cout = vw.dim(0);
  const int k = static_cast<int>(vw.dim(2));
  if (vw.dim(1) != C || vw.dim(3) != k || vb.dim(0) != Cout) {
    throw ConfigError("conv2d: weight " + shape_str(vw.shape()) + " incompatible with input " +
                      shape_str(vx.shape()));
  }
  if (k % 2 == 0 || stride < 1 || pad < 0) {
    throw ConfigError("conv2d: need odd kernel, stride >= 1, pad >= 0");
  }
  const int64_t Ho = window_out(H, k, stride, pad), Wo = window_out(W, k, stride, pad);
  if (Ho <= 0 || Wo <= 0) throw ConfigError("conv2d: kernel larger than padded input");
  const int64_t K = C * k * k, P = Ho * Wo;
  const bool pointwise = k == 1 && stride == 1 && pad == 0;

  Tensor<T> out(Shape{B, Cout, Ho, Wo});
  AlignedVector<T> cols(pointwise ? 0 : static_cast<size_t>(K * P));
  MapC<T> Wm(vw.ptr(), Cout, K);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(vb.ptr(), Cout);
  for (int64_t n = 0; n < B; ++n) {
    const T* xn = vx.ptr() + n * C * H * W;
    const T* cp = xn;
    if (!pointwise) {
      im2col(xn, C, H, W, k, stride, pad, Ho, Wo, cols.data());
      cp = cols.data();
    }
    if (pointwise) {
      // Same operation sequence at every pixel, so the result cannot depend
      // on where a pixel sits relative to SIMD boundaries.
      T* y = out.ptr() + n * Cout * P;
      for (int64_t f = 0; f < Cout; ++f) {
        T* yf = y + f * P;
        std::fill(yf, yf + P, vb[f]);
        for (int64_t c = 0; c < C; ++c) {
          const T wf = vw[f * C + c];
          const T* xc = cp + c * P;
          for (int64_t p = 0; p < P; ++p) yf[p] += wf * xc[p];
        }
      }
      continue;
    }
    MapM<T> Y(out.ptr() + n * Cout * P, Cout, P);
    Y.noalias() = Wm * MapC<T>(cp, K, P);
    Y.colwise() += bias;
  }
  const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.record(std::move(out), ng,
                  [&t, x, w, b, B, C, H, W, Cout, k, stride, pad, Ho, Wo, K, P,
                   pointwise](std::span<const T> g) {
                    const Tensor<T>& vx = t.value(x);
                    const Tensor<T>& vw = t.value(w);
                    const bool gx = t.needs_grad(x), gw = t.needs_grad(w), gb = t.needs_grad(b);
                    T* dx = gx ? t.grad_buffer(x).data() : nullptr;
                    T* dw = gw ? t.grad_buffer(w).data() : nullptr;
                    T* db = gb ? t.grad_buffer(b).data() : nullptr;
                    AlignedVector<T> cols(pointwise ? 0 : static_cast<size_t>(K * P));
                    AlignedVector<T> dcols(pointwise || !gx ? 0 : static_cast<size_t>(K * P));
                    MapC<T> Wm(vw.ptr(), Cout, K);
                    for (int64_t n = 0; n < B; ++n) {
                      MapC<T> G(g.data() + n * Cout * P, Cout, P);
                      if (gw) {
                        const T* cp = vx.ptr() + n * C * H * W;
                        if (!pointwise) {
                          im2col(cp, C, H, W, k, stride, pad, Ho, Wo, cols.data());
                          cp = cols.data();
                        }
                        MapM<T>(dw, Cout, K).noalias() += G * MapC<T>(cp, K, P).transpose();
                      }
                      if (gb) {
                        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(db, Cout) += G.rowwise().sum();
                      }
                      if (gx) {
                        T* dxn = dx + n * C * H * W;
                        if (pointwise) {
                          MapM<T>(dxn, C, P).noalias() += Wm.transpose() * G;
                        } else {
                          MapM<T>(dcols.data(), K, P).noalias() = Wm.transpose() * G;
                          col2im_add(dcols.data(), C, H, W, k, stride, pad, Ho, Wo, dxn);
                        }
                      }
                    }
                  });
}

template <typename T>
Var<T> maxpool2d(Var<T> x, int kernel, int stride) {
  Tape<T>& t = *x.tape;
  const Tensor<T>& vx = t.value(x);
  if (vx.rank() != 4) throw ConfigError("maxpool2d: expected [B,C,H,W]");
  if (kernel < 1 || stride < 1) throw ConfigError("maxpool2d: kernel and stride must be >= 1");
  const int64_t B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  const int64_t Ho = window_out(H, kernel, stride, 0), Wo = window_out(W, kernel, stride, 0);
  if (Ho <= 0 || Wo <= 0) throw ConfigError("maxpool2d: window larger than input");
  Tensor<T> out(Shape{B, C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.numel()));
  int64_t o = 0;
  for (int64_t plane = 0; plane < B * C; ++plane) {
    const int64_t base = plane * H * W;
    for (int64_t oh = 0; oh < Ho; ++oh) {
      for (int64_t ow = 0; ow < Wo; ++ow, ++o) {
        int64_t best = base + (oh * stride) * W + ow * stride;
        for (int i = 0; i < kernel; ++i) {
          for (int j = 0; j < kernel; ++j) {
            const int64_t idx = base + (oh * stride + i) * W + ow * stride + j;
            if (vx[idx] > vx[best]) best = idx;
          }
        }
        out[o] = vx[best];
        (*argmax)[static_cast<size_t>(o)] = best;
      }
    }
  }
  return t.record(std::move(out), t.needs_grad(x), [&t, x, argmax](std::span<const T> g) {
    auto gx = t.grad_buffer(x);
    for (size_t i = 0; i < g.size(); ++i) gx[static_cast<size_t>((*argmax)[i])] += g[i];
  });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels) {
  Tape<T>& t = *logits.tape;
  const Tensor<T>& z = t.value(logits);
  if (z.rank() != 2) throw InputError("softmax_cross_entropy: logits must be [B,K]");
  const int64_t B = z.dim(0), K = z.dim(1);
  if (B == 0) throw InputError("softmax_cross_entropy: empty batch");
  if (static_cast<int64_t>(labels.size()) != B) {
    throw InputError("softmax_cross_entropy: label count does not match batch");
  }
  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(B * K));
  std::vector<int> lab(labels.begin(), labels.end());
  T total{0};
  for (int64_t i = 0; i < B; ++i) {
    if (lab[i] < 0 || lab[i] >= K) {
      throw InputError("softmax_cross_entropy: label " + std::to_string(lab[i]) +
                       " outside [0," + std::to_string(K) + ")");
    }
    const T* row = z.ptr() + i * K;
    const T m = *std::max_element(row, row + K);
    T s{0};
    for (int64_t j = 0; j < K; ++j) s += std::exp(row[j] - m);
    const T lse = m + std::log(s);
    total += lse - row[lab[i]];
    for (int64_t j = 0; j < K; ++j) (*probs)[i * K + j] = std::exp(row[j] - lse);
  }
  Tensor<T> out(Shape{1}, std::vector<T>{total / static_cast<T>(B)});
  return t.record(std::move(out), t.needs_grad(logits),
                  [&t, logits, probs, lab = std::move(lab), B, K](std::span<const T> g) {
                    auto gz = t.grad_buffer(logits);
                    const T s = g[0] / static_cast<T>(B);
                    for (int64_t i = 0; i < B; ++i) {
                      for (int64_t j = 0; j < K; ++j) {
                        const T target = j == lab[i] ? T{1} : T{0};
                        gz[i * K + j] += s * ((*probs)[i * K + j] - target);
                      }
                    }
                  });
}

#define ANTFORGE_INSTANTIATE(T)                                                 \
  template class Tape<T>;                                                       \
  template Var<T> add(Var<T>, Var<T>);                                          \
  template Var<T> mul(Var<T>, Var<T>);                                          \
  template Var<T> scale(Var<T>, T);                                             \
  template Var<T> scale_rows(Var<T>, std::vector<T>);                           \
  template Var<T> scale_rows_renorm(Var<T>, std::vector<T>, std::vector<uint8_t>); \
  template Var<T> relu(Var<T>);                                                 \
  template Var<T> clip01(Var<T>);                                               \
  template Var<T> sum(Var<T>);                                                  \
  template Var<T> reshape(Var<T>, Shape);                                       \
  template Var<T> flatten(Var<T>);                                              \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                               \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, int, int);                     \
  template Var<T> maxpool2d(Var<T>, int, int);                                  \
  template Var<T> softmax_cross_entropy(Var<T>, std::span<const int>);

ANTFORGE_INSTANTIATE(float)
ANTFORGE_INSTANTIATE(double)

}  // namespace antforge
