#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
// Every op builds a node holding its value and a closure that scatters the
// node's gradient into its inputs. Gradients are exact to double precision,
// which the finite-difference checks in the test suite rely on.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace tcc::ad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Dims = std::vector<int>;

inline std::size_t numel(const Dims& d) {
  return std::accumulate(d.begin(), d.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

inline std::string dims_str(const Dims& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
  return s + "]";
}

struct Node {
  Dims dims;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

namespace detail {
inline bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled()) { detail::grad_enabled() = false; }
  ~NoGradGuard() { detail::grad_enabled() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Dims& dims() const { return node_->dims; }
  std::size_t size() const { return node_->value.size(); }
  std::span<const double> value() const { return node_->value; }
  std::span<double> mutable_value() { return node_->value; }
  double item() const { return node_->value.at(0); }
  double operator[](std::size_t i) const { return node_->value[i]; }
  std::span<const double> grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& ptr() const { return node_; }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

 private:
  std::shared_ptr<Node> node_;
};

inline Var constant(Dims dims, std::vector<double> data) {
  if (numel(dims) != data.size())
    throw ShapeError("constant: data size does not match " + dims_str(dims));
  auto n = std::make_shared<Node>();
  n->dims = std::move(dims);
  n->value = std::move(data);
  return Var(std::move(n));
}

inline Var zeros(Dims dims) {
  std::size_t n = numel(dims);
  return constant(std::move(dims), std::vector<double>(n, 0.0));
}

// Leaf that accumulates gradient (a trainable parameter or a probed input).
inline Var leaf(Dims dims, std::vector<double> data) {
  Var v = constant(std::move(dims), std::move(data));
  v.node().requires_grad = true;
  return v;
}

namespace detail {

// Creates an op node. When no input requires grad (or recording is off) the
// node is a plain constant and the backward closure is dropped.
inline Var make_op(Dims dims, std::vector<double> value, std::vector<Var> inputs,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->dims = std::move(dims);
  n->value = std::move(value);
  bool needs = grad_enabled() &&
               std::any_of(inputs.begin(), inputs.end(),
                           [](const Var& v) { return v.requires_grad(); });
  if (needs) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& v : inputs) n->inputs.push_back(v.ptr());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

inline void require_same(const Var& a, const Var& b, const char* op) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(op) + ": shape mismatch " + dims_str(a.dims()) + " vs " +
                     dims_str(b.dims()));
}

template <typename F, typename G>
Var unary(const Var& x, F f, G df_from_xy) {
  std::vector<double> y(x.size());
  auto xv = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_op(x.dims(), std::move(y), {x}, [df_from_xy](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i)
      in.grad[i] += self.grad[i] * df_from_xy(in.value[i], self.value[i]);
  });
}

}  // namespace detail

inline void backward(const Var& root) {
  if (root.size() != 1) throw ShapeError("backward: root must be a scalar");
  if (!root.requires_grad()) return;
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root.node(), 0}};
  seen.insert(&root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->ensure_grad();
  root.node().grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

// ---- elementwise ---------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  detail::require_same(a, b, "add");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return detail::make_op(a.dims(), std::move(y), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      in->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same(a, b, "mul");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return detail::make_op(a.dims(), std::move(y), {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& z = *self.inputs[1];
    if (x.requires_grad) {
      x.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += self.grad[i] * z.value[i];
    }
    if (z.requires_grad) {
      z.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) z.grad[i] += self.grad[i] * x.value[i];
    }
  });
}

// NaN propagates.
inline Var relu(const Var& x) {
  return detail::unary(
      x, [](double v) { return v > 0.0 || std::isnan(v) ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var sigmoid(const Var& x) {
  return detail::unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

// max(|x|, floor); gradient sign(x) where |x| exceeds the floor, else 0.
inline Var abs_floor(const Var& x, double floor) {
  return detail::unary(
      x, [floor](double v) { return std::max(std::abs(v), floor); },
      [floor](double v, double) {
        if (std::abs(v) <= floor) return 0.0;
        return v > 0.0 ? 1.0 : -1.0;
      });
}

inline Var clamp_min(const Var& x, double lo) {
  return detail::unary(
      x, [lo](double v) { return std::max(v, lo); },
      [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

inline Var scale(const Var& x, double s) {
  return detail::unary(
      x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

// Sum of scalars (or equal-shaped tensors).
inline Var sum(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("sum of empty list");
  Var acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

// ---- vectors -------------------------------------------------------------

inline Var normalize(const Var& v) {
  double n2 = 0.0;
  for (double x : v.value()) n2 += x * x;
  double n = std::sqrt(n2);
  if (!(n > 0.0)) throw ShapeError("normalize: zero-norm vector");
  std::vector<double> y(v.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = v[i] / n;
  return detail::make_op(v.dims(), std::move(y), {v}, [n](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    // d(v/|v|) = (g - y (y.g)) / |v|
    double yg = 0.0;
    for (std::size_t i = 0; i < self.value.size(); ++i) yg += self.value[i] * self.grad[i];
    for (std::size_t i = 0; i < self.value.size(); ++i)
      in.grad[i] += (self.grad[i] - self.value[i] * yg) / n;
  });
}

// y = W x + b with W of dims {out, in}.
inline Var linear(const Var& x, const Var& weight, const Var& bias) {
  const int out = weight.dims().at(0), in = weight.dims().at(1);
  if (static_cast<int>(x.size()) != in || static_cast<int>(bias.size()) != out)
    throw ShapeError("linear: shape mismatch");
  std::vector<double> y(out);
  for (int o = 0; o < out; ++o) {
    double s = bias[o];
    for (int i = 0; i < in; ++i) s += weight[static_cast<std::size_t>(o) * in + i] * x[i];
    y[o] = s;
  }
  return detail::make_op({out}, std::move(y), {x, weight, bias}, [out, in](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    if (xn.requires_grad) {
      xn.ensure_grad();
      for (int o = 0; o < out; ++o)
        for (int i = 0; i < in; ++i)
          xn.grad[i] += wn.value[static_cast<std::size_t>(o) * in + i] * self.grad[o];
    }
    if (wn.requires_grad) {
      wn.ensure_grad();
      for (int o = 0; o < out; ++o)
        for (int i = 0; i < in; ++i)
          wn.grad[static_cast<std::size_t>(o) * in + i] += xn.value[i] * self.grad[o];
    }
    if (bn.requires_grad) {
      bn.ensure_grad();
      for (int o = 0; o < out; ++o) bn.grad[o] += self.grad[o];
    }
  });
}

// Angle between v and a constant target, radians. The cosine is clamped to
// [-1, 1]; at the clamp boundary the sub-gradient 0 is used.
inline Var angle_to(const Var& v, std::span<const double> target) {
  if (v.size() != target.size()) throw ShapeError("angle_to: size mismatch");
  double nv = 0.0, nt = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    nv += v[i] * v[i];
    nt += target[i] * target[i];
    dot += v[i] * target[i];
  }
  nv = std::sqrt(nv);
  nt = std::sqrt(nt);
  if (!(nv > 0.0) || !(nt > 0.0)) throw ShapeError("angle_to: zero-norm vector");
  double cosine = dot / (nv * nt);
  double clamped = std::clamp(cosine, -1.0, 1.0);
  std::vector<double> tgt(target.begin(), target.end());
  return detail::make_op({1}, {std::acos(clamped)}, {v},
                         [tgt = std::move(tgt), nv, nt, cosine](Node& self) {
                           Node& in = *self.inputs[0];
                           if (!in.requires_grad) return;
                           if (cosine >= 1.0 || cosine <= -1.0) return;
                           in.ensure_grad();
                           double dacos = -1.0 / std::sqrt(1.0 - cosine * cosine);
                           for (std::size_t i = 0; i < tgt.size(); ++i) {
                             double dcos = tgt[i] / (nv * nt) - cosine * in.value[i] / (nv * nv);
                             in.grad[i] += self.grad[0] * dacos * dcos;
                           }
                         });
}

// ---- feature maps {C, H, W} ----------------------------------------------

// 2-D cross-correlation with zero padding. weight {O, C, k, k}, bias {O} or
// undefined.
inline Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  if (x.dims().size() != 3 || weight.dims().size() != 4)
    throw ShapeError("conv2d: expected {C,H,W} input and {O,C,k,k} weight");
  const int C = x.dims()[0], H = x.dims()[1], W = x.dims()[2];
  const int O = weight.dims()[0], k = weight.dims()[2];
  if (weight.dims()[1] != C || weight.dims()[3] != k)
    throw ShapeError("conv2d: weight " + dims_str(weight.dims()) + " incompatible with input " +
                     dims_str(x.dims()));
  const int OH = (H + 2 * pad - k) / stride + 1;
  const int OW = (W + 2 * pad - k) / stride + 1;
  if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: input smaller than kernel");
  const bool has_bias = bias.defined();

  std::vector<double> y(static_cast<std::size_t>(O) * OH * OW, 0.0);
  auto xv = x.value();
  auto wv = weight.value();
  for (int o = 0; o < O; ++o) {
    double* yo = y.data() + static_cast<std::size_t>(o) * OH * OW;
    if (has_bias) std::fill(yo, yo + static_cast<std::size_t>(OH) * OW, bias[o]);
    for (int c = 0; c < C; ++c) {
      const double* xc = xv.data() + static_cast<std::size_t>(c) * H * W;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double w = wv[((static_cast<std::size_t>(o) * C + c) * k + ky) * k + kx];
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            const double* xrow = xc + static_cast<std::size_t>(iy) * W;
            double* yrow = yo + static_cast<std::size_t>(oy) * OW;
            int ox0 = 0;
            while (ox0 < OW && ox0 * stride - pad + kx < 0) ++ox0;
            int ox1 = OW;
            while (ox1 > ox0 && (ox1 - 1) * stride - pad + kx >= W) --ox1;
            for (int ox = ox0; ox < ox1; ++ox) yrow[ox] += w * xrow[ox * stride - pad + kx];
          }
        }
      }
    }
  }

  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return detail::make_op(
      {O, OH, OW}, std::move(y), std::move(inputs),
      [C, H, W, O, k, OH, OW, stride, pad, has_bias](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        const bool gx = xn.requires_grad, gw = wn.requires_grad;
        if (gx) xn.ensure_grad();
        if (gw) wn.ensure_grad();
        for (int o = 0; o < O; ++o) {
          const double* go = self.grad.data() + static_cast<std::size_t>(o) * OH * OW;
          for (int c = 0; c < C; ++c) {
            const std::size_t xoff = static_cast<std::size_t>(c) * H * W;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const std::size_t widx = ((static_cast<std::size_t>(o) * C + c) * k + ky) * k + kx;
                const double w = wn.value[widx];
                double gw_acc = 0.0;
                int ox0 = 0;
                while (ox0 < OW && ox0 * stride - pad + kx < 0) ++ox0;
                int ox1 = OW;
                while (ox1 > ox0 && (ox1 - 1) * stride - pad + kx >= W) --ox1;
                for (int oy = 0; oy < OH; ++oy) {
                  const int iy = oy * stride - pad + ky;
                  if (iy < 0 || iy >= H) continue;
                  const std::size_t row = xoff + static_cast<std::size_t>(iy) * W;
                  const double* grow = go + static_cast<std::size_t>(oy) * OW;
                  if (gx) {
                    double* gxrow = xn.grad.data() + row;
                    for (int ox = ox0; ox < ox1; ++ox) gxrow[ox * stride - pad + kx] += w * grow[ox];
                  }
                  if (gw) {
                    const double* xrow = xn.value.data() + row;
                    for (int ox = ox0; ox < ox1; ++ox) gw_acc += xrow[ox * stride - pad + kx] * grow[ox];
                  }
                }
                if (gw) wn.grad[widx] += gw_acc;
              }
            }
          }
        }
        if (has_bias) {
          Node& bn = *self.inputs[2];
          if (bn.requires_grad) {
            bn.ensure_grad();
            for (int o = 0; o < O; ++o) {
              const double* go = self.grad.data() + static_cast<std::size_t>(o) * OH * OW;
              double s = 0.0;
              for (int i = 0; i < OH * OW; ++i) s += go[i];
              bn.grad[o] += s;
            }
          }
        }
      });
}

inline Var slice_channels(const Var& x, int start, int count) {
  const int C = x.dims().at(0);
  if (start < 0 || count <= 0 || start + count > C) throw ShapeError("slice_channels: out of range");
  const std::size_t plane = x.size() / C;
  Dims d = x.dims();
  d[0] = count;
  auto xv = x.value();
  std::vector<double> y(xv.begin() + start * plane, xv.begin() + (start + count) * plane);
  return detail::make_op(std::move(d), std::move(y), {x}, [start, plane](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    const std::size_t off = start * plane;
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[off + i] += self.grad[i];
  });
}

inline Var concat_channels(const Var& a, const Var& b) {
  if (a.dims().size() != b.dims().size() ||
      !std::equal(a.dims().begin() + 1, a.dims().end(), b.dims().begin() + 1))
    throw ShapeError("concat_channels: spatial mismatch " + dims_str(a.dims()) + " vs " +
                     dims_str(b.dims()));
  Dims d = a.dims();
  d[0] += b.dims()[0];
  std::vector<double> y;
  y.reserve(a.size() + b.size());
  y.insert(y.end(), a.value().begin(), a.value().end());
  y.insert(y.end(), b.value().begin(), b.value().end());
  const std::size_t na = a.size();
  return detail::make_op(std::move(d), std::move(y), {a, b}, [na](Node& self) {
    Node& x = *self.inputs[0];
    Node& z = *self.inputs[1];
    if (x.requires_grad) {
      x.ensure_grad();
      for (std::size_t i = 0; i < na; ++i) x.grad[i] += self.grad[i];
    }
    if (z.requires_grad) {
      z.ensure_grad();
      for (std::size_t i = 0; i < z.grad.size(); ++i) z.grad[i] += self.grad[na + i];
    }
  });
}

// {C, H, W} -> {C}
inline Var global_avg_pool(const Var& x) {
  const int C = x.dims().at(0);
  const std::size_t plane = x.size() / C;
  std::vector<double> y(C, 0.0);
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += x[c * plane + i];
    y[c] = s / static_cast<double>(plane);
  }
  return detail::make_op({C}, std::move(y), {x}, [C, plane](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (int c = 0; c < C; ++c) {
      const double g = self.grad[c] / static_cast<double>(plane);
      for (std::size_t i = 0; i < plane; ++i) in.grad[c * plane + i] += g;
    }
  });
}

// Softmax-weighted spatial pooling of a {C,H,W} map by a {1,H,W} logit map.
inline Var confidence_pool(const Var& x, const Var& logits) {
  const int C = x.dims().at(0);
  const std::size_t plane = x.size() / C;
  if (logits.size() != plane) throw ShapeError("confidence_pool: logit map size mismatch");
  auto lv = logits.value();
  const double mx = *std::max_element(lv.begin(), lv.end());
  std::vector<double> w(plane);
  double z = 0.0;
  for (std::size_t i = 0; i < plane; ++i) z += (w[i] = std::exp(lv[i] - mx));
  for (double& v : w) v /= z;
  std::vector<double> y(C, 0.0);
  for (int c = 0; c < C; ++c)
    for (std::size_t i = 0; i < plane; ++i) y[c] += w[i] * x[c * plane + i];
  return detail::make_op({C}, y, {x, logits}, [C, plane, w, y](Node& self) {
    Node& xn = *self.inputs[0];
    Node& ln = *self.inputs[1];
    if (xn.requires_grad) {
      xn.ensure_grad();
      for (int c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) xn.grad[c * plane + i] += self.grad[c] * w[i];
    }
    if (ln.requires_grad) {
      ln.ensure_grad();
      // d y_c / d l_i = w_i (x_ci - y_c)
      for (std::size_t i = 0; i < plane; ++i) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += self.grad[c] * (xn.value[c * plane + i] - y[c]);
        ln.grad[i] += w[i] * s;
      }
    }
  });
}

// x[c, ...] / e[c] for a {3, H, W} map and a {3} divisor.
inline Var divide_channels(const Var& x, const Var& e) {
  const int C = x.dims().at(0);
  if (static_cast<int>(e.size()) != C) throw ShapeError("divide_channels: channel mismatch");
  const std::size_t plane = x.size() / C;
  std::vector<double> y(x.size());
  for (int c = 0; c < C; ++c)
    for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] = x[c * plane + i] / e[c];
  return detail::make_op(x.dims(), std::move(y), {x, e}, [C, plane](Node& self) {
    Node& xn = *self.inputs[0];
    Node& en = *self.inputs[1];
    if (xn.requires_grad) {
      xn.ensure_grad();
      for (int c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i)
          xn.grad[c * plane + i] += self.grad[c * plane + i] / en.value[c];
    }
    if (en.requires_grad) {
      en.ensure_grad();
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += self.grad[c * plane + i] * self.value[c * plane + i];
        en.grad[c] -= s / en.value[c];
      }
    }
  });
}

}  // namespace tcc::ad
