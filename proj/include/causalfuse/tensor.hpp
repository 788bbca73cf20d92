#pragma once

// Dense row-major tensor with tape-free reverse-mode differentiation.
//
// Every operation on tensors that require gradients records its inputs and a
// backward closure on the result node. backward() walks the reachable graph in
// reverse topological order. Leaf gradients accumulate until zero_grad().

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "causalfuse/error.hpp"
#include "causalfuse/filters.hpp"

namespace causalfuse {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
    for (auto d : shape)
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    if (shape_size(shape) != values.size())
      throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                           std::to_string(values.size()) + " values");
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor filled(Shape shape, double value) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  bool defined() const noexcept { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  /// Gradient values, or zeros when nothing has been accumulated.
  std::vector<double> grad_or_zeros() const {
    return has_grad() ? node_->grad : std::vector<double>(size(), 0.0);
  }
  void zero_grad() { node_->grad.clear(); }

  /// Same values, no history, no gradient requirement.
  Tensor detach() const { return Tensor(shape(), node_->value); }

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Disables graph recording on this thread for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

inline Tensor record(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> inputs,
                     std::function<void(Node&)> backward) {
  Tensor out(std::move(shape), std::move(value));
  bool any = false;
  if (grad_mode())
    for (const Tensor* t : inputs) any = any || t->requires_grad();
  if (any) {
    auto& node = out.node();
    node.requires_grad = true;
    for (const Tensor* t : inputs) node.parents.push_back(t->node_ptr());
    node.backward = std::move(backward);
  }
  return out;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

// Accumulate `delta(i)` into parent `p`'s gradient if it participates.
template <class F>
void accumulate(Node& self, std::size_t p, F&& delta) {
  Node& parent = *self.parents[p];
  if (!parent.requires_grad) return;
  auto& g = parent.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta(i);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + b[i];
  return detail::record(a.shape(), std::move(v), {&a, &b}, [](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
    detail::accumulate(self, 1, [&](std::size_t i) { return self.grad[i]; });
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] - b[i];
  return detail::record(a.shape(), std::move(v), {&a, &b}, [](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
    detail::accumulate(self, 1, [&](std::size_t i) { return -self.grad[i]; });
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * b[i];
  return detail::record(a.shape(), std::move(v), {&a, &b}, [](detail::Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i] * bv[i]; });
    detail::accumulate(self, 1, [&](std::size_t i) { return self.grad[i] * av[i]; });
  });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "div");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] / b[i];
  return detail::record(a.shape(), std::move(v), {&a, &b}, [](detail::Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i] / bv[i]; });
    detail::accumulate(self, 1, [&](std::size_t i) { return -self.grad[i] * av[i] / (bv[i] * bv[i]); });
  });
}

inline Tensor scale(const Tensor& a, double s) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * s;
  return detail::record(a.shape(), std::move(v), {&a}, [s](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i] * s; });
  });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + s;
  return detail::record(a.shape(), std::move(v), {&a}, [](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
  });
}

/// |x| with subgradient 0 at the kink.
inline Tensor abs(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::fabs(a[i]);
  return detail::record(a.shape(), std::move(v), {&a}, [](detail::Node& self) {
    const auto& av = self.parents[0]->value;
    detail::accumulate(self, 0, [&](std::size_t i) {
      return av[i] > 0.0 ? self.grad[i] : (av[i] < 0.0 ? -self.grad[i] : 0.0);
    });
  });
}

inline Tensor tanh_map(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a[i]);
  return detail::record(a.shape(), std::move(v), {&a}, [](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) {
      const double t = self.value[i];
      return self.grad[i] * (1.0 - t * t);
    });
  });
}

// ---------------------------------------------------------------------------
// Reductions and shape

inline Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.values()) total += x;
  return detail::record({1}, {total}, {&a}, [](detail::Node& self) {
    const double g = self.grad[0];
    detail::accumulate(self, 0, [&](std::size_t) { return g; });
  });
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  std::vector<double> v(a.values().begin(), a.values().end());
  return detail::record(std::move(shape), std::move(v), {&a}, [](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
  });
}

/// Concatenates along the leading axis; trailing dimensions must agree.
inline Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1))
    throw DimensionError("concat: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> v;
  v.reserve(a.size() + b.size());
  v.insert(v.end(), a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  const std::size_t split = a.size();
  return detail::record(std::move(shape), std::move(v), {&a, &b}, [split](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
    detail::accumulate(self, 1, [&](std::size_t i) { return self.grad[split + i]; });
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> v(m * n, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = &bv[p * n];
      double* out = &v[i * n];
      for (std::size_t j = 0; j < n; ++j) out[j] += aip * brow[j];
    }
  return detail::record({m, n}, std::move(v), {&a, &b}, [m, k, n](detail::Node& self) {
    const auto& g = self.grad;
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb.value[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.value[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose: expected a matrix, got " + shape_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[j * m + i] = a[i * n + j];
  return detail::record({n, m}, std::move(v), {&a}, [m, n](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t idx) { return self.grad[(idx % n) * m + idx / n]; });
  });
}

namespace detail {

// out[co] += sum_ci kernel[co][ci] (*) in[ci], zero padding, same size.
inline void conv_forward(const double* in, const double* kernel, double* out, std::size_t c_in,
                         std::size_t c_out, std::size_t h, std::size_t w, std::size_t k) {
  const long pad = static_cast<long>(k / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  for (std::size_t co = 0; co < c_out; ++co)
    for (std::size_t ci = 0; ci < c_in; ++ci)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wgt = kernel[((co * c_in + ci) * k + ky) * k + kx];
          if (wgt == 0.0) continue;
          const long dy = static_cast<long>(ky) - pad;
          const long dx = static_cast<long>(kx) - pad;
          const long y0 = std::max(0L, -dy), y1 = std::min(H, H - dy);
          const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
          for (long y = y0; y < y1; ++y) {
            double* orow = out + (co * h + static_cast<std::size_t>(y)) * w;
            const double* irow = in + (ci * h + static_cast<std::size_t>(y + dy)) * w;
            for (long x = x0; x < x1; ++x) orow[x] += wgt * irow[x + dx];
          }
        }
}

}  // namespace detail

/// Same-size 2D cross-correlation with zero padding (k-1)/2.
/// input C_in x H x W, kernel C_out x C_in x k x k, bias C_out or undefined.
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias = Tensor{}) {
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3))
    throw DimensionError("conv2d: kernel must be C_out x C_in x k x k, got " + shape_string(kernel.shape()));
  const std::size_t k = kernel.dim(2);
  if (k % 2 == 0) throw UnsupportedKernelError("conv2d: kernel size " + std::to_string(k) + " is even");
  if (input.rank() != 3 || input.dim(0) != kernel.dim(1))
    throw DimensionError("conv2d: input " + shape_string(input.shape()) + " does not match kernel " +
                         shape_string(kernel.shape()));
  const std::size_t c_out = kernel.dim(0), c_in = kernel.dim(1), h = input.dim(1), w = input.dim(2);
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != c_out))
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(c_out) + " output channels");

  std::vector<double> v(c_out * h * w, 0.0);
  if (has_bias)
    for (std::size_t co = 0; co < c_out; ++co) std::fill_n(v.begin() + co * h * w, h * w, bias[co]);
  detail::conv_forward(input.values().data(), kernel.values().data(), v.data(), c_in, c_out, h, w, k);

  auto backward = [c_in, c_out, h, w, k, has_bias](detail::Node& self) {
    const auto& g = self.grad;
    auto& pin = *self.parents[0];
    auto& pk = *self.parents[1];
    const long pad = static_cast<long>(k / 2);
    const long H = static_cast<long>(h), W = static_cast<long>(w);
    double* gin = pin.requires_grad ? pin.grad_buffer().data() : nullptr;
    double* gk = pk.requires_grad ? pk.grad_buffer().data() : nullptr;
    for (std::size_t co = 0; co < c_out; ++co)
      for (std::size_t ci = 0; ci < c_in; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((co * c_in + ci) * k + ky) * k + kx;
            const double wgt = pk.value[widx];
            const long dy = static_cast<long>(ky) - pad;
            const long dx = static_cast<long>(kx) - pad;
            const long y0 = std::max(0L, -dy), y1 = std::min(H, H - dy);
            const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
            double acc = 0.0;
            for (long y = y0; y < y1; ++y) {
              const double* grow = g.data() + (co * h + static_cast<std::size_t>(y)) * w;
              const std::size_t in_off = (ci * h + static_cast<std::size_t>(y + dy)) * w;
              const double* irow = pin.value.data() + in_off;
              if (gin) {
                double* girow = gin + in_off;
                for (long x = x0; x < x1; ++x) girow[x + dx] += wgt * grow[x];
              }
              if (gk)
                for (long x = x0; x < x1; ++x) acc += grow[x] * irow[x + dx];
            }
            if (gk) gk[widx] += acc;
          }
    if (has_bias && self.parents[2]->requires_grad) {
      auto& gb = self.parents[2]->grad_buffer();
      for (std::size_t co = 0; co < c_out; ++co)
        for (std::size_t i = 0; i < h * w; ++i) gb[co] += g[co * h * w + i];
    }
  };
  if (has_bias) return detail::record({c_out, h, w}, std::move(v), {&input, &kernel, &bias}, backward);
  return detail::record({c_out, h, w}, std::move(v), {&input, &kernel}, backward);
}

/// Softmax over a vector, with max-subtraction.
inline Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) throw DimensionError("softmax: expected a vector, got " + shape_string(logits.shape()));
  const auto lv = logits.values();
  const double peak = *std::max_element(lv.begin(), lv.end());
  std::vector<double> v(lv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += (v[i] = std::exp(lv[i] - peak));
  for (double& x : v) x /= total;
  return detail::record(logits.shape(), std::move(v), {&logits}, [](detail::Node& self) {
    double dot = 0.0;
    for (std::size_t i = 0; i < self.value.size(); ++i) dot += self.grad[i] * self.value[i];
    detail::accumulate(self, 0, [&](std::size_t i) { return self.value[i] * (self.grad[i] - dot); });
  });
}

/// C x H x W -> C, spatial mean per channel.
inline Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("global_avg_pool: expected C x H x W, got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), area = x.dim(1) * x.dim(2);
  std::vector<double> v(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < area; ++i) acc += x[ch * area + i];
    v[ch] = acc / static_cast<double>(area);
  }
  return detail::record({c}, std::move(v), {&x}, [area](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i / area] / static_cast<double>(area); });
  });
}

/// x[c, :, :] + offset[c]; the offset is broadcast over space.
inline Tensor add_channel_offset(const Tensor& x, const Tensor& offset) {
  if (x.rank() != 3 || offset.rank() != 1 || offset.dim(0) != x.dim(0))
    throw DimensionError("add_channel_offset: " + shape_string(offset.shape()) + " cannot offset " +
                         shape_string(x.shape()));
  const std::size_t c = x.dim(0), area = x.dim(1) * x.dim(2);
  std::vector<double> v(x.values().begin(), x.values().end());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < area; ++i) v[ch * area + i] += offset[ch];
  return detail::record(x.shape(), std::move(v), {&x, &offset}, [c, area](detail::Node& self) {
    detail::accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
    if (self.parents[1]->requires_grad) {
      auto& go = self.parents[1]->grad_buffer();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < area; ++i) go[ch] += self.grad[ch * area + i];
    }
  });
}

/// Separable blur of every channel of a C x H x W tensor, normalized by the
/// kernel mass that falls inside the image (no darkening at borders).
inline Tensor blur(const Tensor& x, const std::vector<double>& taps) {
  if (x.rank() != 3) throw DimensionError("blur: expected C x H x W, got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), area = h * w;
  auto mass = filters::coverage(h, w, taps);
  std::vector<double> v(x.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    auto plane = filters::separable_same(x.values().subspan(ch * area, area), h, w, taps, filters::Border::zero);
    for (std::size_t i = 0; i < area; ++i) v[ch * area + i] = plane[i] / mass[i];
  }
  return detail::record(x.shape(), std::move(v), {&x},
                        [c, h, w, area, taps, mass = std::move(mass)](detail::Node& self) {
                          if (!self.parents[0]->requires_grad) return;
                          auto& gx = self.parents[0]->grad_buffer();
                          std::vector<double> scaled(area);
                          // symmetric taps: the adjoint of correlation is correlation
                          for (std::size_t ch = 0; ch < c; ++ch) {
                            for (std::size_t i = 0; i < area; ++i) scaled[i] = self.grad[ch * area + i] / mass[i];
                            auto back = filters::separable_same(scaled, h, w, taps, filters::Border::zero);
                            for (std::size_t i = 0; i < area; ++i) gx[ch * area + i] += back[i];
                          }
                        });
}

// ---------------------------------------------------------------------------

/// Reverse sweep from a scalar. Intermediate gradients are recomputed on each
/// call; leaf gradients accumulate.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ContractError("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{&loss.node(), 0}};
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (detail::Node* n : order)
    if (n->backward) n->grad.clear();
  loss.node().grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward && !(*it)->grad.empty()) (*it)->backward(**it);
}

}  // namespace causalfuse
