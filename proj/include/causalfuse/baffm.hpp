#pragma once

// Back-door adjusted feature fusion.
//
//   out = W_h x + W_g,vis E_vis + W_g,ir E_ir
//   E   = sum_i lambda_i z_i P(z_i),   P(z_i) = 1/N
//   lambda = softmax_i( (W_q pool(x)) . (W_k z_i) / sqrt(d_q) )
//
// x is the joint C x H x W feature map; pool is the spatial mean, so there is
// one attention weight per dictionary entry per image. The confounder terms
// are channel offsets broadcast over all positions.

#include <cmath>
#include <string>

#include "causalfuse/error.hpp"
#include "causalfuse/tensor.hpp"

namespace causalfuse {

struct BaffmParams {
  Tensor w_q;      // d_q x C
  Tensor w_k;      // d_q x d
  Tensor w_h;      // C_out x C
  Tensor w_g_vis;  // C_out x d
  Tensor w_g_ir;   // C_out x d

  std::size_t attention_dim() const { return w_q.dim(0); }
  std::size_t in_channels() const { return w_q.dim(1); }
  std::size_t out_channels() const { return w_h.dim(0); }
  std::size_t confounder_dim() const { return w_k.dim(1); }
};

/// Softmax attention of the pooled feature map over the N dictionary rows.
/// `dictionary` is an N x d tensor.
inline Tensor attention_weights(const Tensor& x, const Tensor& dictionary, const BaffmParams& p) {
  if (x.rank() != 3 || x.dim(0) != p.in_channels())
    throw DimensionError("attention_weights: feature map " + shape_string(x.shape()) + " does not match W_q " +
                         shape_string(p.w_q.shape()));
  if (dictionary.rank() != 2 || dictionary.dim(1) != p.confounder_dim())
    throw DimensionError("attention_weights: dictionary " + shape_string(dictionary.shape()) +
                         " does not match W_k " + shape_string(p.w_k.shape()));
  const std::size_t n = dictionary.dim(0);
  const Tensor query = matmul(p.w_q, reshape(global_avg_pool(x), {p.in_channels(), 1}));  // d_q x 1
  const Tensor keys = matmul(p.w_k, transpose(dictionary));  // d_q x N
  const Tensor logits = matmul(reshape(query, {1, p.attention_dim()}), keys);  // 1 x N
  return softmax(reshape(scale(logits, 1.0 / std::sqrt(static_cast<double>(p.attention_dim()))), {n}));
}

/// Weighted integration with the uniform prior, (1/N) sum_i lambda_i z_i, for
/// softmax weights. The sum is taken as z_0 + sum_i lambda_i (z_i - z_0), which
/// is the same quantity when the weights sum to one but stays exact when every
/// row is equal. The dictionary is a constant: no gradient reaches it.
inline Tensor expected_confounder(const Tensor& lambda, const Tensor& dictionary) {
  if (lambda.rank() != 1 || dictionary.rank() != 2 || lambda.dim(0) != dictionary.dim(0))
    throw DimensionError("expected_confounder: weights " + shape_string(lambda.shape()) + " do not match dictionary " +
                         shape_string(dictionary.shape()));
  const std::size_t n = dictionary.dim(0), d = dictionary.dim(1);
  const auto z = dictionary.values();
  std::vector<double> base(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(d)), centered(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered[i * d + j] = z[i * d + j] - base[j];
  const Tensor weighted = matmul(reshape(lambda, {1, n}), Tensor({n, d}, std::move(centered)));  // 1 x d
  const Tensor total = add(Tensor({1, d}, std::move(base)), weighted);
  return reshape(div(total, Tensor({1, d}, std::vector<double>(d, static_cast<double>(n)))), {d});
}

/// W_h x as a 1x1 channel projection.
inline Tensor content_projection(const Tensor& x, const BaffmParams& p) {
  if (x.rank() != 3 || x.dim(0) != p.w_h.dim(1))
    throw DimensionError("content_projection: feature map " + shape_string(x.shape()) + " does not match W_h " +
                         shape_string(p.w_h.shape()));
  const std::size_t h = x.dim(1), w = x.dim(2);
  return reshape(matmul(p.w_h, reshape(x, {x.dim(0), h * w})), {p.out_channels(), h, w});
}

/// Deconfounded features. With `backdoor == false` only the content path runs
/// (the no-adjustment baseline).
inline Tensor deconfounded_fuse(const Tensor& x, const Tensor& z_vis, const Tensor& z_ir, const BaffmParams& p,
                                bool backdoor = true) {
  const Tensor content = content_projection(x, p);
  if (!backdoor) return content;
  if (z_vis.rank() != 2 || z_ir.rank() != 2 || z_vis.dim(1) != p.w_g_vis.dim(1) || z_ir.dim(1) != p.w_g_ir.dim(1))
    throw DimensionError("deconfounded_fuse: dictionaries " + shape_string(z_vis.shape()) + " / " +
                         shape_string(z_ir.shape()) + " do not match W_g " + shape_string(p.w_g_vis.shape()));
  const std::size_t d = p.confounder_dim();
  const Tensor e_vis = expected_confounder(attention_weights(x, z_vis, p), z_vis);
  const Tensor e_ir = expected_confounder(attention_weights(x, z_ir, p), z_ir);
  const Tensor offset = add(matmul(p.w_g_vis, reshape(e_vis, {d, 1})), matmul(p.w_g_ir, reshape(e_ir, {d, 1})));
  return add_channel_offset(content, reshape(offset, {p.out_channels()}));
}

}  // namespace causalfuse
