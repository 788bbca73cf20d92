#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "causalfuse/error.hpp"
#include "causalfuse/filters.hpp"
#include "causalfuse/fusionnet.hpp"
#include "causalfuse/image.hpp"
#include "causalfuse/param_store.hpp"
#include "causalfuse/rng.hpp"
#include "causalfuse/scenegen.hpp"
#include "causalfuse/tensor.hpp"

namespace causalfuse {

struct LossConfig {
  double alpha = 1.0;  // intensity
  double beta = 1.0;   // gradient
  double gamma = 0.5;  // structure

  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) throw ContractError("loss weights must be non-negative");
    if (alpha == 0.0 && beta == 0.0 && gamma == 0.0) throw ContractError("loss weights must not all be zero");
  }
};

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 6;
  std::size_t epochs = 30;
  std::size_t crop = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0) throw ContractError("batch size must be at least 1");
    if (crop == 0) throw ContractError("crop must be positive");
    if (!(lr > 0.0)) throw ContractError("learning rate must be positive");
  }
};

// ---------------------------------------------------------------------------
// Loss

namespace loss_detail {

inline constexpr double kC1 = 0.01 * 0.01;
inline constexpr double kC2 = 0.03 * 0.03;

inline const std::vector<double>& ssim_taps() {
  static const std::vector<double> taps = filters::gaussian_taps(5, 1.5);
  return taps;
}

inline Tensor sobel_kernel(bool horizontal) {
  if (horizontal) return Tensor({1, 1, 3, 3}, {-1, 0, 1, -2, 0, 2, -1, 0, 1});
  return Tensor({1, 1, 3, 3}, {-1, -2, -1, 0, 0, 0, 1, 2, 1});
}

/// Source gradient with the larger magnitude at each pixel (infrared on ties).
inline Tensor dominant_gradient(const Tensor& ir, const Tensor& vis, const Tensor& kernel) {
  const Tensor gi = conv2d(ir, kernel);
  const Tensor gv = conv2d(vis, kernel);
  std::vector<double> out(gi.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(gi[i]) >= std::fabs(gv[i]) ? gi[i] : gv[i];
  return Tensor(gi.shape(), std::move(out));
}

struct BlurredSelf {
  Tensor mu;
  Tensor second_moment;  // blur(y*y)
};

/// Mean SSIM map of y against a constant reference with a border-normalized
/// Gaussian window, so it is defined for any image size.
inline Tensor smooth_ssim(const Tensor& y, const BlurredSelf& ys, const Tensor& ref) {
  const auto& taps = ssim_taps();
  const Tensor mu_r = blur(ref, taps);
  const Tensor var_r = sub(blur(mul(ref, ref), taps), mul(mu_r, mu_r));
  const Tensor mu_y2 = mul(ys.mu, ys.mu);
  const Tensor var_y = sub(ys.second_moment, mu_y2);
  const Tensor cov = sub(blur(mul(y, ref), taps), mul(ys.mu, mu_r));
  const Tensor num = mul(add_scalar(scale(mul(ys.mu, mu_r), 2.0), kC1), add_scalar(scale(cov, 2.0), kC2));
  const Tensor den = mul(add_scalar(add(mu_y2, mul(mu_r, mu_r)), kC1), add_scalar(add(var_y, var_r), kC2));
  return mean(div(num, den));
}

}  // namespace loss_detail

struct LossTerms {
  Tensor total;
  double intensity = 0.0;
  double gradient = 0.0;
  double structure = 0.0;
};

/// alpha * mean|y - max(ir, vis)|
/// + beta * mean over Sobel directions of mean|grad y - dominant source grad|
/// + gamma * (1 - (SSIM(y, ir) + SSIM(y, vis)) / 2)
inline LossTerms fusion_loss_terms(const Tensor& y, const Image& ir, const Image& vis, const LossConfig& cfg) {
  cfg.validate();
  if (!ir.same_size(vis) || y.rank() != 3 || y.dim(0) != 1 || y.dim(1) != ir.height || y.dim(2) != ir.width)
    throw DimensionError("fusion_loss: fused " + shape_string(y.shape()) + " and sources " +
                         std::to_string(ir.height) + "x" + std::to_string(ir.width) + " / " +
                         std::to_string(vis.height) + "x" + std::to_string(vis.width) + " are not aligned");
  const Tensor tir = to_tensor(ir), tvis = to_tensor(vis);

  const Tensor intensity = mean(abs(sub(y, to_tensor(elementwise_max(ir, vis)))));

  const Tensor kx = loss_detail::sobel_kernel(true), ky = loss_detail::sobel_kernel(false);
  const Tensor gx = mean(abs(sub(conv2d(y, kx), loss_detail::dominant_gradient(tir, tvis, kx))));
  const Tensor gy = mean(abs(sub(conv2d(y, ky), loss_detail::dominant_gradient(tir, tvis, ky))));
  const Tensor gradient = scale(add(gx, gy), 0.5);

  const auto& taps = loss_detail::ssim_taps();
  const loss_detail::BlurredSelf ys{blur(y, taps), blur(mul(y, y), taps)};
  const Tensor ssim_pair = add(loss_detail::smooth_ssim(y, ys, tir), loss_detail::smooth_ssim(y, ys, tvis));
  const Tensor structure = add_scalar(scale(ssim_pair, -0.5), 1.0);

  LossTerms terms;
  terms.intensity = intensity.item();
  terms.gradient = gradient.item();
  terms.structure = structure.item();
  terms.total = add(add(scale(intensity, cfg.alpha), scale(gradient, cfg.beta)), scale(structure, cfg.gamma));
  return terms;
}

inline Tensor fusion_loss(const Tensor& y, const Image& ir, const Image& vis, const LossConfig& cfg) {
  return fusion_loss_terms(y, ir, vis, cfg).total;
}

// ---------------------------------------------------------------------------
// Augmentation

/// One crop window and one horizontal-flip decision, shared by both modalities.
inline ImagePair augment(const ImagePair& pair, std::size_t crop_size, Rng& rng) {
  if (!pair.ir.same_size(pair.vis)) throw DimensionError("augment: modalities differ in size");
  if (crop_size == 0 || crop_size > std::min(pair.ir.height, pair.ir.width))
    throw DimensionError("augment: crop " + std::to_string(crop_size) + " exceeds image size " +
                         std::to_string(pair.ir.height) + "x" + std::to_string(pair.ir.width));
  const auto top = static_cast<std::size_t>(rng.below(pair.ir.height - crop_size + 1));
  const auto left = static_cast<std::size_t>(rng.below(pair.ir.width - crop_size + 1));
  const bool flip = rng.coin(0.5);
  ImagePair out{crop(pair.ir, top, left, crop_size, crop_size), crop(pair.vis, top, left, crop_size, crop_size),
                pair.category, pair.id};
  if (flip) {
    out.ir = flip_horizontal(out.ir);
    out.vis = flip_horizontal(out.vis);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimization loop

struct TrainState {
  std::size_t epochs_completed = 0;
  std::vector<double> history;  // mean loss per completed epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss, const FusionModel&, const TrainState&)>;

/// Runs epochs [state.epochs_completed, cfg.epochs). Each epoch draws its
/// shuffle order and augmentation from derive_seed(cfg.seed, epoch), so a run
/// resumed from a saved checkpoint continues exactly like an uninterrupted one.
inline const std::vector<double>& train(FusionModel& model, std::span<const ImagePair> dataset, const TrainConfig& cfg,
                                        const LossConfig& loss_cfg, TrainState& state,
                                        const EpochCallback& on_epoch = {}) {
  if (dataset.empty()) throw ContractError("train: dataset is empty");
  cfg.validate();
  loss_cfg.validate();
  const AdamConfig adam{cfg.lr};
  auto& store = model.params();
  store.zero_grad();
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t epoch = state.epochs_completed; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 0xE90C000000ULL + epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const ImagePair sample = augment(dataset[order[b]], cfg.crop, rng);
        const Tensor fused = model.forward(to_tensor(sample.ir), to_tensor(sample.vis));
        const Tensor loss = fusion_loss(fused, sample.ir, sample.vis, loss_cfg);
        epoch_total += loss.item();
        backward(scale(loss, weight));
      }
      adam_step(store, adam);
      store.zero_grad();
    }
    state.history.push_back(epoch_total / static_cast<double>(order.size()));
    state.epochs_completed = epoch + 1;
    if (on_epoch) on_epoch(epoch, state.history.back(), model, state);
  }
  return state.history;
}

}  // namespace causalfuse
