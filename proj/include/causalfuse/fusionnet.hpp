#pragma once

// Fusion network: per-modality conv stems -> merge conv -> back-door fusion
// -> conv + tanh reconstruction mapped to (0, 1).

#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "causalfuse/baffm.hpp"
#include "causalfuse/confounder.hpp"
#include "causalfuse/error.hpp"
#include "causalfuse/image.hpp"
#include "causalfuse/param_store.hpp"
#include "causalfuse/rng.hpp"
#include "causalfuse/tensor.hpp"

namespace causalfuse {

struct FusionConfig {
  std::size_t stem_channels = 8;
  std::size_t feature_channels = 16;  // C, width of the joint feature map
  std::size_t fused_channels = 16;    // C_out of the fusion module
  std::size_t attention_dim = 16;     // d_q
  std::size_t kernel = 3;
  bool backdoor = true;  // false: no-adjustment baseline, W_g zeroed and frozen
  std::uint64_t init_seed = 0;

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

inline nlohmann::json to_json(const FusionConfig& c) {
  return {{"stem_channels", c.stem_channels}, {"feature_channels", c.feature_channels},
          {"fused_channels", c.fused_channels}, {"attention_dim", c.attention_dim},
          {"kernel", c.kernel},                 {"backdoor", c.backdoor},
          {"init_seed", c.init_seed}};
}

inline FusionConfig fusion_config_from_json(const nlohmann::json& j) {
  FusionConfig c;
  c.stem_channels = j.at("stem_channels").get<std::size_t>();
  c.feature_channels = j.at("feature_channels").get<std::size_t>();
  c.fused_channels = j.at("fused_channels").get<std::size_t>();
  c.attention_dim = j.at("attention_dim").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.backdoor = j.at("backdoor").get<bool>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

namespace param_names {
inline constexpr const char* kStemIrWeight = "encoder.stem_ir.weight";
inline constexpr const char* kStemIrBias = "encoder.stem_ir.bias";
inline constexpr const char* kStemVisWeight = "encoder.stem_vis.weight";
inline constexpr const char* kStemVisBias = "encoder.stem_vis.bias";
inline constexpr const char* kMergeWeight = "encoder.merge.weight";
inline constexpr const char* kMergeBias = "encoder.merge.bias";
inline constexpr const char* kWq = "baffm.w_q";
inline constexpr const char* kWk = "baffm.w_k";
inline constexpr const char* kWh = "baffm.w_h";
inline constexpr const char* kWgVis = "baffm.w_g_vis";
inline constexpr const char* kWgIr = "baffm.w_g_ir";
inline constexpr const char* kReconWeight = "reconstruct.weight";
inline constexpr const char* kReconBias = "reconstruct.bias";
}  // namespace param_names

class FusionModel {
 public:
  FusionModel(FusionConfig config, ConfounderDictionary visible, ConfounderDictionary infrared)
      : config_(config), dict_vis_(std::move(visible)), dict_ir_(std::move(infrared)) {
    if (config_.kernel % 2 == 0) throw UnsupportedKernelError("fusion model kernel size must be odd");
    if (dict_vis_.modality != Modality::visible || dict_ir_.modality != Modality::infrared)
      throw ContractError("fusion model needs one visible and one infrared dictionary");
    if (dict_vis_.dim() != dict_ir_.dim())
      throw DimensionError("visible and infrared dictionaries have different dimensions (" +
                           std::to_string(dict_vis_.dim()) + " vs " + std::to_string(dict_ir_.dim()) + ")");
    z_vis_ = dict_vis_.as_tensor();
    z_ir_ = dict_ir_.as_tensor();
    initialize();
    if (!config_.backdoor) disable_backdoor();
  }

  // Parameters are shared handles; copying would alias them.
  FusionModel(const FusionModel&) = delete;
  FusionModel& operator=(const FusionModel&) = delete;
  FusionModel(FusionModel&&) = default;
  FusionModel& operator=(FusionModel&&) = default;

  const FusionConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ConfounderDictionary& visible_dictionary() const { return dict_vis_; }
  const ConfounderDictionary& infrared_dictionary() const { return dict_ir_; }
  const Tensor& visible_dictionary_tensor() const { return z_vis_; }
  const Tensor& infrared_dictionary_tensor() const { return z_ir_; }

  /// Zeroes and freezes the confounder projections and the attention
  /// projections that only feed them.
  void disable_backdoor() {
    config_.backdoor = false;
    for (const char* name : {param_names::kWgVis, param_names::kWgIr}) {
      auto values = params_.at(name).mutable_values();
      std::fill(values.begin(), values.end(), 0.0);
    }
    for (const char* name : {param_names::kWgVis, param_names::kWgIr, param_names::kWq, param_names::kWk})
      params_.freeze(name);
  }

  /// Runs the full back-door branch even if the model was trained without it.
  /// Used to check that zeroed W_g reproduces the baseline exactly.
  void set_backdoor_active(bool active) { config_.backdoor = active; }

  BaffmParams baffm() const {
    return {params_.at(param_names::kWq), params_.at(param_names::kWk), params_.at(param_names::kWh),
            params_.at(param_names::kWgVis), params_.at(param_names::kWgIr)};
  }

  /// Joint feature map X: C x H x W.
  Tensor encode(const Tensor& ir, const Tensor& vis) const {
    if (ir.shape() != vis.shape())
      throw DimensionError("encode: infrared " + shape_string(ir.shape()) + " and visible " +
                           shape_string(vis.shape()) + " differ in size");
    using namespace param_names;
    const Tensor stem_ir = tanh_map(conv2d(ir, params_.at(kStemIrWeight), params_.at(kStemIrBias)));
    const Tensor stem_vis = tanh_map(conv2d(vis, params_.at(kStemVisWeight), params_.at(kStemVisBias)));
    return conv2d(concat(stem_ir, stem_vis), params_.at(kMergeWeight), params_.at(kMergeBias));
  }

  Tensor encode(const Image& ir, const Image& vis) const {
    if (!ir.same_size(vis)) throw DimensionError("encode: infrared and visible images differ in size");
    return encode(to_tensor(ir), to_tensor(vis));
  }

  Tensor deconfound(const Tensor& features) const {
    return deconfounded_fuse(features, z_vis_, z_ir_, baffm(), config_.backdoor);
  }

  /// Pre-activation of the output head (1 x H x W).
  Tensor head(const Tensor& fused_features) const {
    return conv2d(fused_features, params_.at(param_names::kReconWeight), params_.at(param_names::kReconBias));
  }

  /// Y = (tanh(conv(f)) + 1) / 2.
  Tensor reconstruct(const Tensor& fused_features) const {
    return scale(add_scalar(tanh_map(head(fused_features)), 1.0), 0.5);
  }

  Tensor forward(const Tensor& ir, const Tensor& vis) const { return reconstruct(deconfound(encode(ir, vis))); }

  Image fuse(const Image& ir, const Image& vis) const {
    if (!ir.same_size(vis)) throw DimensionError("fuse: infrared and visible images differ in size");
    NoGradGuard no_grad;
    return to_image(forward(to_tensor(ir), to_tensor(vis)));
  }

 private:
  void initialize() {
    using namespace param_names;
    Rng rng(derive_seed(config_.init_seed, 0x1A17));
    const std::size_t k = config_.kernel, cs = config_.stem_channels, c = config_.feature_channels;
    const std::size_t co = config_.fused_channels, dq = config_.attention_dim, d = dict_vis_.dim();
    auto normal = [&rng](Shape shape, double stddev) {
      std::vector<double> v(shape_size(shape));
      for (double& x : v) x = rng.normal(0.0, stddev);
      return Tensor(std::move(shape), std::move(v));
    };
    auto he = [](double fan_in) { return std::sqrt(2.0 / fan_in); };
    const double kk = static_cast<double>(k * k);
    params_.add(kStemIrWeight, normal({cs, 1, k, k}, he(kk)));
    params_.add(kStemIrBias, Tensor::zeros({cs}));
    params_.add(kStemVisWeight, normal({cs, 1, k, k}, he(kk)));
    params_.add(kStemVisBias, Tensor::zeros({cs}));
    params_.add(kMergeWeight, normal({c, 2 * cs, k, k}, 1.0 / std::sqrt(kk * 2.0 * static_cast<double>(cs))));
    params_.add(kMergeBias, Tensor::zeros({c}));
    params_.add(kWq, normal({dq, c}, 1.0 / std::sqrt(static_cast<double>(c))));
    params_.add(kWk, normal({dq, d}, 1.0 / std::sqrt(static_cast<double>(d))));
    params_.add(kWh, normal({co, c}, 1.0 / std::sqrt(static_cast<double>(c))));
    params_.add(kWgVis, normal({co, d}, 0.1 / std::sqrt(static_cast<double>(d))));
    params_.add(kWgIr, normal({co, d}, 0.1 / std::sqrt(static_cast<double>(d))));
    params_.add(kReconWeight, normal({1, co, k, k}, 1.0 / std::sqrt(kk * static_cast<double>(co))));
    params_.add(kReconBias, Tensor::zeros({1}));
  }

  FusionConfig config_;
  ConfounderDictionary dict_vis_;
  ConfounderDictionary dict_ir_;
  Tensor z_vis_;
  Tensor z_ir_;
  ParamStore params_;
};

}  // namespace causalfuse
