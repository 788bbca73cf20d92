#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalfuse/error.hpp"
#include "causalfuse/tensor.hpp"

namespace causalfuse {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Named learnable tensors plus Adam moment state.
///
/// Parameters keep insertion order so serialization and iteration are stable.
/// A frozen parameter has requires_grad == false and is never updated.
class ParamStore {
 public:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
  };

  /// Registers a parameter; the returned handle shares storage with the store.
  Tensor add(const std::string& name, Tensor value) {
    if (index_.count(name)) throw ContractError("parameter '" + name + "' already registered");
    value.set_requires_grad(true);
    index_[name] = names_.size();
    names_.push_back(name);
    params_.push_back(std::move(value));
    const auto n = params_.back().size();
    moments_.push_back({std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
    return params_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& at(const std::string& name) { return params_[lookup(name)]; }
  const Tensor& at(const std::string& name) const { return params_[lookup(name)]; }

  Moments& moments(const std::string& name) { return moments_[lookup(name)]; }
  const Moments& moments(const std::string& name) const { return moments_[lookup(name)]; }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }

  void freeze(const std::string& name) {
    auto& p = at(name);
    p.set_requires_grad(false);
    p.zero_grad();
  }
  bool frozen(const std::string& name) const { return !at(name).requires_grad(); }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

 private:
  friend void adam_step(ParamStore&, const AdamConfig&);

  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
  std::vector<Tensor> params_;
  std::vector<Moments> moments_;
  std::uint64_t step_ = 0;
  std::set<std::string> warned_;
};

/// One bias-corrected Adam update over every trainable parameter.
/// Parameters that require gradients but have none are skipped with a warning.
inline void adam_step(ParamStore& store, const AdamConfig& cfg) {
  ++store.step_;
  const double t = static_cast<double>(store.step_);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < store.params_.size(); ++p) {
    Tensor& param = store.params_[p];
    if (!param.requires_grad()) continue;
    if (!param.has_grad()) {
      if (store.warned_.insert(store.names_[p]).second)
        std::cerr << "warning: parameter '" << store.names_[p] << "' has no gradient; skipping update\n";
      continue;
    }
    auto& m = store.moments_[p].first;
    auto& v = store.moments_[p].second;
    const auto g = param.grad();
    auto values = param.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Text serialization. nlohmann/json writes doubles in shortest round-trip form,
// so values survive save/load bit-exactly.

inline nlohmann::json params_to_json(const ParamStore& store) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& name : store.names()) {
    const Tensor& p = store.at(name);
    out[name] = {{"shape", p.shape()},
                 {"values", std::vector<double>(p.values().begin(), p.values().end())},
                 {"frozen", store.frozen(name)}};
  }
  return out;
}

inline nlohmann::json optimizer_to_json(const ParamStore& store) {
  nlohmann::json moments = nlohmann::json::object();
  for (const auto& name : store.names()) {
    const auto& m = store.moments(name);
    moments[name] = {{"first", m.first}, {"second", m.second}};
  }
  return {{"step", store.step()}, {"moments", moments}};
}

/// Overwrites values (and optionally optimizer state) of an already-shaped
/// store. Every stored parameter must be present with a matching shape.
inline void load_params(ParamStore& store, const nlohmann::json& params) {
  for (const auto& name : store.names()) {
    if (!params.contains(name)) throw FormatError("checkpoint is missing parameter '" + name + "'");
    const auto& entry = params.at(name);
    const auto shape = entry.at("shape").get<Shape>();
    Tensor& p = store.at(name);
    if (shape != p.shape())
      throw DimensionError("parameter '" + name + "' has shape " + shape_string(shape) + " in checkpoint but " +
                           shape_string(p.shape()) + " in model");
    const auto values = entry.at("values").get<std::vector<double>>();
    if (values.size() != p.size()) throw FormatError("parameter '" + name + "' value count mismatch");
    std::copy(values.begin(), values.end(), p.mutable_values().begin());
    if (entry.value("frozen", false)) store.freeze(name);
  }
  for (const auto& [name, _] : params.items())
    if (!store.contains(name)) throw FormatError("checkpoint has unknown parameter '" + name + "'");
}

inline void load_optimizer(ParamStore& store, const nlohmann::json& optimizer) {
  store.set_step(optimizer.at("step").get<std::uint64_t>());
  const auto& moments = optimizer.at("moments");
  for (const auto& name : store.names()) {
    auto& m = store.moments(name);
    auto first = moments.at(name).at("first").get<std::vector<double>>();
    auto second = moments.at(name).at("second").get<std::vector<double>>();
    if (first.size() != m.first.size() || second.size() != m.second.size())
      throw FormatError("optimizer moments for '" + name + "' have the wrong length");
    m.first = std::move(first);
    m.second = std::move(second);
  }
}

}  // namespace causalfuse
