#pragma once

// Helpers shared by the test binaries: random data, finite differences, tiny
// models and scratch directories.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "causalfuse/causalfuse.hpp"

namespace cftest {

using namespace causalfuse;

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

inline Image random_image(std::size_t h, std::size_t w, Rng& rng) {
  Image img(h, w);
  for (double& p : img.pixels) p = rng.uniform();
  return img;
}

/// Gradient comparison error: |a - n| / max(|a|, |n|, floor). The floor keeps
/// coordinates whose true derivative is ~0 from dividing roundoff by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

/// Central differences of `f` with respect to every entry of `param`.
inline std::vector<double> numeric_gradient(Tensor param, const std::function<double()>& f, double h = 1e-4) {
  auto values = param.mutable_values();
  std::vector<double> g(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = f();
    values[i] = saved - h;
    const double down = f();
    values[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Max relative error between autodiff and central differences for each
/// tensor in `params`; `loss` must rebuild the graph on each call.
inline double max_gradient_error(const std::vector<Tensor>& params, const std::function<Tensor()>& loss,
                                 double h = 1e-4) {
  for (auto p : params) p.zero_grad();
  backward(loss());
  double worst = 0.0;
  for (const auto& p : params) {
    const auto analytic = p.grad_or_zeros();
    const auto numeric = numeric_gradient(p, [&] {
      NoGradGuard guard;
      return loss().item();
    }, h);
    for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, relative_error(analytic[i], numeric[i]));
  }
  return worst;
}

/// Dictionary with the given centers and an identity-like PCA, for unit tests
/// that do not need a real corpus.
inline ConfounderDictionary make_dictionary(Modality m, const Matrix& centers) {
  ConfounderDictionary dict;
  dict.modality = m;
  dict.centers = centers;
  dict.pca.mean.assign(centers.cols, 0.0);
  dict.pca.components = Matrix(centers.cols, centers.cols);
  for (std::size_t i = 0; i < centers.cols; ++i) dict.pca.components(i, i) = 1.0;
  dict.pca.eigenvalues.assign(centers.cols, 1.0);
  dict.assignment.labels.assign(centers.rows, 0);
  for (std::size_t i = 0; i < centers.rows; ++i) dict.assignment.labels[i] = i;
  dict.assignment.counts.assign(centers.rows, 1);
  return dict;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.uniform(lo, hi);
  return m;
}

/// Small model over random dictionaries.
inline FusionModel small_model(std::uint64_t seed, std::size_t n = 4, std::size_t d = 3, bool backdoor = true) {
  Rng rng(seed);
  FusionConfig cfg;
  cfg.stem_channels = 2;
  cfg.feature_channels = 3;
  cfg.fused_channels = 3;
  cfg.attention_dim = 2;
  cfg.backdoor = backdoor;
  cfg.init_seed = seed;
  return FusionModel(cfg, make_dictionary(Modality::visible, random_matrix(n, d, rng)),
                     make_dictionary(Modality::infrared, random_matrix(n, d, rng)));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("causalfuse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool bit_identical(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace cftest
