#pragma once

// Confounder dictionaries: one matrix of scene cluster centers per modality.
//
// Pipeline per modality: scene descriptor per training image -> PCA to d
// dimensions -> K-Means++ seeding -> Lloyd iterations. Row i of the dictionary
// is the mean of the reduced features assigned to cluster i.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "causalfuse/error.hpp"
#include "causalfuse/filters.hpp"
#include "causalfuse/image.hpp"
#include "causalfuse/matrix.hpp"
#include "causalfuse/rng.hpp"
#include "causalfuse/tensor.hpp"

namespace causalfuse {

enum class Modality : std::uint8_t { infrared, visible };

inline std::string_view to_string(Modality m) { return m == Modality::infrared ? "infrared" : "visible"; }

inline std::optional<Modality> parse_modality(std::string_view s) {
  if (s == "infrared" || s == "ir") return Modality::infrared;
  if (s == "visible" || s == "vis") return Modality::visible;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Scene descriptor

/// Deterministic stand-in for a pretrained backbone.
///
/// Two frozen 3x3 conv layers (ReLU) with weights drawn once from a fixed seed,
/// globally average-pooled, followed by an 8-bin intensity histogram and the
/// mean Sobel gradient magnitude. Output length is channels() + 9.
class SceneFeatureExtractor {
 public:
  static constexpr std::uint64_t kWeightSeed = 0xC0FFEE;
  static constexpr std::size_t kHiddenChannels = 8;
  static constexpr std::size_t kOutputChannels = 16;
  static constexpr std::size_t kHistogramBins = 8;

  SceneFeatureExtractor() {
    Rng rng(kWeightSeed);
    auto draw = [&rng](Shape shape, double fan_in) {
      std::vector<double> v(shape_size(shape));
      for (double& x : v) x = rng.normal(0.0, std::sqrt(2.0 / fan_in));
      return Tensor(std::move(shape), std::move(v));
    };
    w1_ = draw({kHiddenChannels, 1, 3, 3}, 9.0);
    b1_ = draw({kHiddenChannels}, 9.0);
    w2_ = draw({kOutputChannels, kHiddenChannels, 3, 3}, 9.0 * kHiddenChannels);
    b2_ = draw({kOutputChannels}, 9.0 * kHiddenChannels);
  }

  static constexpr std::size_t dimension() { return kOutputChannels + kHistogramBins + 1; }

  std::vector<double> extract(const Image& image) const {
    if (image.empty()) throw DimensionError("extract_scene_feature: empty image");
    auto relu = [](Tensor t) {
      for (double& x : t.mutable_values()) x = std::max(0.0, x);
      return t;
    };
    const Tensor hidden = relu(conv2d(to_tensor(image), w1_, b1_));
    const Tensor pooled = global_avg_pool(relu(conv2d(hidden, w2_, b2_)));

    std::vector<double> feature(pooled.values().begin(), pooled.values().end());
    std::vector<double> histogram(kHistogramBins, 0.0);
    for (double v : image.pixels) {
      const auto bin = std::min(kHistogramBins - 1,
                                static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * kHistogramBins));
      histogram[bin] += 1.0;
    }
    for (double& h : histogram) h /= static_cast<double>(image.size());
    feature.insert(feature.end(), histogram.begin(), histogram.end());

    const auto g = filters::sobel(image.pixels, image.height, image.width, filters::Border::replicate);
    double magnitude = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) magnitude += std::hypot(g.gx[i], g.gy[i]);
    feature.push_back(magnitude / static_cast<double>(image.size()));
    return feature;
  }

 private:
  Tensor w1_, b1_, w2_, b2_;
};

inline std::vector<double> extract_scene_feature(const Image& image) {
  static const SceneFeatureExtractor extractor;
  return extractor.extract(image);
}

struct SceneFeatureSet {
  Modality modality = Modality::visible;
  Matrix features;  // one row per training image
};

inline SceneFeatureSet extract_feature_set(std::span<const Image> images, Modality modality) {
  SceneFeatureSet set{modality, Matrix(images.size(), SceneFeatureExtractor::dimension())};
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto f = extract_scene_feature(images[i]);
    std::copy(f.begin(), f.end(), set.features.row(i).begin());
  }
  return set;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  std::vector<double> mean;      // length d_m
  Matrix components;             // d x d_m, orthonormal rows
  std::vector<double> eigenvalues;  // length d, non-increasing

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.rows; }

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

/// Eigendecomposition of the sample covariance; keeps the top d axes. Each
/// axis is signed so its largest-magnitude coordinate is positive.
inline PcaModel pca_fit(const Matrix& samples, std::size_t d) {
  const std::size_t n = samples.rows, dm = samples.cols;
  if (n < 2) throw DimensionError("pca_fit: need at least 2 samples, got " + std::to_string(n));
  if (d == 0 || d > std::min(dm, n))
    throw DimensionError("pca_fit: target dimension " + std::to_string(d) + " exceeds min(d_m=" +
                         std::to_string(dm) + ", N_m=" + std::to_string(n) + ")");
  PcaModel model;
  model.mean.assign(dm, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dm; ++j) model.mean[j] += samples(i, j);
  for (double& m : model.mean) m /= static_cast<double>(n);

  Eigen::MatrixXd centered(n, dm);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dm; ++j)
      centered(static_cast<long>(i), static_cast<long>(j)) = samples(i, j) - model.mean[j];
  const Eigen::MatrixXd covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success) throw Error("pca_fit: eigendecomposition failed");

  model.components = Matrix(d, dm);
  model.eigenvalues.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const long col = static_cast<long>(dm - 1 - k);  // solver sorts ascending
    model.eigenvalues[k] = std::max(0.0, solver.eigenvalues()(col));
    std::size_t peak = 0;
    for (std::size_t j = 1; j < dm; ++j)
      if (std::fabs(solver.eigenvectors()(static_cast<long>(j), col)) >
          std::fabs(solver.eigenvectors()(static_cast<long>(peak), col)))
        peak = j;
    const double sign = solver.eigenvectors()(static_cast<long>(peak), col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < dm; ++j) model.components(k, j) = sign * solver.eigenvectors()(static_cast<long>(j), col);
  }
  return model;
}

inline std::vector<double> pca_transform(const PcaModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim())
    throw DimensionError("pca_transform: expected " + std::to_string(model.input_dim()) + " features, got " +
                         std::to_string(x.size()));
  std::vector<double> out(model.output_dim(), 0.0);
  for (std::size_t k = 0; k < out.size(); ++k)
    for (std::size_t j = 0; j < x.size(); ++j) out[k] += model.components(k, j) * (x[j] - model.mean[j]);
  return out;
}

inline Matrix pca_transform_all(const PcaModel& model, const Matrix& samples) {
  Matrix out(samples.rows, model.output_dim());
  for (std::size_t i = 0; i < samples.rows; ++i) {
    const auto r = pca_transform(model, samples.row(i));
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// K-Means++ and Lloyd

/// Indices of the seeded centers. The first is uniform (or `first` if given);
/// each subsequent one is drawn with probability proportional to the squared
/// distance to the nearest already-chosen center.
inline std::vector<std::size_t> kmeanspp_seed_indices(const Matrix& points, std::size_t count, Rng& rng,
                                                      std::optional<std::size_t> first = std::nullopt) {
  if (count == 0) throw CountError("kmeanspp_seed: need at least one center");
  if (count > points.rows)
    throw CountError("kmeanspp_seed: " + std::to_string(count) + " centers requested from " +
                     std::to_string(points.rows) + " points");
  std::vector<std::size_t> chosen;
  chosen.push_back(first ? *first : static_cast<std::size_t>(rng.below(points.rows)));
  std::vector<double> nearest(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) nearest[i] = squared_distance(points.row(i), points.row(chosen[0]));
  while (chosen.size() < count) {
    double total = 0.0;
    for (double d2 : nearest) total += d2;
    std::size_t pick = points.rows;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < points.rows; ++i) {
        cumulative += nearest[i];
        if (nearest[i] > 0.0 && cumulative > target) {
          pick = i;
          break;
        }
      }
      if (pick == points.rows)  // rounding at the tail: last point with mass
        for (std::size_t i = points.rows; i-- > 0;)
          if (nearest[i] > 0.0) {
            pick = i;
            break;
          }
    } else {
      // every point coincides with a chosen center: take the first unchosen one
      for (std::size_t i = 0; i < points.rows && pick == points.rows; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
    }
    chosen.push_back(pick);
    for (std::size_t i = 0; i < points.rows; ++i)
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), points.row(pick)));
  }
  return chosen;
}

inline Matrix kmeanspp_seed(const Matrix& points, std::size_t count, Rng& rng) {
  const auto idx = kmeanspp_seed_indices(points, count, rng);
  Matrix centers(count, points.cols);
  for (std::size_t k = 0; k < count; ++k) std::copy(points.row(idx[k]).begin(), points.row(idx[k]).end(), centers.row(k).begin());
  return centers;
}

struct ClusterAssignment {
  std::vector<std::size_t> labels;  // per point, in [0, N)
  std::vector<std::size_t> counts;  // per cluster, all positive
  double inertia = 0.0;
};

struct LloydOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 300;
};

struct LloydResult {
  Matrix centers;
  ClusterAssignment assignment;
  std::size_t iterations = 0;
  /// Inertia of the seed centers under the first assignment, then the inertia
  /// after every mean update. Non-increasing.
  std::vector<double> inertia_history;
};

namespace kmeans_detail {

inline std::size_t nearest_center(std::span<const double> p, const Matrix& centers, double& best) {
  std::size_t label = 0;
  best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.rows; ++k) {
    const double d2 = squared_distance(p, centers.row(k));
    if (d2 < best) {  // strict: ties keep the lower index
      best = d2;
      label = k;
    }
  }
  return label;
}

inline double inertia_of(const Matrix& points, const Matrix& centers, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) total += squared_distance(points.row(i), centers.row(labels[i]));
  return total;
}

inline Matrix cluster_means(const Matrix& points, const std::vector<std::size_t>& labels,
                            const std::vector<std::size_t>& counts, std::size_t k) {
  Matrix means(k, points.cols);
  for (std::size_t i = 0; i < points.rows; ++i) {
    auto row = means.row(labels[i]);
    const auto p = points.row(i);
    for (std::size_t j = 0; j < points.cols; ++j) row[j] += p[j];
  }
  for (std::size_t c = 0; c < k; ++c)
    for (double& v : means.row(c)) v /= static_cast<double>(counts[c]);
  return means;
}

}  // namespace kmeans_detail

/// Alternating assignment / mean update. Stops when inertia changes by less
/// than the tolerance or after max_iterations. An empty cluster takes the
/// point farthest from its own center (lowest index on ties) among clusters
/// that can spare one.
inline LloydResult lloyd(const Matrix& points, Matrix centers, const LloydOptions& options = {}) {
  if (centers.rows == 0 || centers.rows > points.rows)
    throw CountError("lloyd: " + std::to_string(centers.rows) + " centers for " + std::to_string(points.rows) + " points");
  if (centers.cols != points.cols) throw DimensionError("lloyd: center and point dimensions differ");
  const std::size_t k = centers.rows;
  LloydResult result;
  std::vector<std::size_t> labels(points.rows);
  std::vector<double> dist(points.rows);
  double previous = 0.0;
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
      labels[i] = kmeans_detail::nearest_center(points.row(i), centers, dist[i]);
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = points.rows;
      for (std::size_t i = 0; i < points.rows; ++i)
        if (counts[labels[i]] > 1 && (far == points.rows || dist[i] > dist[far])) far = i;
      --counts[labels[far]];
      labels[far] = c;
      dist[far] = 0.0;
      counts[c] = 1;
      std::copy(points.row(far).begin(), points.row(far).end(), centers.row(c).begin());
    }
    if (iter == 0) {
      previous = kmeans_detail::inertia_of(points, centers, labels);
      result.inertia_history.push_back(previous);
    }
    centers = kmeans_detail::cluster_means(points, labels, counts, k);
    const double current = kmeans_detail::inertia_of(points, centers, labels);
    result.inertia_history.push_back(current);
    result.iterations = iter + 1;
    result.assignment = {labels, counts, current};
    if (std::fabs(previous - current) < options.tolerance) break;
    previous = current;
  }
  result.centers = std::move(centers);
  return result;
}

// ---------------------------------------------------------------------------
// Dictionary

inline constexpr std::size_t kDefaultDictionarySize = 25;
inline constexpr std::size_t kDefaultReducedDim = 16;
inline constexpr std::size_t kDefaultRestarts = 10;

struct ConfounderDictionary {
  Modality modality = Modality::visible;
  std::uint64_t seed = 0;
  PcaModel pca;
  Matrix centers;  // N x d, row i = z_i
  ClusterAssignment assignment;  // membership of the training features

  std::size_t size() const { return centers.rows; }
  std::size_t dim() const { return centers.cols; }

  /// N x d constant tensor for the fusion module.
  Tensor as_tensor() const { return Tensor({centers.rows, centers.cols}, centers.data); }
};

struct DictionaryBuild {
  ConfounderDictionary dictionary;
  Matrix reduced;  // PCA-reduced training features, one row per image
  LloydResult clustering;
};

/// Full build from already-extracted scene features.
inline DictionaryBuild build_dictionary_from_features(const SceneFeatureSet& features, std::size_t count,
                                                      std::size_t reduced_dim, std::uint64_t seed,
                                                      std::size_t restarts = kDefaultRestarts) {
  if (restarts == 0) throw CountError("build_dictionary: need at least one clustering restart");
  if (features.features.rows < count)
    throw CountError("build_dictionary: corpus has " + std::to_string(features.features.rows) +
                     " images but " + std::to_string(count) + " dictionary entries were requested");
  DictionaryBuild build;
  auto& dict = build.dictionary;
  dict.modality = features.modality;
  dict.seed = seed;
  dict.pca = pca_fit(features.features, reduced_dim);
  build.reduced = pca_transform_all(dict.pca, features.features);
  // Several seedings, keep the lowest final inertia (first one on ties).
  const std::uint64_t stream = derive_seed(seed, static_cast<std::uint64_t>(features.modality));
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(stream, r));
    auto candidate = lloyd(build.reduced, kmeanspp_seed(build.reduced, count, rng));
    if (r == 0 || candidate.assignment.inertia < build.clustering.assignment.inertia) build.clustering = std::move(candidate);
  }
  dict.centers = build.clustering.centers;
  dict.assignment = build.clustering.assignment;
  return build;
}

inline ConfounderDictionary build_dictionary(std::span<const Image> images, Modality modality,
                                             std::size_t count = kDefaultDictionarySize,
                                             std::size_t reduced_dim = kDefaultReducedDim, std::uint64_t seed = 0) {
  if (images.size() < count)
    throw CountError("build_dictionary: corpus has " + std::to_string(images.size()) + " images but " +
                     std::to_string(count) + " dictionary entries were requested");
  return build_dictionary_from_features(extract_feature_set(images, modality), count, reduced_dim, seed).dictionary;
}

// ---------------------------------------------------------------------------
// Dictionary file: JSON with shortest round-trip doubles.

namespace dict_detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows; ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t expect_cols) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Matrix m(rows.size(), expect_cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != expect_cols) throw FormatError("dictionary matrix row has wrong length");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

}  // namespace dict_detail

inline nlohmann::json dictionary_to_json(const ConfounderDictionary& dict) {
  return {{"format", "causalfuse-dictionary"},
          {"version", 1},
          {"modality", std::string(to_string(dict.modality))},
          {"N", dict.size()},
          {"d", dict.dim()},
          {"seed", dict.seed},
          {"pca",
           {{"mean", dict.pca.mean},
            {"components", dict_detail::matrix_json(dict.pca.components)},
            {"eigenvalues", dict.pca.eigenvalues}}},
          {"centers", dict_detail::matrix_json(dict.centers)},
          {"labels", dict.assignment.labels},
          {"counts", dict.assignment.counts},
          {"inertia", dict.assignment.inertia}};
}

inline ConfounderDictionary dictionary_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "causalfuse-dictionary") throw FormatError("not a dictionary document");
    ConfounderDictionary dict;
    const auto modality = parse_modality(j.at("modality").get<std::string>());
    if (!modality) throw FormatError("unknown modality in dictionary");
    dict.modality = *modality;
    dict.seed = j.at("seed").get<std::uint64_t>();
    const auto n = j.at("N").get<std::size_t>();
    const auto d = j.at("d").get<std::size_t>();
    const auto& pca = j.at("pca");
    dict.pca.mean = pca.at("mean").get<std::vector<double>>();
    dict.pca.components = dict_detail::matrix_from_json(pca.at("components"), dict.pca.mean.size());
    dict.pca.eigenvalues = pca.at("eigenvalues").get<std::vector<double>>();
    dict.centers = dict_detail::matrix_from_json(j.at("centers"), d);
    if (dict.centers.rows != n || dict.pca.components.rows != d || dict.pca.eigenvalues.size() != d)
      throw FormatError("dictionary sizes disagree with declared N and d");
    if (j.contains("labels")) {
      dict.assignment.labels = j.at("labels").get<std::vector<std::size_t>>();
      dict.assignment.counts = j.at("counts").get<std::vector<std::size_t>>();
      dict.assignment.inertia = j.at("inertia").get<double>();
    }
    return dict;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dictionary document: ") + e.what());
  }
}

inline std::string serialize_dictionary(const ConfounderDictionary& dict) { return dictionary_to_json(dict).dump(1) + "\n"; }

inline ConfounderDictionary parse_dictionary(const std::string& text) {
  try {
    return dictionary_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("dictionary is not valid JSON: ") + e.what());
  }
}

}  // namespace causalfuse
