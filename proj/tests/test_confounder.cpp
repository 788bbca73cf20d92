#include <gtest/gtest.h>

#include <map>
#include <numeric>

#include "support.hpp"

using namespace causalfuse;

namespace {

std::vector<Image> modality_images(const std::vector<ImagePair>& pairs, Modality m) {
  std::vector<Image> out;
  for (const auto& p : pairs) out.push_back(m == Modality::infrared ? p.ir : p.vis);
  return out;
}

double mean_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b, bool same) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = same ? i + 1 : 0; j < b.size(); ++j) {
      total += std::sqrt(squared_distance(a[i], b[j]));
      ++count;
    }
  return total / static_cast<double>(count);
}

/// Exact cluster means computed from labels alone.
Matrix oracle_means(const Matrix& points, const std::vector<std::size_t>& labels, std::size_t k) {
  Matrix sums(k, points.cols);
  std::vector<double> n(k, 0.0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    n[labels[i]] += 1.0;
    for (std::size_t j = 0; j < points.cols; ++j) sums(labels[i], j) += points(i, j);
  }
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < points.cols; ++j) sums(c, j) /= n[c];
  return sums;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace

// --- scene features -----------------------------------------------------------

TEST(SceneFeature, DeterministicAndSized) {
  const auto pair = generate_pair(SceneCategory::bush, 32, 5);
  const auto a = extract_scene_feature(pair.vis), b = extract_scene_feature(pair.vis);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), SceneFeatureExtractor::kOutputChannels + 9);
}

TEST(SceneFeature, ConstantImageHistogramAndGradient) {
  const auto f = extract_scene_feature(Image(20, 20, 0.3));
  const std::size_t h0 = SceneFeatureExtractor::kOutputChannels;
  double mass = 0.0;
  std::size_t nonzero = 0;
  for (std::size_t b = 0; b < 8; ++b) {
    mass += f[h0 + b];
    nonzero += f[h0 + b] != 0.0;
  }
  EXPECT_EQ(mass, 1.0);
  EXPECT_EQ(nonzero, 1u);
  EXPECT_EQ(f[h0 + 2], 1.0);  // 0.3 * 8 = 2.4 -> bin 2
  EXPECT_EQ(f.back(), 0.0);
}

TEST(SceneFeature, EmptyImageRejected) { EXPECT_THROW(extract_scene_feature(Image{}), DimensionError); }

TEST(SceneFeature, StreetAndCloudSeparate) {
  for (Modality m : {Modality::visible, Modality::infrared}) {
    std::vector<std::vector<double>> street, cloud;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto ps = generate_pair(SceneCategory::street, 32, 1000 + s);
      const auto pc = generate_pair(SceneCategory::cloud, 32, 2000 + s);
      street.push_back(extract_scene_feature(m == Modality::visible ? ps.vis : ps.ir));
      cloud.push_back(extract_scene_feature(m == Modality::visible ? pc.vis : pc.ir));
    }
    const double within = 0.5 * (mean_distance(street, street, true) + mean_distance(cloud, cloud, true));
    const double between = mean_distance(street, cloud, false);
    EXPECT_GT(between, within) << to_string(m);
  }
}

// --- PCA ------------------------------------------------------------------

TEST(Pca, RankOneLine) {
  std::vector<std::vector<double>> rows;
  for (int i = -5; i <= 5; ++i) rows.push_back({0.3 * i, 0.6 * i});
  const auto model = pca_fit(Matrix::from_rows(rows), 2);
  EXPECT_NEAR(model.components(0, 0), 1.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(model.components(0, 1), 2.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(model.eigenvalues[1], 0.0, 1e-10);
}

TEST(Pca, OrthonormalSortedAndSigned) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = cftest::random_matrix(40, 12, rng);
    const auto model = pca_fit(x, 7);
    for (std::size_t a = 0; a < 7; ++a) {
      for (std::size_t b = 0; b < 7; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 12; ++j) dot += model.components(a, j) * model.components(b, j);
        EXPECT_LT(std::fabs(dot - (a == b ? 1.0 : 0.0)), 1e-8);
      }
      if (a > 0) EXPECT_GE(model.eigenvalues[a - 1], model.eigenvalues[a]);
      EXPECT_GE(model.eigenvalues[a], 0.0);
      std::size_t peak = 0;
      for (std::size_t j = 1; j < 12; ++j)
        if (std::fabs(model.components(a, j)) > std::fabs(model.components(a, peak))) peak = j;
      EXPECT_GT(model.components(a, peak), 0.0);
    }
  }
}

TEST(Pca, EigenvaluesMatchProjectedVariance) {
  // Oracle: the sample variance of each projected coordinate.
  Rng rng(4);
  const Matrix x = cftest::random_matrix(60, 6, rng);
  const auto model = pca_fit(x, 6);
  const Matrix z = pca_transform_all(model, x);
  for (std::size_t k = 0; k < 6; ++k) {
    double ss = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) ss += z(i, k) * z(i, k);
    EXPECT_NEAR(ss / 59.0, model.eigenvalues[k], 1e-12);
  }
}

TEST(Pca, FullRankReconstruction) {
  Rng rng(5);
  const Matrix x = cftest::random_matrix(50, 10, rng);
  const auto model = pca_fit(x, 10);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto z = pca_transform(model, x.row(i));
    double err = 0.0;
    for (std::size_t j = 0; j < 10; ++j) {
      double back = model.mean[j];
      for (std::size_t k = 0; k < 10; ++k) back += model.components(k, j) * z[k];
      err += (back - x(i, j)) * (back - x(i, j));
    }
    EXPECT_LT(std::sqrt(err), 1e-9);
  }
}

TEST(Pca, TransformProperties) {
  Rng rng(6);
  const Matrix x = cftest::random_matrix(30, 8, rng);
  const auto full = pca_fit(x, 8);
  const auto zero = pca_transform(full, full.mean);
  for (double v : zero) EXPECT_EQ(v, 0.0);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    std::vector<double> a(8), b(8), ab(8);
    for (std::size_t j = 0; j < 8; ++j) {
      a[j] = full.mean[j] + rng.uniform(-1, 1);
      b[j] = full.mean[j] + rng.uniform(-1, 1);
      ab[j] = a[j] + b[j] - full.mean[j];
    }
    const auto ta = pca_transform(full, a), tb = pca_transform(full, b), tab = pca_transform(full, ab);
    double na = 0.0, ca = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
      EXPECT_NEAR(tab[k], ta[k] + tb[k], 1e-12);
      na += ta[k] * ta[k];
      ca += (a[k] - full.mean[k]) * (a[k] - full.mean[k]);
    }
    EXPECT_NEAR(std::sqrt(na), std::sqrt(ca), 1e-10);
  }
  EXPECT_THROW(pca_transform(full, std::vector<double>(7)), DimensionError);
}

TEST(Pca, TargetDimensionTooLarge) {
  Rng rng(7);
  EXPECT_THROW(pca_fit(cftest::random_matrix(5, 10, rng), 6), DimensionError);
  EXPECT_THROW(pca_fit(cftest::random_matrix(20, 4, rng), 5), DimensionError);
  EXPECT_THROW(pca_fit(cftest::random_matrix(1, 4, rng), 1), DimensionError);
}

// --- K-Means++ ------------------------------------------------------------

TEST(KMeansPP, AllPointsWhenCountEqualsSize) {
  Rng data(8);
  const Matrix pts = cftest::random_matrix(12, 3, data);
  Rng rng(9);
  auto idx = kmeanspp_seed_indices(pts, 12, rng);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(idx[i], i);
}

TEST(KMeansPP, SingleCenterIsADataRow) {
  Rng data(10);
  const Matrix pts = cftest::random_matrix(9, 2, data);
  Rng rng(11);
  const Matrix c = kmeanspp_seed(pts, 1, rng);
  bool found = false;
  for (std::size_t i = 0; i < pts.rows; ++i) found = found || std::equal(c.data.begin(), c.data.end(), pts.row(i).begin());
  EXPECT_TRUE(found);
}

TEST(KMeansPP, ZeroDistancePointsNeverChosen) {
  const Matrix pts = Matrix::from_rows({{0.0}, {0.0}, {0.0}, {100.0}});
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    const auto idx = kmeanspp_seed_indices(pts, 2, rng, 0);
    EXPECT_EQ(idx[1], 3u);
  }
}

TEST(KMeansPP, SamplingFollowsSquaredDistance) {
  // From first center 0, D^2 = {1, 4, 9} for points {1, 2, 3}: expect 1/14, 4/14, 9/14.
  const Matrix pts = Matrix::from_rows({{0.0}, {1.0}, {2.0}, {3.0}});
  std::array<double, 4> hits{};
  const int trials = 20000;
  Rng rng(12);
  for (int t = 0; t < trials; ++t) hits[kmeanspp_seed_indices(pts, 2, rng, 0)[1]] += 1.0;
  for (int i = 1; i <= 3; ++i) {
    const double p = i * i / 14.0;
    const double sigma = std::sqrt(p * (1 - p) / trials);
    EXPECT_NEAR(hits[i] / trials, p, 4.0 * sigma);
  }
  EXPECT_EQ(hits[0], 0.0);
}

TEST(KMeansPP, TooManyCenters) {
  Rng rng(13);
  EXPECT_THROW(kmeanspp_seed(Matrix(3, 2), 4, rng), CountError);
}

// --- Lloyd ----------------------------------------------------------------

TEST(Lloyd, TwoBlobs) {
  const Matrix pts = Matrix::from_rows({{0.0}, {0.1}, {0.2}, {10.0}, {10.1}, {10.2}});
  const auto r = lloyd(pts, Matrix::from_rows({{0.0}, {10.2}}));
  EXPECT_NEAR(r.centers(0, 0), 0.1, 1e-9);
  EXPECT_NEAR(r.centers(1, 0), 10.1, 1e-9);
  EXPECT_EQ(r.assignment.counts, (std::vector<std::size_t>{3, 3}));
}

TEST(Lloyd, FixedPointTakesOneIteration) {
  const Matrix pts = Matrix::from_rows({{0.0, 0.0}, {2.0, 0.0}, {10.0, 10.0}, {10.0, 12.0}});
  const Matrix centers = Matrix::from_rows({{1.0, 0.0}, {10.0, 11.0}});
  const auto r = lloyd(pts, centers);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.centers, centers);
}

TEST(Lloyd, TiesGoToLowestIndex) {
  const Matrix pts = Matrix::from_rows({{0.0}, {1.0}, {2.0}});
  const auto r = lloyd(pts, Matrix::from_rows({{0.0}, {2.0}}), {1e-10, 1});
  EXPECT_EQ(r.assignment.labels[1], 0u);
}

TEST(Lloyd, EmptyClusterRepaired) {
  // Both centers start on the same spot: the second would be empty.
  const Matrix pts = Matrix::from_rows({{0.0}, {1.0}, {9.0}, {10.0}});
  const auto r = lloyd(pts, Matrix::from_rows({{0.0}, {0.0}}));
  for (auto c : r.assignment.counts) EXPECT_GT(c, 0u);
  EXPECT_LT(max_abs_diff(r.centers, oracle_means(pts, r.assignment.labels, 2)), 1e-12);
}

TEST(Lloyd, InertiaMonotoneAndMeansExact) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix pts = cftest::random_matrix(80, 4, rng);
    const std::size_t k = 2 + static_cast<std::size_t>(rng.below(6));
    Rng seed_rng(static_cast<std::uint64_t>(trial));
    const auto r = lloyd(pts, kmeanspp_seed(pts, k, seed_rng));
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
      EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] + 1e-12);
    EXPECT_LT(max_abs_diff(r.centers, oracle_means(pts, r.assignment.labels, k)), 1e-9);
    EXPECT_EQ(std::accumulate(r.assignment.counts.begin(), r.assignment.counts.end(), std::size_t{0}), pts.rows);
    for (auto c : r.assignment.counts) EXPECT_GT(c, 0u);
  }
}

// --- dictionary -------------------------------------------------------------

class DictionaryBuildTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = new std::vector<ImagePair>(generate_balanced_dataset(20, 32, 77, "t"));
  }
  static void TearDownTestSuite() { delete corpus_; }
  static const std::vector<ImagePair>& corpus() { return *corpus_; }

 private:
  static inline std::vector<ImagePair>* corpus_ = nullptr;
};

TEST_F(DictionaryBuildTest, CentersAreClusterMeans) {
  const auto features = extract_feature_set(modality_images(corpus(), Modality::visible), Modality::visible);
  const auto build = build_dictionary_from_features(features, 6, 16, 3);
  EXPECT_LT(max_abs_diff(build.dictionary.centers, oracle_means(build.reduced, build.dictionary.assignment.labels, 6)),
            1e-9);
  EXPECT_EQ(build.dictionary.size(), 6u);
  EXPECT_EQ(build.dictionary.dim(), 16u);
}

TEST_F(DictionaryBuildTest, SingleEntryIsGlobalMean) {
  const auto features = extract_feature_set(modality_images(corpus(), Modality::infrared), Modality::infrared);
  const auto build = build_dictionary_from_features(features, 1, 16, 0);
  Matrix mean(1, 16);
  for (std::size_t i = 0; i < build.reduced.rows; ++i)
    for (std::size_t j = 0; j < 16; ++j) mean(0, j) += build.reduced(i, j) / static_cast<double>(build.reduced.rows);
  EXPECT_LT(max_abs_diff(build.dictionary.centers, mean), 1e-9);
}

TEST_F(DictionaryBuildTest, DeterministicBySeed) {
  const auto images = modality_images(corpus(), Modality::visible);
  const auto a = build_dictionary(images, Modality::visible, 5, 16, 42);
  const auto b = build_dictionary(images, Modality::visible, 5, 16, 42);
  EXPECT_EQ(serialize_dictionary(a), serialize_dictionary(b));
}

TEST_F(DictionaryBuildTest, CorpusSmallerThanN) {
  const auto images = modality_images(corpus(), Modality::visible);
  EXPECT_THROW(build_dictionary(std::span(images).first(10), Modality::visible, 11, 8, 0), CountError);
}

TEST_F(DictionaryBuildTest, ThreeCategoryPurity) {
  for (Modality m : {Modality::visible, Modality::infrared}) {
    const auto features = extract_feature_set(modality_images(corpus(), m), m);
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto build = build_dictionary_from_features(features, 3, 16, seed);
      std::vector<std::map<SceneCategory, int>> members(3);
      for (std::size_t i = 0; i < corpus().size(); ++i)
        ++members[build.dictionary.assignment.labels[i]][corpus()[i].category];
      for (std::size_t c = 0; c < 3; ++c) {
        int total = 0, top = 0;
        for (const auto& [_, n] : members[c]) {
          total += n;
          top = std::max(top, n);
        }
        EXPECT_GE(top, 0.8 * total) << to_string(m) << " seed " << seed << " cluster " << c;
      }
    }
  }
}

TEST_F(DictionaryBuildTest, ModalityIndependence) {
  auto altered = corpus();
  for (auto& p : altered) p.ir = generate_pair(SceneCategory::bush, 32, 999).ir;
  const auto a = build_dictionary(modality_images(corpus(), Modality::visible), Modality::visible, 4, 16, 8);
  const auto b = build_dictionary(modality_images(altered, Modality::visible), Modality::visible, 4, 16, 8);
  EXPECT_EQ(serialize_dictionary(a), serialize_dictionary(b));
}

TEST_F(DictionaryBuildTest, FileRoundTripIsBitExact) {
  const auto dict = build_dictionary(modality_images(corpus(), Modality::infrared), Modality::infrared, 4, 16, 9);
  const auto back = parse_dictionary(serialize_dictionary(dict));
  EXPECT_EQ(back.centers, dict.centers);
  EXPECT_EQ(back.pca, dict.pca);
  EXPECT_EQ(back.modality, Modality::infrared);
  EXPECT_EQ(back.assignment.labels, dict.assignment.labels);
  EXPECT_EQ(serialize_dictionary(back), serialize_dictionary(dict));
}

TEST(DictionaryFile, MalformedDocumentsRejected) {
  EXPECT_THROW(parse_dictionary("{"), FormatError);
  EXPECT_THROW(parse_dictionary(R"({"format":"other"})"), FormatError);
}
