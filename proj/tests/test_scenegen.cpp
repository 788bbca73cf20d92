#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"

using namespace causalfuse;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);  // ties share the mean rank
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(GeneratePair, DeterministicAndInRange) {
  for (auto c : kAllCategories) {
    const auto a = generate_pair(c, 32, 17), b = generate_pair(c, 32, 17);
    EXPECT_EQ(a.ir, b.ir);
    EXPECT_EQ(a.vis, b.vis);
    EXPECT_EQ(a.category, c);
    EXPECT_EQ(a.ir.height, 32u);
    EXPECT_TRUE(a.ir.same_size(a.vis));
    for (const Image* img : {&a.ir, &a.vis})
      for (double p : img->pixels) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
      }
  }
}

TEST(GeneratePair, SeedsChangeContent) {
  EXPECT_NE(generate_pair(SceneCategory::street, 32, 1).vis, generate_pair(SceneCategory::street, 32, 2).vis);
}

TEST(GeneratePair, TooSmallRejected) {
  EXPECT_THROW(generate_pair(SceneCategory::cloud, 15, 0), DimensionError);
  EXPECT_NO_THROW(generate_pair(SceneCategory::cloud, 16, 0));
}

TEST(GeneratePair, PixelRangeHoldsAcrossSeedsAndSizes) {
  for (std::uint64_t seed = 0; seed < 30; ++seed)
    for (auto c : kAllCategories) {
      const auto p = generate_pair(c, 16 + seed % 40, seed);
      for (double v : p.ir.pixels) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
      for (double v : p.vis.pixels) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
}

TEST(GeneratePair, ModalitiesAreComplementary) {
  for (auto c : kAllCategories)
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = generate_pair(c, 32, seed);
      EXPECT_LT(spearman(p.ir.pixels, p.vis.pixels), 0.95) << to_string(c) << " seed " << seed;
    }
}

TEST(GeneratePair, NearestCentroidSeparatesCategories) {
  for (Modality m : {Modality::visible, Modality::infrared}) {
    std::vector<std::vector<double>> centroid(3, std::vector<double>(SceneFeatureExtractor::dimension(), 0.0));
    for (std::size_t c = 0; c < 3; ++c)
      for (std::uint64_t s = 0; s < 30; ++s) {
        const auto p = generate_pair(kAllCategories[c], 32, 5000 + s);
        const auto f = extract_scene_feature(m == Modality::visible ? p.vis : p.ir);
        for (std::size_t j = 0; j < f.size(); ++j) centroid[c][j] += f[j] / 30.0;
      }
    int correct = 0;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::uint64_t s = 0; s < 30; ++s) {
        const auto p = generate_pair(kAllCategories[c], 32, 9000 + s);
        const auto f = extract_scene_feature(m == Modality::visible ? p.vis : p.ir);
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k)
          if (squared_distance(f, centroid[k]) < squared_distance(f, centroid[best])) best = k;
        correct += best == c;
      }
    EXPECT_GE(correct, 81) << to_string(m) << ": " << correct << "/90";
  }
}

TEST(BiasProfile, Validation) {
  EXPECT_NO_THROW(BiasProfile{}.validate());
  EXPECT_NO_THROW(BiasProfile::uniform().validate());
  try {
    BiasProfile{{0.5, 0.3, 0.3}}.validate();
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("1.1"), std::string::npos) << e.what();
  }
  EXPECT_THROW((BiasProfile{{1.2, -0.1, -0.1}}.validate()), ContractError);
}

TEST(GenerateDataset, SingleCategoryProfile) {
  const auto data = generate_dataset(BiasProfile{{1.0, 0.0, 0.0}}, 40, 16, 3);
  ASSERT_EQ(data.size(), 40u);
  for (const auto& p : data) EXPECT_EQ(p.category, SceneCategory::street);
  const auto bush = generate_dataset(BiasProfile{{0.0, 0.0, 1.0}}, 10, 16, 3);
  for (const auto& p : bush) EXPECT_EQ(p.category, SceneCategory::bush);
}

TEST(GenerateDataset, CountsAndIds) {
  const auto data = generate_dataset(BiasProfile{}, 7, 16, 3, "x");
  ASSERT_EQ(data.size(), 7u);
  EXPECT_EQ(data[0].id, "x_00000");
  EXPECT_EQ(data[6].id, "x_00006");
  EXPECT_THROW(generate_dataset(BiasProfile{}, 0, 16, 3), CountError);
  EXPECT_THROW(generate_dataset(BiasProfile{{0.5, 0.5, 0.5}}, 3, 16, 3), ContractError);
}

TEST(GenerateDataset, StreetCountWithinMultinomialBound) {
  const double sigma = std::sqrt(500 * 0.8 * 0.2);
  for (std::uint64_t seed : {0, 1, 2, 3, 4}) {
    const auto data = generate_dataset(BiasProfile{}, 500, 16, seed);
    const auto streets = std::count_if(data.begin(), data.end(), [](const ImagePair& p) { return p.category == SceneCategory::street; });
    EXPECT_LE(std::fabs(static_cast<double>(streets) - 400.0), 4.0 * sigma) << "seed " << seed << ": " << streets;
  }
}

TEST(GenerateDataset, DeterministicBySeed) {
  const auto a = generate_dataset(BiasProfile{}, 12, 16, 9), b = generate_dataset(BiasProfile{}, 12, 16, 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].category, b[i].category);
    EXPECT_EQ(a[i].ir, b[i].ir);
    EXPECT_EQ(a[i].vis, b[i].vis);
  }
}

TEST(GenerateDataset, BalancedHasEqualCounts) {
  const auto data = generate_balanced_dataset(20, 16, 4);
  ASSERT_EQ(data.size(), 60u);
  for (auto c : kAllCategories)
    EXPECT_EQ(std::count_if(data.begin(), data.end(), [c](const ImagePair& p) { return p.category == c; }), 20);
}

TEST(SceneCategory, NamesRoundTrip) {
  for (auto c : kAllCategories) EXPECT_EQ(parse_category(to_string(c)), c);
  EXPECT_FALSE(parse_category("forest").has_value());
}
