#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"

using namespace causalfuse;
using cftest::random_image;

TEST(Encode, OutputShape) {
  auto model = cftest::small_model(1);
  Rng rng(2);
  for (auto [h, w] : {std::pair{3, 3}, std::pair{5, 9}, std::pair{16, 7}}) {
    const Tensor x = model.encode(random_image(h, w, rng), random_image(h, w, rng));
    EXPECT_EQ(x.shape(), (Shape{model.config().feature_channels, std::size_t(h), std::size_t(w)}));
  }
}

TEST(Encode, ZeroImagesGiveZeroFeatures) {
  auto model = cftest::small_model(3);
  const Tensor x = model.encode(Image(6, 6), Image(6, 6));
  for (double v : x.values()) EXPECT_EQ(v, 0.0);
}

TEST(Encode, DeterministicAndSizeChecked) {
  auto model = cftest::small_model(4);
  Rng rng(5);
  const Image a = random_image(8, 8, rng), b = random_image(8, 8, rng);
  EXPECT_TRUE(cftest::bit_identical(model.encode(a, b).values(), model.encode(a, b).values()));
  EXPECT_THROW(model.encode(a, Image(8, 9)), DimensionError);
}

TEST(Reconstruct, ZeroPreActivationGivesHalf) {
  auto model = cftest::small_model(6);
  for (const char* name : {param_names::kReconWeight, param_names::kReconBias})
    for (double& v : model.params().at(name).mutable_values()) v = 0.0;
  Rng rng(7);
  const Tensor y = model.reconstruct(cftest::random_tensor({3, 5, 5}, rng));
  for (double v : y.values()) EXPECT_EQ(v, 0.5);
}

TEST(Reconstruct, RangeAndMonotonicity) {
  auto model = cftest::small_model(8);
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor f = cftest::random_tensor({3, 6, 6}, rng, -3, 3);
    const Tensor pre = model.head(f), y = model.reconstruct(f);
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&pre](auto a, auto b) { return pre[a] < pre[b]; });
    for (std::size_t i = 0; i < order.size(); ++i) {
      EXPECT_GT(y[order[i]], 0.0);
      EXPECT_LT(y[order[i]], 1.0);
      if (i > 0) EXPECT_LE(y[order[i - 1]], y[order[i]]);
      EXPECT_NEAR(y[order[i]], (std::tanh(pre[order[i]]) + 1.0) / 2.0, 1e-15);
    }
  }
}

TEST(Fuse, ShapeDeterminismAndAlignment) {
  auto model = cftest::small_model(10);
  Rng rng(11);
  const Image ir = random_image(9, 13, rng), vis = random_image(9, 13, rng);
  const Image a = model.fuse(ir, vis), b = model.fuse(ir, vis);
  EXPECT_EQ(a.height, 9u);
  EXPECT_EQ(a.width, 13u);
  EXPECT_EQ(a, b);
  for (double v : a.pixels) EXPECT_TRUE(v > 0.0 && v < 1.0);
  EXPECT_THROW(model.fuse(ir, Image(9, 12)), DimensionError);
}

TEST(Fuse, ZeroedConfounderProjectionMatchesAblation) {
  auto ablation = cftest::small_model(12, 4, 3, false);
  Rng rng(13);
  // Perturb trainable weights so the check is not at initialization only.
  for (const auto& name : ablation.params().names())
    if (!ablation.params().frozen(name))
      for (double& v : ablation.params().at(name).mutable_values()) v += rng.uniform(-0.1, 0.1);
  const Image ir = random_image(10, 10, rng), vis = random_image(10, 10, rng);
  const Image baseline = ablation.fuse(ir, vis);
  ablation.set_backdoor_active(true);
  EXPECT_EQ(ablation.fuse(ir, vis), baseline);
}

TEST(Fuse, BackdoorChangesOutputWhenActive) {
  const auto with = cftest::small_model(14, 4, 3, true);
  const auto without = cftest::small_model(14, 4, 3, false);
  Rng rng(15);
  const Image ir = random_image(8, 8, rng), vis = random_image(8, 8, rng);
  EXPECT_NE(with.fuse(ir, vis), without.fuse(ir, vis));
}

TEST(Model, DisabledBackdoorFreezesAttentionAndConfounderTerms) {
  const auto model = cftest::small_model(16, 4, 3, false);
  for (const char* name : {param_names::kWgVis, param_names::kWgIr, param_names::kWq, param_names::kWk})
    EXPECT_TRUE(model.params().frozen(name)) << name;
  for (double v : model.params().at(param_names::kWgVis).values()) EXPECT_EQ(v, 0.0);
  EXPECT_FALSE(model.params().frozen(param_names::kWh));
}

TEST(Model, ChannelContracts) {
  const auto model = cftest::small_model(17);
  const auto p = model.baffm();
  EXPECT_EQ(p.in_channels(), model.config().feature_channels);
  EXPECT_EQ(p.w_h.dim(1), model.config().feature_channels);
  EXPECT_EQ(model.params().at(param_names::kReconWeight).dim(0), 1u);
}

TEST(Model, RejectsMismatchedDictionaries) {
  Rng rng(18);
  FusionConfig cfg;
  EXPECT_THROW(FusionModel(cfg, cftest::make_dictionary(Modality::visible, cftest::random_matrix(3, 4, rng)),
                           cftest::make_dictionary(Modality::infrared, cftest::random_matrix(3, 5, rng))),
               DimensionError);
  EXPECT_THROW(FusionModel(cfg, cftest::make_dictionary(Modality::infrared, cftest::random_matrix(3, 4, rng)),
                           cftest::make_dictionary(Modality::infrared, cftest::random_matrix(3, 4, rng))),
               ContractError);
  cfg.kernel = 4;
  EXPECT_THROW(FusionModel(cfg, cftest::make_dictionary(Modality::visible, cftest::random_matrix(3, 4, rng)),
                           cftest::make_dictionary(Modality::infrared, cftest::random_matrix(3, 4, rng))),
               UnsupportedKernelError);
}

TEST(Model, FullPipelineGradientCheck) {
  auto model = cftest::small_model(19);
  Rng rng(20);
  const Image ir = random_image(8, 8, rng), vis = random_image(8, 8, rng);
  std::vector<Tensor> params;
  for (const auto& name : model.params().names()) params.push_back(model.params().at(name));
  const double err = cftest::max_gradient_error(params, [&] {
    return fusion_loss(model.forward(to_tensor(ir), to_tensor(vis)), ir, vis, LossConfig{});
  });
  EXPECT_LT(err, 1e-4);
}
