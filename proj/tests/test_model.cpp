#include <doctest.h>

#include "dsnet/errors.hpp"
#include "dsnet/losses.hpp"
#include "dsnet/model.hpp"
#include "support/helpers.hpp"

using namespace dsnet;

TEST_CASE("forward produces saliency and depth at input resolution") {
  torch::manual_seed(1);
  Ddcnn model(testing::micro_config(8));
  torch::NoGradGuard no_grad;
  auto out = model->forward(torch::rand({2, 3, 64, 64}), torch::rand({2, 1, 64, 64}));
  CHECK(out.prediction.saliency.sizes() == torch::IntArrayRef({2, 1, 64, 64}));
  CHECK(out.prediction.depth.sizes() == torch::IntArrayRef({2, 1, 64, 64}));
  CHECK(out.prediction.saliency.min().item<double>() > 0.0);
  CHECK(out.prediction.saliency.max().item<double>() < 1.0);
  CHECK_NOTHROW(validate_pyramid(out.rgb_features, 64));
  CHECK_NOTHROW(validate_pyramid(out.depth_features, 64));
  CHECK(out.fusion.attention.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(torch::equal(out.fusion.fused[i], out.fusion.f_dam[i] + out.fusion.f_dgm[i] + out.fusion.f_d[i]));
  }
}

TEST_CASE("default tiny model at 128 and 256") {
  ModelConfig cfg;
  for (int64_t size : {128, 256}) {
    cfg.input_size = size;
    Ddcnn model(cfg);
    torch::NoGradGuard no_grad;
    auto out = model->forward(torch::rand({1, 3, size, size}), torch::rand({1, 1, size, size}));
    CHECK(out.prediction.saliency.size(2) == size);
    CHECK_NOTHROW(validate_pyramid(out.rgb_features, size));
  }
}

TEST_CASE("invalid input sizes are rejected") {
  Ddcnn model(testing::micro_config());
  CHECK_THROWS_AS(model->forward(torch::rand({1, 3, 32, 32}), torch::rand({1, 1, 32, 32})), ShapeMismatch);
  CHECK_THROWS_AS(model->forward(torch::rand({1, 3, 80, 80}), torch::rand({1, 1, 80, 80})), ShapeMismatch);
  CHECK_THROWS_AS(model->forward(torch::rand({2, 3, 64, 64}), torch::rand({1, 1, 64, 64})), ShapeMismatch);
  CHECK_THROWS_AS(model->forward(torch::rand({1, 3, 64, 64}), torch::rand({1, 3, 64, 64})), ShapeMismatch);
}

TEST_CASE("level projection to a common width") {
  auto cfg = testing::micro_config();
  cfg.encoder.channels_per_level = {4, 8, 8, 16};
  cfg.level_width = 6;
  Ddcnn model(cfg);
  for (auto c : model->level_channels()) CHECK(c == 6);
  torch::NoGradGuard no_grad;
  auto out = model->forward(torch::rand({1, 3, 64, 64}), torch::rand({1, 1, 64, 64}));
  CHECK(out.rgb_features.levels[3].size(1) == 6);
}

TEST_CASE("model without the depth branch predicts saliency only") {
  auto cfg = testing::micro_config();
  cfg.depth_branch = false;
  Ddcnn model(cfg);
  torch::NoGradGuard no_grad;
  auto out = model->forward(torch::rand({1, 3, 64, 64}), torch::rand({1, 1, 64, 64}));
  CHECK(!out.prediction.depth.defined());
  CHECK(out.fusion.attention.empty());
  CHECK(out.decoupled.reconstruction.empty());
  CHECK(out.prediction.saliency.sizes() == torch::IntArrayRef({1, 1, 64, 64}));
  CHECK_THROWS_AS(model->predict_depth(torch::rand({1, 3, 64, 64})), Error);
}

TEST_CASE("clone_model copies state and stays independent") {
  torch::manual_seed(8);
  Ddcnn model(testing::micro_config());
  auto copy = clone_model(model);
  const auto a = model->named_parameters(), b = copy->named_parameters();
  for (const auto& item : a) CHECK(torch::equal(item.value(), b[item.key()]));
  {
    torch::NoGradGuard no_grad;
    copy->parameters().front().add_(1.0);
  }
  CHECK(!torch::equal(model->parameters().front(), copy->parameters().front()));
}

TEST_CASE("copy_state_with_prefix touches only the named modules") {
  torch::manual_seed(1);
  Ddcnn a(testing::micro_config());
  torch::manual_seed(2);
  Ddcnn b(testing::micro_config());
  const auto copied = copy_state_with_prefix(*b, *a, DdcnnImpl::depth_branch_modules());
  CHECK(copied > 0);
  auto pa = a->named_parameters(), pb = b->named_parameters();
  for (const auto& item : pb) {
    const bool branch = item.key().rfind("rgb_encoder.", 0) == 0 || item.key().rfind("decoupling.", 0) == 0;
    if (branch) {
      CHECK(torch::equal(item.value(), pa[item.key()]));
    } else if (item.value().dim() > 1) {  // biases and norm affine params start equal anyway
      CHECK(!torch::equal(item.value(), pa[item.key()]));
    }
  }
}

TEST_CASE("forward is deterministic") {
  torch::manual_seed(4);
  Ddcnn model(testing::micro_config());
  torch::NoGradGuard no_grad;
  auto rgb = torch::rand({1, 3, 64, 64}), depth = torch::rand({1, 1, 64, 64});
  CHECK(torch::equal(model->forward(rgb, depth).prediction.saliency,
                     model->forward(rgb, depth).prediction.saliency));
}

TEST_CASE("batch norm variant trains and evaluates") {
  auto cfg = testing::micro_config();
  cfg.norm = NormKind::batch;
  Ddcnn model(cfg);
  auto out = model->forward(torch::rand({2, 3, 64, 64}), torch::rand({2, 1, 64, 64}));
  out.prediction.saliency.mean().backward();
  model->eval();
  torch::NoGradGuard no_grad;
  CHECK(torch::isfinite(model->forward(torch::rand({1, 3, 64, 64}), torch::rand({1, 1, 64, 64}))
                            .prediction.saliency)
            .all()
            .item<bool>());
}
