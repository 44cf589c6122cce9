#include <doctest.h>

#include "dsnet/backbone.hpp"
#include "dsnet/errors.hpp"

using namespace dsnet;

TEST_CASE("rgb pyramid shapes at 256 with batch 2") {
  torch::manual_seed(0);
  auto enc = make_encoder(EncoderSpec{}, NormKind::group);
  torch::NoGradGuard no_grad;
  auto p = encode_rgb(*enc, torch::rand({2, 3, 256, 256}));
  REQUIRE(p.levels.size() == 4);
  CHECK(p.source == PyramidSource::rgb_encoder);
  const int64_t channels[] = {16, 32, 64, 128};
  const int64_t sizes[] = {64, 32, 16, 8};
  for (int i = 0; i < 4; ++i) {
    CHECK(p.levels[i].sizes() == torch::IntArrayRef({2, channels[i], sizes[i], sizes[i]}));
  }
}

TEST_CASE("64x64 input yields 16, 8, 4 and 2 pixel levels") {
  auto enc = make_encoder(EncoderSpec{}, NormKind::group);
  torch::NoGradGuard no_grad;
  auto p = encode_rgb(*enc, torch::rand({1, 3, 64, 64}));
  const int64_t sizes[] = {16, 8, 4, 2};
  for (int i = 0; i < 4; ++i) {
    CHECK(p.levels[i].size(2) == sizes[i]);
    CHECK(p.levels[i].size(3) == sizes[i]);
  }
}

TEST_CASE("unknown encoder names are rejected") {
  EncoderSpec spec;
  spec.name = "bogus";
  CHECK_THROWS_AS(make_encoder(spec, NormKind::group), UnknownEncoder);
}

TEST_CASE("pretrained spec without a weights file") {
  EncoderSpec spec;
  spec.pretrained = true;
  spec.weights_path = "/nonexistent/tiny.pt";
  CHECK_THROWS_AS(make_encoder(spec, NormKind::group), MissingCheckpoint);
}

TEST_CASE("registry accepts new encoders") {
  register_encoder("tiny_wide", [](const EncoderSpec&, NormKind norm) -> std::shared_ptr<Encoder> {
    return std::make_shared<TinyEncoder>(std::array<int64_t, 4>{8, 8, 8, 8}, norm);
  });
  EncoderSpec spec;
  spec.name = "tiny_wide";
  auto enc = make_encoder(spec, NormKind::batch);
  CHECK(enc->channels()[3] == 8);
}

TEST_CASE("depth pyramid mirrors the rgb pyramid") {
  auto rgb_enc = make_encoder(EncoderSpec{}, NormKind::group);
  auto depth_enc = make_encoder(EncoderSpec{}, NormKind::group);
  torch::NoGradGuard no_grad;
  auto r = encode_rgb(*rgb_enc, torch::rand({4, 3, 64, 64}));
  auto d = encode_depth(*depth_enc, torch::zeros({4, 1, 64, 64}));
  CHECK(d.source == PyramidSource::depth_encoder);
  for (int i = 0; i < 4; ++i) {
    CHECK(d.levels[i].sizes() == r.levels[i].sizes());
    CHECK(d.levels[i].size(0) == 4);
    CHECK(torch::isfinite(d.levels[i]).all().item<bool>());
  }
}

TEST_CASE("encoders reject wrong channel counts") {
  auto enc = make_encoder(EncoderSpec{}, NormKind::group);
  CHECK_THROWS_AS(encode_rgb(*enc, torch::rand({1, 1, 64, 64})), ShapeMismatch);
  CHECK_THROWS_AS(encode_depth(*enc, torch::rand({1, 3, 64, 64})), ShapeMismatch);
}

TEST_CASE("encoder output is deterministic for fixed parameters") {
  torch::manual_seed(3);
  auto enc = make_encoder(EncoderSpec{}, NormKind::group);
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({1, 3, 64, 64});
  auto a = encode_rgb(*enc, x), b = encode_rgb(*enc, x);
  for (int i = 0; i < 4; ++i) CHECK(torch::equal(a.levels[i], b.levels[i]));
}

TEST_CASE("every pyramid element depends on the input") {
  auto enc = make_encoder(EncoderSpec{}, NormKind::group);
  auto x = torch::rand({1, 3, 32, 32}).requires_grad_(true);
  auto p = enc->forward(x);
  torch::Tensor total = torch::zeros({});
  for (const auto& l : p) total = total + l.sum();
  total.backward();
  CHECK(x.grad().abs().max().item<double>() > 0.0);
}
