#include <doctest.h>

#include <cmath>

#include "dsnet/errors.hpp"
#include "dsnet/losses.hpp"
#include "dsnet/mean_teacher.hpp"
#include "support/helpers.hpp"

using namespace dsnet;

TEST_CASE("EMA closed form on a scalar") {
  std::vector<torch::Tensor> teacher{torch::tensor({1.0}, testing::f64())};
  const std::vector<torch::Tensor> student{torch::tensor({0.0}, testing::f64())};
  ema_update(teacher, student, 0.99);
  CHECK(teacher[0].item<double>() == doctest::Approx(0.99).epsilon(1e-15));
}

TEST_CASE("EMA after k steps against a constant student") {
  const double d = 0.99, t0 = 1.7, s = -0.4;
  for (int k : {1, 5, 50}) {
    std::vector<torch::Tensor> teacher{torch::tensor({t0}, testing::f64())};
    const std::vector<torch::Tensor> student{torch::tensor({s}, testing::f64())};
    for (int i = 0; i < k; ++i) ema_update(teacher, student, d);
    const double expected = std::pow(d, k) * t0 + (1 - std::pow(d, k)) * s;
    CHECK(std::abs(teacher[0].item<double>() - expected) < 1e-10);
  }
}

TEST_CASE("EMA decay extremes") {
  std::vector<torch::Tensor> teacher{torch::randn({3, 3}, testing::f64())};
  const auto before = teacher[0].clone();
  const std::vector<torch::Tensor> student{torch::randn({3, 3}, testing::f64())};
  ema_update(teacher, student, 1.0);
  CHECK(torch::equal(teacher[0], before));
  ema_update(teacher, student, 0.0);
  CHECK(torch::equal(teacher[0], student[0]));
}

TEST_CASE("EMA rejects mismatched parameter lists") {
  std::vector<torch::Tensor> teacher{torch::zeros({2})};
  CHECK_THROWS_AS(ema_update(teacher, {torch::zeros({3})}, 0.9), ShapeMismatch);
  CHECK_THROWS_AS(ema_update(teacher, {}, 0.9), ShapeMismatch);
}

TEST_CASE("EMA teacher tracks the student") {
  torch::manual_seed(3);
  Ddcnn student(testing::micro_config());
  EmaTeacher teacher(student, 0.5);
  for (const auto& p : teacher.model()->parameters()) CHECK(!p.requires_grad());
  auto t0 = teacher.model()->parameters().front().clone();
  {
    torch::NoGradGuard no_grad;
    for (auto& p : student->parameters()) p.add_(1.0);
  }
  teacher.update(student);
  CHECK(teacher.step() == 1);
  CHECK(torch::allclose(teacher.model()->parameters().front(), t0 + 0.5));
  CHECK_THROWS_AS(EmaTeacher(student, 1.5), ConfigError);
}

TEST_CASE("perturb with zero jitter is the identity") {
  auto x = torch::rand({2, 3, 8, 8});
  CHECK(torch::equal(perturb(x, 0.0, 42), x));
  auto img = torch::rand({3, 8, 8});
  CHECK(torch::equal(perturb(img, 0.0, 7), img));
}

TEST_CASE("perturb is deterministic, bounded and seed dependent") {
  auto x = torch::rand({2, 3, 8, 8});
  auto a = perturb(x, 0.4, 42), b = perturb(x, 0.4, 42), c = perturb(x, 0.4, 43);
  CHECK(torch::equal(a, b));
  CHECK(!torch::equal(a, c));
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto y = perturb(x * 1.0, 0.9, seed);
    CHECK(y.min().item<double>() >= 0.0);
    CHECK(y.max().item<double>() <= 1.0);
  }
}

TEST_CASE("perturbing an image plane keeps it an rgb plane") {
  auto plane = ImagePlane::make(torch::rand({3, 8, 8}), PlaneKind::rgb);
  auto out = perturb(plane, 0.4, 1);
  CHECK(out.kind() == PlaneKind::rgb);
  CHECK(out.data().sizes() == plane.data().sizes());
}

TEST_CASE("identical student and teacher with no jitter have zero consistency") {
  torch::manual_seed(6);
  Ddcnn student(testing::micro_config());
  auto teacher = clone_model(student);
  PerturbOptions opts;
  opts.jitter = 0.0;
  auto out = paired_forward(student, teacher, torch::rand({2, 3, 64, 64}), torch::rand({2, 1, 64, 64}), 9, opts);
  auto loss = consistency_loss(out.student.prediction.saliency, out.teacher.prediction.saliency,
                               out.student.fusion.attention, out.teacher.fusion.attention, 0.1);
  CHECK(loss.item<double>() == 0.0);
}

TEST_CASE("teacher outputs carry no gradient") {
  torch::manual_seed(6);
  Ddcnn student(testing::micro_config());
  EmaTeacher teacher(student, 0.99);
  auto out = paired_forward(student, teacher.model(), torch::rand({1, 3, 64, 64}), torch::rand({1, 1, 64, 64}), 3,
                            PerturbOptions{});
  CHECK(!out.teacher.prediction.saliency.requires_grad());
  CHECK(out.student.prediction.saliency.requires_grad());
  CHECK(out.student.fusion.attention.size() == out.teacher.fusion.attention.size());
  for (size_t i = 0; i < out.student.fusion.attention.size(); ++i) {
    CHECK(out.student.fusion.attention[i].sizes() == out.teacher.fusion.attention[i].sizes());
  }
  consistency_loss(out.student.prediction.saliency, out.teacher.prediction.saliency, out.student.fusion.attention,
                   out.teacher.fusion.attention, 0.1)
      .backward();
  for (const auto& p : teacher.model()->parameters()) CHECK(!p.grad().defined());
  bool student_touched = false;
  for (const auto& p : student->parameters()) student_touched |= p.grad().defined() && p.grad().abs().sum().item<double>() > 0;
  CHECK(student_touched);
}

TEST_CASE("teacher input modes") {
  CHECK(parse_teacher_input("clean") == TeacherInput::clean);
  CHECK(to_string(parse_teacher_input("jitter")) == "jitter");
  CHECK_THROWS_AS(parse_teacher_input("noise"), ConfigError);
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(5, 3) == mix_seed(5, 3));
}
