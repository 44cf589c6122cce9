#include "dsnet/losses.hpp"

#include <cmath>

#include "dsnet/core_types.hpp"
#include "dsnet/layers.hpp"

namespace dsnet {

void validate(const LossWeights& w) {
  for (double v : {w.alpha, w.gamma, w.beta1, w.beta2, w.lambda_max}) {
    if (!(v >= 0.0)) throw ConfigError("loss weights must be nonnegative");
  }
}

namespace {

torch::Tensor bce_elementwise(const torch::Tensor& p, const torch::Tensor& g) {
  require_same_shape(p, g, "BCE");
  auto q = p.clamp(kBceEpsilon, 1.0 - kBceEpsilon);
  return -(g * torch::log(q) + (1.0 - g) * torch::log1p(-q));
}

torch::Tensor sq_diff(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  require_same_shape(a, b, what);
  return (a - b).pow(2);
}

}  // namespace

torch::Tensor bce_loss(const torch::Tensor& p, const torch::Tensor& g) {
  return bce_elementwise(p, g).mean();
}

torch::Tensor mse_loss(const torch::Tensor& a, const torch::Tensor& b) {
  return sq_diff(a, b, "MSE").mean();
}

torch::Tensor supervised_loss_per_sample(const torch::Tensor& p_s, const torch::Tensor& g_s,
                                         const torch::Tensor& p_d, const torch::Tensor& g_d,
                                         double alpha) {
  auto loss = per_sample_mean(bce_elementwise(p_s, g_s));
  if (p_d.defined()) loss = loss + alpha * per_sample_mean(sq_diff(p_d, g_d, "depth MSE"));
  return loss;
}

torch::Tensor supervised_loss(const torch::Tensor& p_s, const torch::Tensor& g_s,
                              const torch::Tensor& p_d, const torch::Tensor& g_d, double alpha) {
  return supervised_loss_per_sample(p_s, g_s, p_d, g_d, alpha).mean();
}

torch::Tensor consistency_loss_per_sample(const torch::Tensor& student_saliency,
                                          const torch::Tensor& teacher_saliency,
                                          const std::vector<torch::Tensor>& student_attention,
                                          const std::vector<torch::Tensor>& teacher_attention,
                                          double gamma) {
  if (student_attention.size() != teacher_attention.size() ||
      (!student_attention.empty() && student_attention.size() != kPyramidLevels)) {
    throw WrongLevelCount("consistency loss needs " + std::to_string(kPyramidLevels) +
                          " attention maps per side, got " + std::to_string(student_attention.size()) +
                          " and " + std::to_string(teacher_attention.size()));
  }
  auto loss = per_sample_mean(sq_diff(student_saliency, teacher_saliency, "saliency consistency"));
  if (student_attention.empty()) return loss;
  auto attention = torch::zeros_like(loss);
  for (size_t l = 0; l < student_attention.size(); ++l) {
    attention = attention + per_sample_mean(sq_diff(student_attention[l], teacher_attention[l],
                                                    "attention consistency"));
  }
  return loss + gamma * attention;
}

torch::Tensor consistency_loss(const torch::Tensor& student_saliency,
                               const torch::Tensor& teacher_saliency,
                               const std::vector<torch::Tensor>& student_attention,
                               const std::vector<torch::Tensor>& teacher_attention, double gamma) {
  return consistency_loss_per_sample(student_saliency, teacher_saliency, student_attention,
                                     teacher_attention, gamma)
      .mean();
}

double lambda_warmup(double t, double t_max, double lambda_max) {
  if (!(t_max > 0.0) || t < 0.0 || t > t_max) {
    throw OutOfRange("lambda_warmup needs 0 <= t <= t_max and t_max > 0");
  }
  const double phase = 1.0 - t / t_max;
  return lambda_max * std::exp(-5.0 * phase * phase);
}

TotalLoss total_loss(const LabeledTerms& labeled, const UnlabeledTerms& unlabeled,
                     const LossWeights& weights, double t, double t_max) {
  if (!labeled.supervised.defined() || labeled.supervised.numel() == 0) {
    throw EmptyLabeledBatch("total loss needs at least one labeled sample");
  }
  TotalLoss out;
  auto lab = labeled.supervised;
  if (labeled.reconstruction.defined()) {
    require_same_shape(labeled.supervised, labeled.reconstruction, "labeled terms");
    lab = lab + weights.beta1 * labeled.reconstruction;
  }
  out.labeled = lab.mean();
  out.lambda = lambda_warmup(t, t_max, weights.lambda_max);

  if (!unlabeled.consistency.defined() || unlabeled.consistency.numel() == 0) {
    out.unlabeled = torch::zeros({}, out.labeled.options());
    out.total = out.labeled;
    return out;
  }
  auto unl = unlabeled.consistency;
  if (unlabeled.reconstruction.defined()) {
    require_same_shape(unlabeled.consistency, unlabeled.reconstruction, "unlabeled terms");
    unl = unl + weights.beta2 * unlabeled.reconstruction;
  }
  out.unlabeled = unl.mean();
  out.total = out.labeled + out.lambda * out.unlabeled;
  return out;
}

}  // namespace dsnet
