#pragma once

#include <torch/torch.h>

#include <vector>

namespace dsnet {

struct LossWeights {
  double alpha = 1.0;       ///< depth term of the supervised loss
  double gamma = 0.1;       ///< attention term of the consistency loss
  double beta1 = 0.01;      ///< reconstruction weight, labeled samples
  double beta2 = 1.0;       ///< reconstruction weight, unlabeled samples
  double lambda_max = 1.0;  ///< ceiling of the warm-up ramp
};

/// Throws ConfigError if any weight is negative.
void validate(const LossWeights& weights);

/// Probabilities are clamped to [eps, 1 - eps] before the logarithm.
inline constexpr double kBceEpsilon = 1e-7;

/// Binary cross-entropy, mean over all elements.
torch::Tensor bce_loss(const torch::Tensor& p, const torch::Tensor& g);
/// Mean squared error over all elements.
torch::Tensor mse_loss(const torch::Tensor& a, const torch::Tensor& b);

/// BCE(p_s, g_s) + alpha * MSE(p_d, g_d), one value per batch element (shape
/// [B]). With an undefined `p_d` the depth term is dropped.
torch::Tensor supervised_loss_per_sample(const torch::Tensor& p_s, const torch::Tensor& g_s,
                                         const torch::Tensor& p_d, const torch::Tensor& g_d,
                                         double alpha);

/// Batch mean of supervised_loss_per_sample.
torch::Tensor supervised_loss(const torch::Tensor& p_s, const torch::Tensor& g_s,
                              const torch::Tensor& p_d, const torch::Tensor& g_d, double alpha);

/// MSE(student saliency, teacher saliency) + gamma * sum over levels of
/// MSE(student attention, teacher attention), per batch element. Attention
/// lists must both hold four maps, or both be empty when the model has no
/// attention gate. Throws WrongLevelCount or ShapeMismatch.
torch::Tensor consistency_loss_per_sample(const torch::Tensor& student_saliency,
                                          const torch::Tensor& teacher_saliency,
                                          const std::vector<torch::Tensor>& student_attention,
                                          const std::vector<torch::Tensor>& teacher_attention,
                                          double gamma);

torch::Tensor consistency_loss(const torch::Tensor& student_saliency,
                               const torch::Tensor& teacher_saliency,
                               const std::vector<torch::Tensor>& student_attention,
                               const std::vector<torch::Tensor>& teacher_attention, double gamma);

/// lambda_max * exp(-5 (1 - t / t_max)^2). Throws OutOfRange unless
/// 0 <= t <= t_max and t_max > 0.
double lambda_warmup(double t, double t_max, double lambda_max);

/// Per-sample loss terms of the labeled part of a batch, each of shape [N1].
struct LabeledTerms {
  torch::Tensor supervised;
  /// Sum over the four levels of the reconstruction loss; undefined when the
  /// model has no reconstruction block.
  torch::Tensor reconstruction;
};

/// Per-sample loss terms of the unlabeled part, each of shape [N2]. An
/// undefined or empty `consistency` means N2 = 0.
struct UnlabeledTerms {
  torch::Tensor consistency;
  torch::Tensor reconstruction;
};

struct TotalLoss {
  torch::Tensor labeled;    ///< mean over N1 of (L_s + beta1 * sum L_r)
  torch::Tensor unlabeled;  ///< mean over N2 of (L_c + beta2 * sum L_r), 0 when N2 = 0
  double lambda = 0.0;
  torch::Tensor total;      ///< labeled + lambda * unlabeled
};

/// Combines labeled and unlabeled terms with the warm-up weight lambda(t).
/// Throws EmptyLabeledBatch when N1 = 0.
TotalLoss total_loss(const LabeledTerms& labeled, const UnlabeledTerms& unlabeled,
                     const LossWeights& weights, double t, double t_max);

}  // namespace dsnet
