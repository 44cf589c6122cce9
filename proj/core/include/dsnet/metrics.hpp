#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dsnet {

// Saliency measures take a prediction in [0,1] and a binary ground truth of
// the same H x W size (a leading singleton channel is accepted). They throw
// ShapeMismatch when the sizes differ.

/// Mean absolute error.
double mae(const torch::Tensor& pred, const torch::Tensor& gt);

/// Maximum F-measure over `thresholds` uniform thresholds k / (thresholds-1).
/// A pixel is positive when pred >= threshold; F is 0 for a map without
/// positives. Throws EmptyGroundTruth when gt has no positive pixel.
double f_measure_max(const torch::Tensor& pred, const torch::Tensor& gt, double beta_sq = 0.3,
                     int thresholds = 256);

/// Structure measure: balance * S_object + (1 - balance) * S_region, with the
/// mean-based fallbacks for all-background and all-foreground ground truths.
double s_measure(const torch::Tensor& pred, const torch::Tensor& gt, double balance = 0.5);

/// Enhanced-alignment measure of a binary map against gt, averaged over pixels.
double e_measure_binary(const torch::Tensor& binary_pred, const torch::Tensor& gt);

/// Maximum enhanced-alignment measure over the threshold grid.
double e_measure_max(const torch::Tensor& pred, const torch::Tensor& gt, int thresholds = 256);

/// Min-max rescaling used before thresholding; a constant map is returned as is.
torch::Tensor normalize_prediction(const torch::Tensor& pred);

struct DepthErrors {
  double mae = 0.0;
  double rmse = 0.0;
  double imae = 0.0;
  double irmse = 0.0;
};

/// Depth errors over pixels where `valid_mask` is nonzero; the three tensors
/// share one shape of any rank. The inverse
/// variants use only valid pixels where both depths are positive. Throws
/// NoValidPixels.
DepthErrors depth_metrics(const torch::Tensor& pred, const torch::Tensor& gt,
                          const torch::Tensor& valid_mask);

struct SaliencyScores {
  double s_measure = 0.0;
  double f_max = 0.0;
  double e_max = 0.0;
  double mae = 0.0;
};

/// All four measures. An all-background ground truth scores F as 0.
SaliencyScores evaluate_pair(const torch::Tensor& pred, const torch::Tensor& gt);

struct ImageReport {
  std::string stem;
  SaliencyScores scores;
};

struct EvalReport {
  std::vector<ImageReport> images;
  SaliencyScores mean;
};

/// Scores every prediction in `pred_dir` against the same-stem mask in
/// `gt_dir`, resizing predictions bilinearly to the mask's resolution.
/// Throws StemMismatch naming stems present on only one side.
EvalReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

/// CSV with columns stem,s_measure,f_max,e_max,mae; the last row is "mean".
void write_csv(std::ostream& os, const EvalReport& report);
/// Aligned plain-text table with the same rows.
void write_table(std::ostream& os, const EvalReport& report);

}  // namespace dsnet
