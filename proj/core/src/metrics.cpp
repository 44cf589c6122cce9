#include "dsnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "dsnet/core_types.hpp"
#include "dsnet/data.hpp"

namespace dsnet {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Row-major H x W view over doubles.
struct Map {
  int64_t h = 0;
  int64_t w = 0;
  std::vector<double> v;

  double at(int64_t y, int64_t x) const { return v[static_cast<size_t>(y * w + x)]; }
  size_t size() const { return v.size(); }
};

Map to_map(const torch::Tensor& t) {
  auto x = t.detach();
  if (x.dim() == 3 && x.size(0) == 1) x = x.squeeze(0);
  if (x.dim() != 2) throw ShapeMismatch("metric input must be H x W, got " + shape_string(t.sizes()));
  x = x.to(torch::kCPU, torch::kFloat64).contiguous();
  Map m{x.size(0), x.size(1), {}};
  const double* p = x.data_ptr<double>();
  m.v.assign(p, p + x.numel());
  return m;
}

void check_pair(const Map& p, const Map& g) {
  if (p.h != g.h || p.w != g.w) {
    throw ShapeMismatch("prediction " + std::to_string(p.h) + "x" + std::to_string(p.w) +
                        " vs ground truth " + std::to_string(g.h) + "x" + std::to_string(g.w));
  }
}

Map binarize_gt(Map g) {
  for (auto& x : g.v) x = x > 0.5 ? 1.0 : 0.0;
  return g;
}

Map normalized(Map p) {
  const auto [lo, hi] = std::minmax_element(p.v.begin(), p.v.end());
  const double a = *lo, b = *hi;
  if (b > a) {
    for (auto& x : p.v) x = (x - a) / (b - a);
  }
  return p;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Similarity of the foreground (or background) distribution of a map: mean x
// and sample standard deviation over the pixels selected by `mask`.
double object_score(const Map& p, const Map& mask) {
  std::vector<double> vals;
  for (size_t i = 0; i < p.size(); ++i) {
    if (mask.v[i] > 0.5) vals.push_back(p.v[i]);
  }
  if (vals.empty()) return 0.0;
  const double x = mean_of(vals);
  double var = 0.0;
  for (double v : vals) var += (v - x) * (v - x);
  const double sigma = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double s_object(const Map& p, const Map& g) {
  Map fg = p, bg = p, inv = g;
  for (size_t i = 0; i < p.size(); ++i) {
    fg.v[i] = g.v[i] > 0.5 ? p.v[i] : 0.0;
    bg.v[i] = g.v[i] > 0.5 ? 0.0 : 1.0 - p.v[i];
    inv.v[i] = 1.0 - g.v[i];
  }
  const double u = mean_of(g.v);
  return u * object_score(fg, g) + (1.0 - u) * object_score(bg, inv);
}

// SSIM-style similarity of a rectangular block [y0,y1) x [x0,x1).
double block_ssim(const Map& p, const Map& g, int64_t y0, int64_t y1, int64_t x0, int64_t x1) {
  const double n = static_cast<double>((y1 - y0) * (x1 - x0));
  double mx = 0.0, my = 0.0;
  for (int64_t y = y0; y < y1; ++y) {
    for (int64_t x = x0; x < x1; ++x) {
      mx += p.at(y, x);
      my += g.at(y, x);
    }
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int64_t y = y0; y < y1; ++y) {
    for (int64_t x = x0; x < x1; ++x) {
      const double dx = p.at(y, x) - mx, dy = g.at(y, x) - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  sxx /= (n - 1.0 + kEps);
  syy /= (n - 1.0 + kEps);
  sxy /= (n - 1.0 + kEps);
  const double alpha = 4.0 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sxx + syy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

double s_region(const Map& p, const Map& g) {
  // Centroid of the foreground in 1-based coordinates, rounded half away
  // from zero; the image centre when there is no foreground.
  double total = 0.0, sx = 0.0, sy = 0.0;
  for (int64_t y = 0; y < g.h; ++y) {
    for (int64_t x = 0; x < g.w; ++x) {
      const double v = g.at(y, x);
      total += v;
      sx += v * static_cast<double>(x + 1);
      sy += v * static_cast<double>(y + 1);
    }
  }
  int64_t cx, cy;
  if (total == 0.0) {
    cx = std::lround(static_cast<double>(g.w) / 2.0);
    cy = std::lround(static_cast<double>(g.h) / 2.0);
  } else {
    cx = std::lround(sx / total);
    cy = std::lround(sy / total);
  }
  const double area = static_cast<double>(g.h * g.w);
  struct Block {
    int64_t y0, y1, x0, x1;
  };
  const Block blocks[4] = {{0, cy, 0, cx}, {0, cy, cx, g.w}, {cy, g.h, 0, cx}, {cy, g.h, cx, g.w}};
  double score = 0.0;
  for (const auto& b : blocks) {
    const double n = static_cast<double>((b.y1 - b.y0) * (b.x1 - b.x0));
    if (n <= 0.0) continue;
    score += (n / area) * block_ssim(p, g, b.y0, b.y1, b.x0, b.x1);
  }
  return score;
}

double e_measure_maps(const Map& fm, const Map& g) {
  const double n = static_cast<double>(g.size());
  const double mu_g = mean_of(g.v);
  double sum = 0.0;
  if (mu_g == 0.0) {
    for (double x : fm.v) sum += 1.0 - x;
  } else if (mu_g == 1.0) {
    for (double x : fm.v) sum += x;
  } else {
    const double mu_f = mean_of(fm.v);
    for (size_t i = 0; i < fm.size(); ++i) {
      const double af = fm.v[i] - mu_f;
      const double ag = g.v[i] - mu_g;
      const double align = 2.0 * ag * af / (ag * ag + af * af + kEps);
      sum += (align + 1.0) * (align + 1.0) / 4.0;
    }
  }
  return sum / n;
}

double threshold_at(int k, int thresholds) {
  return thresholds > 1 ? static_cast<double>(k) / static_cast<double>(thresholds - 1) : 0.5;
}

}  // namespace

torch::Tensor normalize_prediction(const torch::Tensor& pred) {
  const auto lo = pred.min(), hi = pred.max();
  if (!(hi.item<double>() > lo.item<double>())) return pred;
  return (pred - lo) / (hi - lo);
}

double mae(const torch::Tensor& pred, const torch::Tensor& gt) {
  const auto p = to_map(pred), g = to_map(gt);
  check_pair(p, g);
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) s += std::abs(p.v[i] - g.v[i]);
  return s / static_cast<double>(p.size());
}

double f_measure_max(const torch::Tensor& pred, const torch::Tensor& gt, double beta_sq,
                     int thresholds) {
  const auto p = normalized(to_map(pred));
  const auto g = binarize_gt(to_map(gt));
  check_pair(p, g);
  double positives_gt = 0.0;
  for (double x : g.v) positives_gt += x;
  if (positives_gt == 0.0) throw EmptyGroundTruth("F-measure needs at least one positive pixel");
  double best = 0.0;
  for (int k = 0; k < thresholds; ++k) {
    const double tau = threshold_at(k, thresholds);
    double tp = 0.0, predicted = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      if (p.v[i] >= tau) {
        predicted += 1.0;
        tp += g.v[i];
      }
    }
    if (predicted == 0.0) continue;
    const double precision = tp / predicted;
    const double recall = tp / positives_gt;
    const double denom = beta_sq * precision + recall;
    const double f = denom > 0.0 ? (1.0 + beta_sq) * precision * recall / denom : 0.0;
    best = std::max(best, f);
  }
  return best;
}

double s_measure(const torch::Tensor& pred, const torch::Tensor& gt, double balance) {
  const auto p = to_map(pred);
  const auto g = binarize_gt(to_map(gt));
  check_pair(p, g);
  const double y = mean_of(g.v);
  if (y == 0.0) return std::clamp(1.0 - mean_of(p.v), 0.0, 1.0);
  if (y == 1.0) return std::clamp(mean_of(p.v), 0.0, 1.0);
  const double q = balance * s_object(p, g) + (1.0 - balance) * s_region(p, g);
  return std::clamp(q, 0.0, 1.0);
}

double e_measure_binary(const torch::Tensor& binary_pred, const torch::Tensor& gt) {
  const auto fm = binarize_gt(to_map(binary_pred));
  const auto g = binarize_gt(to_map(gt));
  check_pair(fm, g);
  return e_measure_maps(fm, g);
}

double e_measure_max(const torch::Tensor& pred, const torch::Tensor& gt, int thresholds) {
  const auto p = normalized(to_map(pred));
  const auto g = binarize_gt(to_map(gt));
  check_pair(p, g);
  double best = 0.0;
  Map fm = p;
  for (int k = 0; k < thresholds; ++k) {
    const double tau = threshold_at(k, thresholds);
    for (size_t i = 0; i < p.size(); ++i) fm.v[i] = p.v[i] >= tau ? 1.0 : 0.0;
    best = std::max(best, e_measure_maps(fm, g));
  }
  return best;
}

DepthErrors depth_metrics(const torch::Tensor& pred, const torch::Tensor& gt,
                          const torch::Tensor& valid_mask) {
  if (pred.sizes() != gt.sizes() || pred.sizes() != valid_mask.sizes()) {
    throw ShapeMismatch("depth metrics: prediction " + shape_string(pred.sizes()) + ", ground truth " +
                        shape_string(gt.sizes()) + ", mask " + shape_string(valid_mask.sizes()));
  }
  // Depth maps may come with any layout; only the pixel correspondence matters.
  const auto p = to_map(pred.reshape({1, -1})), g = to_map(gt.reshape({1, -1})),
             m = to_map(valid_mask.reshape({1, -1}));
  double n = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  double ni = 0.0, iabs_sum = 0.0, isq_sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (m.v[i] == 0.0) continue;
    const double d = p.v[i] - g.v[i];
    n += 1.0;
    abs_sum += std::abs(d);
    sq_sum += d * d;
    if (p.v[i] > 0.0 && g.v[i] > 0.0) {
      const double di = 1.0 / p.v[i] - 1.0 / g.v[i];
      ni += 1.0;
      iabs_sum += std::abs(di);
      isq_sum += di * di;
    }
  }
  if (n == 0.0) throw NoValidPixels("depth metrics: every pixel is masked out");
  DepthErrors e;
  e.mae = abs_sum / n;
  e.rmse = std::sqrt(sq_sum / n);
  if (ni > 0.0) {
    e.imae = iabs_sum / ni;
    e.irmse = std::sqrt(isq_sum / ni);
  }
  return e;
}

SaliencyScores evaluate_pair(const torch::Tensor& pred, const torch::Tensor& gt) {
  SaliencyScores s;
  s.mae = mae(pred, gt);
  s.s_measure = s_measure(pred, gt);
  s.e_max = e_measure_max(pred, gt);
  s.f_max = gt.gt(0.5).any().item<bool>() ? f_measure_max(pred, gt) : 0.0;
  return s;
}

EvalReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
  std::map<std::string, std::filesystem::path> preds, gts;
  for (const auto& p : list_images(pred_dir)) preds.emplace(p.stem().string(), p);
  for (const auto& p : list_images(gt_dir)) gts.emplace(p.stem().string(), p);
  std::vector<std::string> orphans;
  for (const auto& [stem, _] : gts) {
    if (!preds.count(stem)) orphans.push_back(stem);
  }
  for (const auto& [stem, _] : preds) {
    if (!gts.count(stem)) orphans.push_back(stem);
  }
  if (!orphans.empty()) {
    std::sort(orphans.begin(), orphans.end());
    throw StemMismatch(orphans);
  }

  EvalReport report;
  for (const auto& [stem, gt_path] : gts) {
    const auto gt = read_mask(gt_path);
    auto pred = read_gray(preds.at(stem));
    pred = resize_plane(pred, gt.height(), gt.width());
    report.images.push_back({stem, evaluate_pair(pred.data(), gt.data())});
  }
  if (!report.images.empty()) {
    const double n = static_cast<double>(report.images.size());
    for (const auto& r : report.images) {
      report.mean.s_measure += r.scores.s_measure / n;
      report.mean.f_max += r.scores.f_max / n;
      report.mean.e_max += r.scores.e_max / n;
      report.mean.mae += r.scores.mae / n;
    }
  }
  return report;
}

void write_csv(std::ostream& os, const EvalReport& report) {
  os << "stem,s_measure,f_max,e_max,mae\n";
  auto row = [&](const std::string& stem, const SaliencyScores& s) {
    os << stem << ',' << std::setprecision(6) << std::fixed << s.s_measure << ',' << s.f_max << ','
       << s.e_max << ',' << s.mae << '\n';
  };
  for (const auto& r : report.images) row(r.stem, r.scores);
  row("mean", report.mean);
}

void write_table(std::ostream& os, const EvalReport& report) {
  size_t width = 4;
  for (const auto& r : report.images) width = std::max(width, r.stem.size());
  os << std::left << std::setw(static_cast<int>(width)) << "stem" << std::right << std::setw(10)
     << "S_m" << std::setw(10) << "F_max" << std::setw(10) << "E_max" << std::setw(10) << "MAE"
     << '\n';
  auto row = [&](const std::string& stem, const SaliencyScores& s) {
    os << std::left << std::setw(static_cast<int>(width)) << stem << std::right << std::fixed
       << std::setprecision(4) << std::setw(10) << s.s_measure << std::setw(10) << s.f_max
       << std::setw(10) << s.e_max << std::setw(10) << s.mae << '\n';
  };
  for (const auto& r : report.images) row(r.stem, r.scores);
  row("mean", report.mean);
}

}  // namespace dsnet
