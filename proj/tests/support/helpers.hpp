#pragma once

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dsnet/config.hpp"
#include "dsnet/model.hpp"

namespace testing {

namespace fs = std::filesystem;

// Removes the directory on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("dsnet_" + tag + "_" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline torch::TensorOptions f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

// Smallest model the architecture allows; used for fast structural and
// gradient tests.
inline dsnet::ModelConfig micro_config(int64_t width = 4) {
  dsnet::ModelConfig c;
  c.input_size = 64;
  c.encoder.channels_per_level = {width, width, width, width};
  c.decoder.width = width;
  return c;
}

struct GradReport {
  double worst = 0.0;  // largest relative discrepancy seen
  int64_t checked = 0;
};

// Central finite differences of a scalar function against its autograd
// gradient, element by element, for every input tensor (float64, requires_grad).
inline GradReport check_gradients(const std::function<torch::Tensor(const std::vector<torch::Tensor>&)>& f,
                                  std::vector<torch::Tensor> inputs, double h = 1e-6) {
  for (auto& x : inputs) x = x.detach().clone().set_requires_grad(true);
  auto y = f(inputs);
  auto grads = torch::autograd::grad({y}, inputs, {}, false, false, true);
  GradReport report;
  torch::NoGradGuard no_grad;
  for (size_t k = 0; k < inputs.size(); ++k) {
    auto flat = inputs[k].view(-1);
    auto analytic = grads[k].defined() ? grads[k].reshape(-1) : torch::zeros_like(flat);
    for (int64_t i = 0; i < flat.numel(); ++i) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + h;
      const double up = f(inputs).item<double>();
      flat[i] = orig - h;
      const double down = f(inputs).item<double>();
      flat[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i].item<double>();
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
      report.worst = std::max(report.worst, std::abs(a - numeric) / scale);
      ++report.checked;
    }
  }
  return report;
}

// Directional derivative check: for each named parameter group, compares
// grad . v with the central difference of f along a random direction v.
struct GroupCheck {
  std::string group;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative = 0.0;
};

inline std::vector<GroupCheck> check_parameter_groups(
    torch::nn::Module& model, const std::vector<std::string>& groups,
    const std::function<torch::Tensor()>& f, double h = 1e-5, uint64_t seed = 7) {
  std::vector<GroupCheck> out;
  for (auto& p : model.parameters()) {
    if (p.grad().defined()) p.grad().zero_();
  }
  f().backward();
  auto gen = torch::make_generator<at::CPUGeneratorImpl>(seed);
  for (const auto& g : groups) {
    std::vector<torch::Tensor> params, dirs;
    for (auto& item : model.named_parameters(true)) {
      if (item.key().rfind(g + ".", 0) == 0) {
        params.push_back(item.value());
        dirs.push_back(at::randn(item.value().sizes(), gen, item.value().options()));
      }
    }
    if (params.empty()) continue;
    double analytic = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
      if (params[i].grad().defined()) analytic += (params[i].grad() * dirs[i]).sum().item<double>();
    }
    torch::NoGradGuard no_grad;
    auto shift = [&](double s) {
      for (size_t i = 0; i < params.size(); ++i) params[i].add_(dirs[i], s);
    };
    shift(h);
    const double up = f().item<double>();
    shift(-2.0 * h);
    const double down = f().item<double>();
    shift(h);
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    out.push_back({g, analytic, numeric, std::abs(analytic - numeric) / scale});
  }
  return out;
}

}  // namespace testing
