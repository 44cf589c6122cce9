#include "dsnet/pipeline.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <map>

#include "dsnet/decoupling.hpp"
#include "dsnet/layers.hpp"
#include "dsnet/mean_teacher.hpp"

namespace dsnet {

double poly_lr(double t, double t_max, double lr0, double power) {
  if (!(t_max > 0.0) || t < 0.0 || t > t_max) {
    throw OutOfRange("poly_lr needs 0 <= t <= t_max, got t=" + std::to_string(t) +
                     " t_max=" + std::to_string(t_max));
  }
  return lr0 * std::pow(1.0 - t / t_max, power);
}

ParamGroups split_weight_decay(const std::vector<torch::Tensor>& params) {
  ParamGroups groups;
  for (const auto& p : params) {
    (p.dim() <= 1 ? groups.exempt : groups.decayed).push_back(p);
  }
  return groups;
}

std::unique_ptr<torch::optim::SGD> make_sgd(const std::vector<torch::Tensor>& params,
                                            const RunConfig& run) {
  auto groups = split_weight_decay(params);
  auto decayed = std::make_unique<torch::optim::SGDOptions>(run.lr0);
  decayed->momentum(run.momentum).weight_decay(run.weight_decay);
  auto exempt = std::make_unique<torch::optim::SGDOptions>(run.lr0);
  exempt->momentum(run.momentum).weight_decay(0.0);
  std::vector<torch::optim::OptimizerParamGroup> param_groups;
  param_groups.emplace_back(groups.decayed, std::move(decayed));
  param_groups.emplace_back(groups.exempt, std::move(exempt));
  return std::make_unique<torch::optim::SGD>(param_groups,
                                             torch::optim::SGDOptions(run.lr0).momentum(run.momentum));
}

void set_learning_rate(torch::optim::Optimizer& optimizer, double lr) {
  for (auto& group : optimizer.param_groups()) group.options().set_lr(lr);
}

namespace {

struct Batch {
  torch::Tensor rgb;
  torch::Tensor depth;
  torch::Tensor gt;
};

Batch make_batch(const std::vector<Sample>& pool, const std::vector<size_t>& indices,
                 uint64_t seed, const AugmentOptions& augment_options, torch::Device device) {
  std::vector<torch::Tensor> rgb, depth, gt;
  for (size_t j = 0; j < indices.size(); ++j) {
    const auto s = augment(pool[indices[j]], mix_seed(seed, j), augment_options);
    rgb.push_back(s.rgb.data());
    if (s.depth) depth.push_back(s.depth->data());
    if (s.gt) gt.push_back(s.gt->data());
  }
  Batch b;
  b.rgb = torch::stack(rgb).to(device);
  if (!depth.empty()) b.depth = torch::stack(depth).to(device);
  if (!gt.empty()) b.gt = torch::stack(gt).to(device);
  return b;
}

void require_planes(const std::vector<Sample>& pool, bool need_depth, bool need_gt,
                    const char* what) {
  for (const auto& s : pool) {
    if (need_depth && !s.depth) throw Error(std::string(what) + " sample '" + s.stem + "' has no depth");
    if (need_gt && !s.gt) throw Error(std::string(what) + " sample '" + s.stem + "' has no ground truth");
  }
}

std::vector<torch::Tensor> parameters_with_prefix(torch::nn::Module& model,
                                                  const std::vector<std::string>& prefixes) {
  std::vector<torch::Tensor> out;
  for (auto& item : model.named_parameters(true)) {
    for (const auto& p : prefixes) {
      if (item.key().rfind(p + ".", 0) == 0) {
        out.push_back(item.value());
        break;
      }
    }
  }
  return out;
}

torch::Tensor reconstruction_terms(const DdcnnOutput& out) {
  const auto& recon = out.decoupled.reconstruction;
  if (recon.empty()) return {};
  torch::Tensor sum;
  for (size_t i = 0; i < recon.size(); ++i) {
    auto term = reconstruction_loss_per_sample(recon[i], out.rgb_features.levels[i]);
    sum = sum.defined() ? sum + term : term;
  }
  return sum;
}

AugmentOptions augment_options(const Config& config) {
  AugmentOptions a = config.augment;
  a.size = config.model.input_size;
  return a;
}

void prepare_run(const Config& config) {
  config.validate();
  at::globalContext().setDeterministicAlgorithms(config.run.deterministic, true);
  torch::manual_seed(config.run.seed);
}

torch::Tensor rng_snapshot() {
  return at::detail::getDefaultCPUGenerator().get_state();
}

void log_step(const Config& config, const StepRecord& r) {
  if (config.run.log_every > 0 && (r.iteration % config.run.log_every == 0 ||
                                   r.iteration + 1 == config.run.max_iter)) {
    std::printf("iter %6lld  lr %.3e  lambda %.4f  labeled %.5f  unlabeled %.5f  total %.5f\n",
                static_cast<long long>(r.iteration), r.lr, r.lambda, r.labeled, r.unlabeled,
                r.total);
    std::fflush(stdout);
  }
}

TrainResult run_stage3(const Config& config, const std::vector<Sample>& labeled,
                       const std::vector<Sample>& unlabeled, const Checkpoint* init, bool semi,
                       const TrainOptions& options) {
  if (labeled.empty()) throw EmptyDataset("stage 3 needs labeled samples");
  if (semi && unlabeled.empty()) throw EmptyDataset("semi-supervised training needs unlabeled samples");
  if (semi && config.run.init == InitMode::checkpoint && init == nullptr) {
    throw MissingCheckpoint("stage 3 starts from the depth-pretraining checkpoint (or set train.init = scratch)");
  }
  prepare_run(config);
  const auto model_config = config.effective_model();
  require_planes(labeled, true, true, "labeled");
  if (semi) require_planes(unlabeled, true, false, "unlabeled");

  Ddcnn student(model_config);
  if (init != nullptr && config.run.init == InitMode::checkpoint) {
    copy_state_with_prefix(*student, *init->student, DdcnnImpl::depth_branch_modules());
  }
  student->to(options.device);
  student->train();

  std::optional<EmaTeacher> teacher;
  if (semi) {
    teacher.emplace(student, config.ema.decay);
    teacher->model()->eval();
  }

  LossWeights weights = config.loss;
  if (config.run.ablation.no_attention_consistency) weights.gamma = 0.0;

  auto optimizer = make_sgd(student->parameters(), config.run);
  const auto aug = augment_options(config);
  const auto& run = config.run;
  const auto n1 = static_cast<size_t>(run.batch_labeled);
  const auto n2 = semi ? static_cast<size_t>(run.batch_unlabeled) : size_t{0};
  PoolSampler labeled_sampler(labeled.size(), mix_seed(run.seed, 1));
  std::optional<PoolSampler> unlabeled_sampler;
  if (semi) unlabeled_sampler.emplace(unlabeled.size(), mix_seed(run.seed, 2));

  TrainResult result;
  const auto t_max = static_cast<double>(run.max_iter);
  for (int64_t t = 0; t < run.max_iter; ++t) {
    const double lr = poly_lr(static_cast<double>(t), t_max, run.lr0, run.poly_power);
    set_learning_rate(*optimizer, lr);
    const uint64_t iter_seed = mix_seed(run.seed, 1000 + static_cast<uint64_t>(t));

    const auto lb = make_batch(labeled, labeled_sampler.next(n1), mix_seed(iter_seed, 0), aug,
                               options.device);
    const auto out = student->forward(lb.rgb, lb.depth);
    LabeledTerms lterms;
    lterms.supervised = supervised_loss_per_sample(out.prediction.saliency, lb.gt,
                                                   out.prediction.depth, lb.depth, weights.alpha);
    lterms.reconstruction = reconstruction_terms(out);

    UnlabeledTerms uterms;
    if (semi) {
      const auto ub = make_batch(unlabeled, unlabeled_sampler->next(n2), mix_seed(iter_seed, 1),
                                 aug, options.device);
      const auto paired = paired_forward(student, teacher->model(), ub.rgb, ub.depth,
                                         mix_seed(iter_seed, 2), config.perturb);
      uterms.consistency = consistency_loss_per_sample(
          paired.student.prediction.saliency, paired.teacher.prediction.saliency,
          paired.student.fusion.attention, paired.teacher.fusion.attention, weights.gamma);
      uterms.reconstruction = reconstruction_terms(paired.student);
    }

    const auto loss = total_loss(lterms, uterms, weights, static_cast<double>(t), t_max);
    optimizer->zero_grad();
    loss.total.backward();
    optimizer->step();
    if (teacher) teacher->update(student);

    StepRecord record;
    record.iteration = t;
    record.lr = lr;
    record.lambda = loss.lambda;
    record.labeled = loss.labeled.item<double>();
    record.unlabeled = loss.unlabeled.defined() ? loss.unlabeled.item<double>() : 0.0;
    record.total = loss.total.item<double>();
    result.steps.push_back(record);
    log_step(config, record);
    if (options.on_step) options.on_step(record);
  }

  auto& ck = result.checkpoint;
  ck.config = config;
  ck.config.run.stage = semi ? Stage::semi : Stage::supervised_only;
  ck.stage = ck.config.run.stage;
  ck.iteration = run.max_iter;
  ck.student = student;
  if (teacher) {
    ck.teacher = teacher->model();
    ck.teacher_step = teacher->step();
  }
  ck.optimizer_state = save_optimizer(*optimizer);
  ck.rng_state = rng_snapshot();
  for (const auto& r : result.steps) ck.loss_trace.push_back(r.total);
  return result;
}

torch::Tensor normalize_depth_batch(const torch::Tensor& depth) {
  auto flat = depth.flatten(1);
  auto lo = std::get<0>(flat.min(1, true)).view({-1, 1, 1, 1});
  auto hi = std::get<0>(flat.max(1, true)).view({-1, 1, 1, 1});
  auto range = hi - lo;
  return torch::where(range > 0, (depth - lo) / range.clamp_min(1e-12), torch::zeros_like(depth));
}

torch::Tensor resized_batch(const ImagePlane& plane, int64_t size) {
  return resize_plane(plane, size, size).data().unsqueeze(0);
}

}  // namespace

TrainResult train_stage1_depth(const Config& config, const std::vector<Sample>& labeled,
                               const TrainOptions& options) {
  if (labeled.empty()) throw EmptyDataset("depth pretraining needs labeled samples");
  const auto model_config = config.effective_model();
  if (!model_config.depth_branch) {
    throw ConfigError("depth pretraining is meaningless with the no_depth_branch ablation");
  }
  prepare_run(config);
  require_planes(labeled, true, false, "labeled");

  Ddcnn model(model_config);
  model->to(options.device);
  model->train();
  auto params = parameters_with_prefix(*model, DdcnnImpl::depth_branch_modules());
  auto optimizer = make_sgd(params, config.run);
  const auto aug = augment_options(config);
  const auto& run = config.run;
  PoolSampler sampler(labeled.size(), mix_seed(run.seed, 1));

  TrainResult result;
  const auto t_max = static_cast<double>(run.max_iter);
  for (int64_t t = 0; t < run.max_iter; ++t) {
    const double lr = poly_lr(static_cast<double>(t), t_max, run.lr0, run.poly_power);
    set_learning_rate(*optimizer, lr);
    const uint64_t iter_seed = mix_seed(run.seed, 1000 + static_cast<uint64_t>(t));
    const auto batch = make_batch(labeled, sampler.next(static_cast<size_t>(run.batch_labeled)),
                                  iter_seed, aug, options.device);
    const auto loss = dsnet::mse_loss(model->predict_depth(batch.rgb), batch.depth);
    optimizer->zero_grad();
    loss.backward();
    optimizer->step();

    StepRecord record;
    record.iteration = t;
    record.lr = lr;
    record.labeled = record.total = loss.item<double>();
    result.steps.push_back(record);
    log_step(config, record);
    if (options.on_step) options.on_step(record);
  }

  auto& ck = result.checkpoint;
  ck.config = config;
  ck.config.run.stage = Stage::depth_pretrain;
  ck.stage = Stage::depth_pretrain;
  ck.iteration = run.max_iter;
  ck.student = model;
  ck.optimizer_state = save_optimizer(*optimizer);
  ck.rng_state = rng_snapshot();
  for (const auto& r : result.steps) ck.loss_trace.push_back(r.total);
  return result;
}

TrainResult train_stage3_semi(const Config& config, const std::vector<Sample>& labeled,
                              const std::vector<Sample>& unlabeled, const Checkpoint* init,
                              const TrainOptions& options) {
  return run_stage3(config, labeled, unlabeled, init, true, options);
}

TrainResult train_supervised(const Config& config, const std::vector<Sample>& labeled,
                             const Checkpoint* init, const TrainOptions& options) {
  return run_stage3(config, labeled, {}, init, false, options);
}

int64_t generate_pseudo_depth(const Checkpoint& checkpoint, const std::filesystem::path& rgb_dir,
                              const std::filesystem::path& out_dir) {
  auto model = checkpoint.student;
  const auto size = model->config().input_size;
  const auto device = model->parameters().front().device();
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;
  std::filesystem::create_directories(out_dir);
  int64_t written = 0;
  for (const auto& path : list_images(rgb_dir)) {
    const auto rgb = read_rgb(path);
    auto depth = model->predict_depth(resized_batch(rgb, size).to(device));
    depth = upsample_to(depth, rgb.height(), rgb.width()).clamp(0.0, 1.0);
    write_depth16(out_dir / (path.stem().string() + ".png"), depth[0].cpu());
    ++written;
  }
  model->train(was_training);
  return written;
}

int64_t generate_pseudo_depth(const std::filesystem::path& checkpoint,
                              const std::filesystem::path& rgb_dir,
                              const std::filesystem::path& out_dir) {
  return generate_pseudo_depth(load_checkpoint(checkpoint), rgb_dir, out_dir);
}

PredictionPair infer(const Checkpoint& checkpoint, const ImagePlane& rgb,
                     const std::optional<ImagePlane>& depth) {
  auto model = checkpoint.student;
  const auto size = model->config().input_size;
  const auto device = model->parameters().front().device();
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;

  const auto x = resized_batch(rgb, size).to(device);
  torch::Tensor d;
  if (depth) {
    d = resized_batch(*depth, size).to(device);
  } else {
    if (!model->has_depth_branch()) {
      throw Error("no depth given and the model has no depth branch to estimate one");
    }
    d = normalize_depth_batch(model->predict_depth(x));
  }
  const auto out = model->forward(x, d);
  model->train(was_training);

  PredictionPair pair;
  pair.saliency = upsample_to(out.prediction.saliency, rgb.height(), rgb.width()).cpu();
  if (out.prediction.depth.defined()) {
    pair.depth = upsample_to(out.prediction.depth, rgb.height(), rgb.width()).cpu();
  }
  return pair;
}

int64_t infer_dir(const Checkpoint& checkpoint, const std::filesystem::path& rgb_dir,
                  const std::optional<std::filesystem::path>& depth_dir,
                  const std::filesystem::path& out_dir) {
  std::map<std::string, std::filesystem::path> depths;
  if (depth_dir) {
    for (const auto& p : list_images(*depth_dir)) depths[p.stem().string()] = p;
  }
  std::filesystem::create_directories(out_dir);
  int64_t written = 0;
  for (const auto& path : list_images(rgb_dir)) {
    const auto stem = path.stem().string();
    std::optional<ImagePlane> depth;
    if (depth_dir) {
      const auto it = depths.find(stem);
      if (it == depths.end()) throw StemMismatch({stem});
      depth = read_depth(it->second);
    }
    const auto pair = infer(checkpoint, read_rgb(path), depth);
    write_gray8(out_dir / (stem + ".png"), pair.saliency[0]);
    ++written;
  }
  return written;
}

double saliency_mae(Ddcnn& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw EmptyDataset("no samples to evaluate");
  const auto size = model->config().input_size;
  const auto device = model->parameters().front().device();
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;
  double sum = 0.0;
  for (const auto& raw : samples) {
    if (!raw.depth || !raw.gt) throw Error("sample '" + raw.stem + "' lacks depth or ground truth");
    const auto s = resize_sample(raw, size);
    const auto out = model->forward(s.rgb.data().unsqueeze(0).to(device),
                                    s.depth->data().unsqueeze(0).to(device));
    sum += (out.prediction.saliency.cpu()[0] - s.gt->data()).abs().mean().item<double>();
  }
  model->train(was_training);
  return sum / static_cast<double>(samples.size());
}

double depth_mse(Ddcnn& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw EmptyDataset("no samples to evaluate");
  const auto size = model->config().input_size;
  const auto device = model->parameters().front().device();
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;
  double sum = 0.0;
  for (const auto& raw : samples) {
    if (!raw.depth) throw Error("sample '" + raw.stem + "' has no depth");
    const auto s = resize_sample(raw, size);
    const auto pred = model->predict_depth(s.rgb.data().unsqueeze(0).to(device));
    sum += (pred.cpu()[0] - s.depth->data()).pow(2).mean().item<double>();
  }
  model->train(was_training);
  return sum / static_cast<double>(samples.size());
}

}  // namespace dsnet
