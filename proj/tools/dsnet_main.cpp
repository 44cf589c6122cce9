// dsnet: command line front end for training, pseudo-depth generation,
// inference and evaluation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dsnet/checkpoint.hpp"
#include "dsnet/config.hpp"
#include "dsnet/data.hpp"
#include "dsnet/errors.hpp"
#include "dsnet/metrics.hpp"
#include "dsnet/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string device = "cpu";
  std::string out;
  std::vector<std::string> overrides;
};

dsnet::Config resolve_config(const Globals& g) {
  dsnet::Config config = g.config_path.empty() ? dsnet::Config{} : dsnet::load_config(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw dsnet::ConfigError("--set expects key=value, got '" + kv + "'");
    dsnet::set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) config.run.seed = *g.seed;
  if (config.run.log_every == 0) config.run.log_every = 100;
  config.validate();
  return config;
}

fs::path require_out(const Globals& g, const char* what) {
  if (g.out.empty()) throw dsnet::ConfigError(std::string("--out is required for ") + what);
  return g.out;
}

dsnet::TrainOptions train_options(const Globals& g) {
  dsnet::TrainOptions options;
  options.device = torch::Device(g.device);
  return options;
}

void save_trace(const fs::path& path, const std::vector<dsnet::StepRecord>& steps) {
  std::ofstream os(path);
  os << "iteration,lr,lambda,labeled,unlabeled,total\n";
  os.precision(10);
  for (const auto& r : steps) {
    os << r.iteration << ',' << r.lr << ',' << r.lambda << ',' << r.labeled << ',' << r.unlabeled
       << ',' << r.total << '\n';
  }
}

void finish_training(const dsnet::TrainResult& result, const fs::path& out, const std::string& name) {
  fs::create_directories(out);
  auto checkpoint = result.checkpoint;
  checkpoint.student->to(torch::kCPU);
  if (checkpoint.teacher) checkpoint.teacher->to(torch::kCPU);
  dsnet::save_checkpoint(out / (name + ".ckpt"), checkpoint);
  save_trace(out / (name + "_loss.csv"), result.steps);
  std::ofstream(out / (name + ".ini")) << dsnet::to_ini(checkpoint.config);
  std::cout << "wrote " << (out / (name + ".ckpt")).string() << "\n";
}

dsnet::Checkpoint load_on(const std::string& path, const std::string& device) {
  auto ck = dsnet::load_checkpoint(path);
  ck.student->to(torch::Device(device));
  return ck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DS-Net semi-supervised RGB-D salient object detection"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override train.seed");
  app.add_option("--device", g.device, "Torch device, e.g. cpu or cuda:0");
  app.add_option("--out", g.out, "Output directory (for eval: the CSV report path)");
  app.add_option("--set", g.overrides, "Override a config entry, section.key=value")->take_all();

  std::string labeled_dir, unlabeled_dir, checkpoint_path, init_path, rgb_dir, depth_dir, pred_dir,
      gt_dir;
  int64_t n_labeled = 4, n_unlabeled = 8, n_test = 0, toy_size = 64;

  auto* toy = app.add_subcommand("make-toy-data", "Generate the synthetic toy dataset");
  toy->add_option("--labeled", n_labeled, "Labeled RGB-D samples");
  toy->add_option("--unlabeled", n_unlabeled, "Unlabeled RGB samples");
  toy->add_option("--test", n_test, "Held-out labeled samples");
  toy->add_option("--size", toy_size, "Image side in pixels");

  auto* depth = app.add_subcommand("train-depth", "Stage 1: train the depth estimation branch");
  depth->add_option("--labeled", labeled_dir, "Labeled dataset root (rgb/ depth/ gt/)")->required();

  auto* pseudo = app.add_subcommand("gen-pseudo-depth", "Stage 2: estimate depth for unlabeled RGB");
  pseudo->add_option("--checkpoint", checkpoint_path, "Stage-1 checkpoint")->required();
  pseudo->add_option("--rgb", rgb_dir, "Directory of RGB images")->required();

  auto* semi = app.add_subcommand("train-semi", "Stage 3: mean-teacher training");
  semi->add_option("--labeled", labeled_dir, "Labeled dataset root")->required();
  semi->add_option("--unlabeled", unlabeled_dir, "Unlabeled root with rgb/ and pseudo depth/")
      ->required();
  semi->add_option("--init", init_path, "Stage-1 checkpoint (omit with train.init = scratch)");

  auto* sup = app.add_subcommand("train-supervised", "Stage-3 loop on labeled data only");
  sup->add_option("--labeled", labeled_dir, "Labeled dataset root")->required();
  sup->add_option("--init", init_path, "Optional stage-1 checkpoint");

  auto* inf = app.add_subcommand("infer", "Predict saliency maps with the student model");
  inf->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
  inf->add_option("--rgb", rgb_dir, "Directory of RGB images")->required();
  inf->add_option("--depth", depth_dir, "Directory of depth maps; estimated when omitted");

  auto* ev = app.add_subcommand("eval", "Score saliency maps against ground truth");
  ev->add_option("--pred", pred_dir, "Prediction directory")->required();
  ev->add_option("--gt", gt_dir, "Ground-truth directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (toy->parsed()) {
      const auto seed = g.seed.value_or(0);
      const auto counts = dsnet::make_toy_data(require_out(g, "make-toy-data"), n_labeled,
                                               n_unlabeled, seed, toy_size, n_test);
      std::cout << "labeled " << counts.labeled << ", unlabeled " << counts.unlabeled << ", test "
                << counts.test << "\n";
    } else if (depth->parsed()) {
      const auto config = resolve_config(g);
      const auto out = require_out(g, "train-depth");
      const auto data =
          dsnet::load_dataset(dsnet::scan_dataset(labeled_dir, dsnet::DatasetKind::labeled_rgbd));
      finish_training(dsnet::train_stage1_depth(config, data, train_options(g)), out, "depth");
    } else if (pseudo->parsed()) {
      const auto ck = load_on(checkpoint_path, g.device);
      const auto n = dsnet::generate_pseudo_depth(ck, rgb_dir, require_out(g, "gen-pseudo-depth"));
      std::cout << "wrote " << n << " pseudo-depth maps\n";
    } else if (semi->parsed() || sup->parsed()) {
      const auto config = resolve_config(g);
      const auto out = require_out(g, semi->parsed() ? "train-semi" : "train-supervised");
      const auto labeled =
          dsnet::load_dataset(dsnet::scan_dataset(labeled_dir, dsnet::DatasetKind::labeled_rgbd));
      std::optional<dsnet::Checkpoint> init;
      if (!init_path.empty()) init = dsnet::load_checkpoint(init_path);
      const auto* init_ptr = init ? &*init : nullptr;
      if (semi->parsed()) {
        const auto unlabeled = dsnet::load_dataset(dsnet::scan_dataset(
            unlabeled_dir, dsnet::DatasetKind::unlabeled_rgb_with_pseudo_depth));
        finish_training(dsnet::train_stage3_semi(config, labeled, unlabeled, init_ptr, train_options(g)),
                        out, "semi");
      } else {
        finish_training(dsnet::train_supervised(config, labeled, init_ptr, train_options(g)), out,
                        "supervised");
      }
    } else if (inf->parsed()) {
      const auto ck = load_on(checkpoint_path, g.device);
      std::optional<fs::path> depths;
      if (!depth_dir.empty()) depths = depth_dir;
      const auto n = dsnet::infer_dir(ck, rgb_dir, depths, require_out(g, "infer"));
      std::cout << "wrote " << n << " saliency maps\n";
    } else if (ev->parsed()) {
      const auto report = dsnet::evaluate_dir(pred_dir, gt_dir);
      dsnet::write_table(std::cout, report);
      if (!g.out.empty()) {
        std::ofstream os(g.out);
        if (!os) throw dsnet::IoError("cannot write " + g.out);
        dsnet::write_csv(os, report);
      }
    }
  } catch (const dsnet::Error& e) {
    std::cerr << "dsnet: " << e.what() << "\n";
    return 1;
  } catch (const c10::Error& e) {
    std::cerr << "dsnet: torch error: " << e.what_without_backtrace() << "\n";
    return 2;
  }
  return 0;
}
