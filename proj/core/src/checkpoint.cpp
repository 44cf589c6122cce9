#include "dsnet/checkpoint.hpp"

#include <sstream>

namespace dsnet {

namespace {

using torch::serialize::InputArchive;
using torch::serialize::OutputArchive;

template <typename T>
T read_value(InputArchive& archive, const std::string& key) {
  c10::IValue value;
  archive.read(key, value);
  return value.to<T>();
}

Ddcnn load_model(InputArchive& archive, const std::string& key, const ModelConfig& config) {
  InputArchive sub;
  archive.read(key, sub);
  Ddcnn model(config);
  model->load(sub);
  return model;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (!checkpoint.student) throw Error("checkpoint has no student model");
  OutputArchive archive;
  archive.write("format_version", c10::IValue(kCheckpointVersion));
  archive.write("config", c10::IValue(to_ini(checkpoint.config)));
  archive.write("stage", c10::IValue(std::string(to_string(checkpoint.stage))));
  archive.write("iteration", c10::IValue(checkpoint.iteration));
  archive.write("teacher_step", c10::IValue(checkpoint.teacher_step));
  archive.write("optimizer", c10::IValue(checkpoint.optimizer_state));
  archive.write("loss_trace", c10::IValue(checkpoint.loss_trace));
  archive.write("has_teacher", c10::IValue(static_cast<bool>(checkpoint.teacher)));
  if (checkpoint.rng_state.defined()) archive.write("rng_state", checkpoint.rng_state, true);

  OutputArchive student;
  checkpoint.student->save(student);
  archive.write("student", student);
  if (checkpoint.teacher) {
    OutputArchive teacher;
    checkpoint.teacher->save(teacher);
    archive.write("teacher", teacher);
  }
  try {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    archive.save_to(path.string());
  } catch (const std::exception& e) {
    throw IoError("cannot write checkpoint " + path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw MissingCheckpoint("checkpoint not found: " + path.string());
  }
  InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const std::exception& e) {
    throw MissingCheckpoint("not a checkpoint: " + path.string() + " (" + e.what() + ")");
  }
  const auto version = read_value<int64_t>(archive, "format_version");
  if (version != kCheckpointVersion) {
    throw MissingCheckpoint("unsupported checkpoint version " + std::to_string(version) + " in " +
                            path.string());
  }
  Checkpoint ck;
  ck.config = parse_config(read_value<std::string>(archive, "config"));
  ck.stage = parse_stage(read_value<std::string>(archive, "stage"));
  ck.iteration = read_value<int64_t>(archive, "iteration");
  ck.teacher_step = read_value<int64_t>(archive, "teacher_step");
  ck.optimizer_state = read_value<std::string>(archive, "optimizer");
  ck.loss_trace = read_value<std::vector<double>>(archive, "loss_trace");
  torch::Tensor rng;
  if (archive.try_read("rng_state", rng, true)) ck.rng_state = rng;

  const auto model_config = ck.config.effective_model();
  ck.student = load_model(archive, "student", model_config);
  if (read_value<bool>(archive, "has_teacher")) {
    ck.teacher = load_model(archive, "teacher", model_config);
    for (auto& p : ck.teacher->parameters()) p.set_requires_grad(false);
  }
  return ck;
}

std::string save_optimizer(const torch::optim::Optimizer& optimizer) {
  OutputArchive archive;
  optimizer.save(archive);
  std::ostringstream os;
  archive.save_to(os);
  return os.str();
}

void load_optimizer(torch::optim::Optimizer& optimizer, const std::string& bytes) {
  if (bytes.empty()) return;
  std::istringstream is(bytes);
  InputArchive archive;
  archive.load_from(is);
  optimizer.load(archive);
}

}  // namespace dsnet
