#include "dsnet/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dsnet {

namespace pt = boost::property_tree;

Stage parse_stage(std::string_view name) {
  if (name == "depth_pretrain") return Stage::depth_pretrain;
  if (name == "pseudo_depth") return Stage::pseudo_depth;
  if (name == "semi") return Stage::semi;
  if (name == "supervised_only") return Stage::supervised_only;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::depth_pretrain: return "depth_pretrain";
    case Stage::pseudo_depth: return "pseudo_depth";
    case Stage::semi: return "semi";
    case Stage::supervised_only: return "supervised_only";
  }
  return "semi";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view list) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = trim(list.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                              : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const T& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ",";
    out += std::to_string(v);
  }
  return out;
}

std::vector<int64_t> parse_ints(const std::string& key, std::string_view text) {
  std::vector<int64_t> out;
  for (const auto& item : split_list(text)) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": '" + item + "' is not an integer");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key " + key + ": '" + v + "' is not a boolean");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key " + key + ": '" + v + "' is not a number");
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("key " + key + ": '" + v + "' is not an integer");
  }
}

uint64_t parse_seed(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) {
    throw ConfigError("key " + key + ": '" + v + "' is not an unsigned integer");
  }
  return out;
}

// Flat "section.key" -> value view of a config, in a fixed order.
using Entries = std::vector<std::pair<std::string, std::string>>;

Entries entries_of(const Config& c) {
  const auto& m = c.model;
  return {
      {"model.input_size", std::to_string(m.input_size)},
      {"model.norm", std::string(to_string(m.norm))},
      {"model.level_width", std::to_string(m.level_width)},
      {"backbone.name", m.encoder.name},
      {"backbone.channels", join(m.encoder.channels_per_level)},
      {"backbone.pretrained", m.encoder.pretrained ? "true" : "false"},
      {"backbone.weights", m.encoder.weights_path},
      {"dgm.softmax", m.fusion.dgm_softmax ? "true" : "false"},
      {"dgm.hw_cap", std::to_string(m.fusion.dgm_hw_cap)},
      {"dim.attention_channels", std::to_string(m.fusion.attention_channels)},
      {"decoder.merge", std::string(to_string(m.decoder.merge))},
      {"decoder.width", std::to_string(m.decoder.width)},
      {"aspp.rates", join(m.decoder.aspp_rates)},
      {"loss.alpha", format_double(c.loss.alpha)},
      {"loss.gamma", format_double(c.loss.gamma)},
      {"loss.beta1", format_double(c.loss.beta1)},
      {"loss.beta2", format_double(c.loss.beta2)},
      {"loss.lambda_max", format_double(c.loss.lambda_max)},
      {"ema.decay", format_double(c.ema.decay)},
      {"perturb.jitter", format_double(c.perturb.jitter)},
      {"perturb.teacher", std::string(to_string(c.perturb.teacher))},
      {"augment.flip_prob", format_double(c.augment.flip_prob)},
      {"augment.rotation_deg", format_double(c.augment.max_rotation_deg)},
      {"train.stage", std::string(to_string(c.run.stage))},
      {"train.batch_labeled", std::to_string(c.run.batch_labeled)},
      {"train.batch_unlabeled", std::to_string(c.run.batch_unlabeled)},
      {"train.max_iter", std::to_string(c.run.max_iter)},
      {"train.lr0", format_double(c.run.lr0)},
      {"train.poly_power", format_double(c.run.poly_power)},
      {"train.momentum", format_double(c.run.momentum)},
      {"train.weight_decay", format_double(c.run.weight_decay)},
      {"train.seed", std::to_string(c.run.seed)},
      {"train.ablation", c.run.ablation.to_string()},
      {"train.init", c.run.init == InitMode::checkpoint ? "checkpoint" : "scratch"},
      {"train.deterministic", c.run.deterministic ? "true" : "false"},
      {"train.log_every", std::to_string(c.run.log_every)},
  };
}

void apply(Config& c, const std::string& key, const std::string& v) {
  auto& m = c.model;
  if (key == "model.input_size") m.input_size = parse_int(key, v);
  else if (key == "model.norm") m.norm = parse_norm(v);
  else if (key == "model.level_width") m.level_width = parse_int(key, v);
  else if (key == "backbone.name") m.encoder.name = v;
  else if (key == "backbone.channels") {
    const auto ch = parse_ints(key, v);
    if (ch.size() != kPyramidLevels) throw ConfigError("backbone.channels needs exactly 4 entries");
    std::copy(ch.begin(), ch.end(), m.encoder.channels_per_level.begin());
  }
  else if (key == "backbone.pretrained") m.encoder.pretrained = parse_bool(key, v);
  else if (key == "backbone.weights") m.encoder.weights_path = v;
  else if (key == "dgm.softmax") m.fusion.dgm_softmax = parse_bool(key, v);
  else if (key == "dgm.hw_cap") m.fusion.dgm_hw_cap = parse_int(key, v);
  else if (key == "dim.attention_channels") m.fusion.attention_channels = parse_int(key, v);
  else if (key == "decoder.merge") m.decoder.merge = parse_merge(v);
  else if (key == "decoder.width") m.decoder.width = parse_int(key, v);
  else if (key == "aspp.rates") m.decoder.aspp_rates = parse_ints(key, v);
  else if (key == "loss.alpha") c.loss.alpha = parse_double(key, v);
  else if (key == "loss.gamma") c.loss.gamma = parse_double(key, v);
  else if (key == "loss.beta1") c.loss.beta1 = parse_double(key, v);
  else if (key == "loss.beta2") c.loss.beta2 = parse_double(key, v);
  else if (key == "loss.lambda_max") c.loss.lambda_max = parse_double(key, v);
  else if (key == "ema.decay") c.ema.decay = parse_double(key, v);
  else if (key == "perturb.jitter") c.perturb.jitter = parse_double(key, v);
  else if (key == "perturb.teacher") c.perturb.teacher = parse_teacher_input(v);
  else if (key == "augment.flip_prob") c.augment.flip_prob = parse_double(key, v);
  else if (key == "augment.rotation_deg") c.augment.max_rotation_deg = parse_double(key, v);
  else if (key == "train.stage") c.run.stage = parse_stage(v);
  else if (key == "train.batch_labeled") c.run.batch_labeled = parse_int(key, v);
  else if (key == "train.batch_unlabeled") c.run.batch_unlabeled = parse_int(key, v);
  else if (key == "train.max_iter") c.run.max_iter = parse_int(key, v);
  else if (key == "train.lr0") c.run.lr0 = parse_double(key, v);
  else if (key == "train.poly_power") c.run.poly_power = parse_double(key, v);
  else if (key == "train.momentum") c.run.momentum = parse_double(key, v);
  else if (key == "train.weight_decay") c.run.weight_decay = parse_double(key, v);
  else if (key == "train.seed") c.run.seed = parse_seed(key, v);
  else if (key == "train.ablation") c.run.ablation = Ablation::parse(v);
  else if (key == "train.init") {
    if (v == "checkpoint") c.run.init = InitMode::checkpoint;
    else if (v == "scratch") c.run.init = InitMode::scratch;
    else throw ConfigError("train.init must be checkpoint|scratch");
  }
  else if (key == "train.deterministic") c.run.deterministic = parse_bool(key, v);
  else if (key == "train.log_every") c.run.log_every = parse_int(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

Ablation Ablation::parse(std::string_view list) {
  Ablation a;
  for (const auto& flag : split_list(list)) {
    if (flag == "no_dam") a.no_dam = true;
    else if (flag == "no_dgm") a.no_dgm = true;
    else if (flag == "no_dim") a.no_dim = true;
    else if (flag == "no_depth_branch") a.no_depth_branch = true;
    else if (flag == "no_reconstruction") a.no_reconstruction = true;
    else if (flag == "no_attention_consistency") a.no_attention_consistency = true;
    else throw ConfigError("unknown ablation flag '" + flag + "'");
  }
  return a;
}

std::string Ablation::to_string() const {
  std::vector<std::string> flags;
  if (no_dam) flags.emplace_back("no_dam");
  if (no_dgm) flags.emplace_back("no_dgm");
  if (no_dim) flags.emplace_back("no_dim");
  if (no_depth_branch) flags.emplace_back("no_depth_branch");
  if (no_reconstruction) flags.emplace_back("no_reconstruction");
  if (no_attention_consistency) flags.emplace_back("no_attention_consistency");
  std::string out;
  for (const auto& f : flags) out += (out.empty() ? "" : ",") + f;
  return out;
}

ModelConfig Config::effective_model() const {
  ModelConfig m = model;
  const auto& a = run.ablation;
  m.fusion.no_dam = m.fusion.no_dam || a.no_dam;
  m.fusion.no_dgm = m.fusion.no_dgm || a.no_dgm;
  m.fusion.no_dim = m.fusion.no_dim || a.no_dim;
  m.depth_branch = m.depth_branch && !a.no_depth_branch;
  m.reconstruction = m.reconstruction && !a.no_reconstruction;
  return m;
}

void Config::validate() const {
  dsnet::validate(loss);
  if (run.batch_labeled < 1) throw ConfigError("train.batch_labeled must be at least 1");
  if (run.stage == Stage::semi && run.batch_unlabeled < 1) {
    throw ConfigError("train.batch_unlabeled must be at least 1 in stage semi");
  }
  if (run.max_iter < 1) throw ConfigError("train.max_iter must be positive");
  if (model.input_size < kMinInputSize || model.input_size % 32 != 0) {
    throw ConfigError("model.input_size must be a multiple of 32 and at least " +
                      std::to_string(kMinInputSize));
  }
  if (!(ema.decay >= 0.0 && ema.decay <= 1.0)) throw ConfigError("ema.decay must lie in [0,1]");
  if (perturb.jitter < 0.0 || perturb.jitter > 1.0) throw ConfigError("perturb.jitter must lie in [0,1]");
  if (model.decoder.width < 1) throw ConfigError("decoder.width must be positive");
}

Config parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  Config c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must live in a section");
    for (const auto& [key, value] : body) {
      apply(c, section + "." + key, trim(value.get_value<std::string>()));
    }
  }
  c.augment.size = c.model.input_size;
  c.validate();
  return c;
}

void set_config_value(Config& config, const std::string& key, const std::string& value) {
  apply(config, key, trim(value));
  config.augment.size = config.model.input_size;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const Config& config) {
  std::ostringstream os;
  std::string current;
  for (const auto& [key, value] : entries_of(config)) {
    const auto dot = key.find('.');
    const auto section = key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) os << '\n';
      os << '[' << section << "]\n";
      current = section;
    }
    os << key.substr(dot + 1) << " = " << value << '\n';
  }
  return os.str();
}

}  // namespace dsnet
