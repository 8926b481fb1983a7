#include "rovtl/config.hpp"

#include "rovtl/text.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rovtl::config {

KeyValues KeyValues::parse(const std::string& content, const std::string& where) {
  KeyValues kv;
  std::istringstream in(content);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(where + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = text::trim(std::string_view(trimmed).substr(0, eq));
    if (key.empty()) throw std::runtime_error(where + ":" + std::to_string(number) + ": empty key");
    if (kv.has(key)) throw std::runtime_error(where + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    kv.values_[key] = text::trim(std::string_view(trimmed).substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

void KeyValues::set(const std::string& key, const std::string& value) { values_[key] = value; }
void KeyValues::set_double(const std::string& key, double value) { set(key, text::format_double(value)); }
void KeyValues::set_int(const std::string& key, long long value) { set(key, std::to_string(value)); }
void KeyValues::set_u64(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
void KeyValues::set_bool(const std::string& key, bool value) { set(key, value ? "true" : "false"); }

void KeyValues::set_ints(const std::string& key, const std::vector<int>& values) {
  std::vector<std::string> parts;
  for (int v : values) parts.push_back(std::to_string(v));
  set(key, text::join(parts, ','));
}

void KeyValues::set_doubles(const std::string& key, const std::vector<double>& values) {
  std::vector<std::string> parts;
  for (double v : values) parts.push_back(text::format_double(v));
  set(key, text::join(parts, ','));
}

const std::string* KeyValues::find(const std::string& key) const {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  return v ? text::parse_double(*v, key) : fallback;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  const std::string* v = find(key);
  return v ? text::parse_integer(*v, key) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto* end = v->data() + v->size();
  auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::runtime_error(key + ": cannot parse '" + *v + "' as a seed");
  return out;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw std::runtime_error(key + ": cannot parse '" + *v + "' as a boolean");
}

std::vector<int> KeyValues::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<int> out;
  if (v->empty()) return out;
  for (const auto& part : text::split(*v, ',')) out.push_back(static_cast<int>(text::parse_integer(text::trim(part), key)));
  return out;
}

std::vector<double> KeyValues::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  if (v->empty()) return out;
  for (const auto& part : text::split(*v, ',')) out.push_back(text::parse_double(text::trim(part), key));
  return out;
}

std::vector<std::string> KeyValues::get_strings(const std::string& key, const std::vector<std::string>& fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  if (v->empty()) return out;
  for (const auto& part : text::split(*v, ',')) out.push_back(text::trim(part));
  return out;
}

std::vector<std::string> KeyValues::unused() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) out.push_back(key);
  }
  return out;
}

std::string KeyValues::format() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

void KeyValues::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format();
}

void store(KeyValues& kv, const std::string& p, const encoders::EncoderConfig& c) {
  kv.set_int(p + "image.channels", c.image.channels);
  kv.set_int(p + "image.input_size", c.image.input_size);
  kv.set_ints(p + "image.conv_channels", c.image.conv_channels);
  kv.set_int(p + "image.output_width", c.image.output_width);
  kv.set_int(p + "tabular.token_width", c.tabular.token_width);
  kv.set_int(p + "tabular.depth", c.tabular.depth);
  kv.set_int(p + "tabular.heads", c.tabular.heads);
  kv.set_int(p + "tabular.ffn_hidden", c.tabular.ffn_hidden);
  kv.set_int(p + "tabular.name_buckets", c.tabular.name_buckets);
  kv.set_ints(p + "projection_widths", c.projection_widths);
  kv.set_int(p + "projection_hidden", c.projection_hidden);
}

void load(const KeyValues& kv, const std::string& p, encoders::EncoderConfig& out) {
  out.image.channels = static_cast<int>(kv.get_int(p + "image.channels", out.image.channels));
  out.image.input_size = static_cast<int>(kv.get_int(p + "image.input_size", out.image.input_size));
  out.image.conv_channels = kv.get_ints(p + "image.conv_channels", out.image.conv_channels);
  out.image.output_width = static_cast<int>(kv.get_int(p + "image.output_width", out.image.output_width));
  out.tabular.token_width = static_cast<int>(kv.get_int(p + "tabular.token_width", out.tabular.token_width));
  out.tabular.depth = static_cast<int>(kv.get_int(p + "tabular.depth", out.tabular.depth));
  out.tabular.heads = static_cast<int>(kv.get_int(p + "tabular.heads", out.tabular.heads));
  out.tabular.ffn_hidden = static_cast<int>(kv.get_int(p + "tabular.ffn_hidden", out.tabular.ffn_hidden));
  out.tabular.name_buckets = static_cast<int>(kv.get_int(p + "tabular.name_buckets", out.tabular.name_buckets));
  out.projection_widths = kv.get_ints(p + "projection_widths", out.projection_widths);
  out.projection_hidden = static_cast<int>(kv.get_int(p + "projection_hidden", out.projection_hidden));
  out.validate();
}

void store(KeyValues& kv, const std::string& p, const fusion::FusionConfig& c) {
  kv.set(p + "kind", std::string(fusion::to_string(c.kind)));
  kv.set_int(p + "width", c.width);
  kv.set_int(p + "self_heads", c.self_heads);
  kv.set_int(p + "cross_heads", c.cross_heads);
  kv.set_int(p + "gate_hidden", c.gate_hidden);
  kv.set_int(p + "ffn_hidden", c.ffn_hidden);
  kv.set_int(p + "depth", c.depth);
  kv.set(p + "fixed_gate", c.fixed_gate ? text::format_double(*c.fixed_gate) : "none");
}

void load(const KeyValues& kv, const std::string& p, fusion::FusionConfig& out) {
  out.kind = fusion::parse_fusion_kind(kv.get_string(p + "kind", std::string(fusion::to_string(out.kind))));
  out.width = static_cast<int>(kv.get_int(p + "width", out.width));
  out.self_heads = static_cast<int>(kv.get_int(p + "self_heads", out.self_heads));
  out.cross_heads = static_cast<int>(kv.get_int(p + "cross_heads", out.cross_heads));
  out.gate_hidden = static_cast<int>(kv.get_int(p + "gate_hidden", out.gate_hidden));
  out.ffn_hidden = static_cast<int>(kv.get_int(p + "ffn_hidden", out.ffn_hidden));
  out.depth = static_cast<int>(kv.get_int(p + "depth", out.depth));
  const std::string gate = kv.get_string(p + "fixed_gate", out.fixed_gate ? text::format_double(*out.fixed_gate) : "none");
  if (gate == "none") {
    out.fixed_gate.reset();
  } else {
    out.fixed_gate = text::parse_double(gate, p + "fixed_gate");
  }
  out.validate();
}

void store(KeyValues& kv, const std::string& p, const finetune::TaskSpec& c) {
  kv.set(p + "kind", std::string(finetune::to_string(c.kind)));
  kv.set_int(p + "outputs", c.outputs);
  kv.set_double(p + "lambda", c.lambda);
}

void load(const KeyValues& kv, const std::string& p, finetune::TaskSpec& out) {
  const auto kind = finetune::parse_task_kind(kv.get_string(p + "kind", std::string(finetune::to_string(out.kind))));
  int outputs = out.outputs;
  if (kind != out.kind) outputs = kind == finetune::TaskKind::regression ? 1 : 2;
  outputs = static_cast<int>(kv.get_int(p + "outputs", outputs));
  switch (kind) {
    case finetune::TaskKind::multiclass:
      out = finetune::TaskSpec::classification(outputs);
      break;
    case finetune::TaskKind::multilabel:
      out = finetune::TaskSpec::multilabel(outputs);
      break;
    case finetune::TaskKind::regression:
      out = finetune::TaskSpec::regression(outputs);
      break;
  }
  out.lambda = kv.get_double(p + "lambda", out.lambda);
  out.validate();
}

void store(KeyValues& kv, const std::string& p, const nn::AdamOptions& c) {
  kv.set_double(p + "learning_rate", c.learning_rate);
  kv.set_double(p + "beta1", c.beta1);
  kv.set_double(p + "beta2", c.beta2);
  kv.set_double(p + "epsilon", c.epsilon);
  kv.set_double(p + "weight_decay", c.weight_decay);
}

void load(const KeyValues& kv, const std::string& p, nn::AdamOptions& out) {
  out.learning_rate = kv.get_double(p + "learning_rate", out.learning_rate);
  out.beta1 = kv.get_double(p + "beta1", out.beta1);
  out.beta2 = kv.get_double(p + "beta2", out.beta2);
  out.epsilon = kv.get_double(p + "epsilon", out.epsilon);
  out.weight_decay = kv.get_double(p + "weight_decay", out.weight_decay);
}

void store(KeyValues& kv, const std::string& p, const pretrain::PretrainConfig& c) {
  kv.set_double(p + "temperature", c.temperature);
  kv.set_int(p + "batch_size", c.batch_size);
  kv.set_int(p + "epochs", c.epochs);
  kv.set(p + "augmentation", std::string(pretrain::to_string(c.mode)));
  kv.set_double(p + "corruption_rate", c.corruption_rate);
  kv.set_double(p + "image.flip_probability", c.image_augment.flip_probability);
  kv.set_double(p + "image.min_crop_scale", c.image_augment.min_crop_scale);
  kv.set_double(p + "image.max_crop_scale", c.image_augment.max_crop_scale);
  kv.set_double(p + "image.min_aspect", c.image_augment.min_aspect);
  kv.set_double(p + "image.max_aspect", c.image_augment.max_aspect);
  kv.set_double(p + "image.max_rotation_degrees", c.image_augment.max_rotation_degrees);
  store(kv, p + "optimizer.", c.optimizer);
  kv.set_u64(p + "seed", c.seed);
}

void load(const KeyValues& kv, const std::string& p, pretrain::PretrainConfig& out) {
  out.temperature = kv.get_double(p + "temperature", out.temperature);
  out.batch_size = static_cast<int>(kv.get_int(p + "batch_size", out.batch_size));
  out.epochs = static_cast<int>(kv.get_int(p + "epochs", out.epochs));
  out.mode = pretrain::parse_augmentation_mode(kv.get_string(p + "augmentation", std::string(pretrain::to_string(out.mode))));
  out.corruption_rate = kv.get_double(p + "corruption_rate", out.corruption_rate);
  auto& a = out.image_augment;
  a.flip_probability = kv.get_double(p + "image.flip_probability", a.flip_probability);
  a.min_crop_scale = kv.get_double(p + "image.min_crop_scale", a.min_crop_scale);
  a.max_crop_scale = kv.get_double(p + "image.max_crop_scale", a.max_crop_scale);
  a.min_aspect = kv.get_double(p + "image.min_aspect", a.min_aspect);
  a.max_aspect = kv.get_double(p + "image.max_aspect", a.max_aspect);
  a.max_rotation_degrees = kv.get_double(p + "image.max_rotation_degrees", a.max_rotation_degrees);
  load(kv, p + "optimizer.", out.optimizer);
  out.seed = kv.get_u64(p + "seed", out.seed);
  out.validate();
}

void store(KeyValues& kv, const std::string& p, const finetune::FinetuneConfig& c) {
  kv.set_int(p + "epochs", c.epochs);
  kv.set_int(p + "batch_size", c.batch_size);
  store(kv, p + "optimizer.", c.optimizer);
  kv.set_bool(p + "frozen_backbones", c.frozen_backbones);
  kv.set_bool(p + "downstream_missingness", c.downstream_missingness);
  kv.set(p + "training", c.training == finetune::TrainingMode::dgl ? "dgl" : "joint");
  kv.set_u64(p + "seed", c.seed);
}

void load(const KeyValues& kv, const std::string& p, finetune::FinetuneConfig& out) {
  out.epochs = static_cast<int>(kv.get_int(p + "epochs", out.epochs));
  out.batch_size = static_cast<int>(kv.get_int(p + "batch_size", out.batch_size));
  load(kv, p + "optimizer.", out.optimizer);
  out.frozen_backbones = kv.get_bool(p + "frozen_backbones", out.frozen_backbones);
  out.downstream_missingness = kv.get_bool(p + "downstream_missingness", out.downstream_missingness);
  const std::string training =
      kv.get_string(p + "training", out.training == finetune::TrainingMode::dgl ? "dgl" : "joint");
  if (training == "dgl") {
    out.training = finetune::TrainingMode::dgl;
  } else if (training == "joint") {
    out.training = finetune::TrainingMode::joint;
  } else {
    throw std::runtime_error(p + "training: expected dgl or joint, got '" + training + "'");
  }
  out.seed = kv.get_u64(p + "seed", out.seed);
  out.validate();
}

void store(KeyValues& kv, const std::string& p, const synth::SynthConfig& c) {
  kv.set_int(p + "samples", static_cast<long long>(c.samples));
  kv.set_int(p + "image_size", c.image_size);
  kv.set_int(p + "redundant", c.redundant);
  kv.set_int(p + "complementary", c.complementary);
  kv.set_int(p + "noise", c.noise);
  kv.set(p + "task", c.task == synth::SynthTask::classification ? "classification" : "regression");
  kv.set_double(p + "image_weight", c.image_weight);
  std::vector<double> weights;
  for (int j = 0; j < c.complementary; ++j) weights.push_back(c.complementary_weight(j));
  kv.set_doubles(p + "complementary_weights", weights);
  kv.set_double(p + "label_noise", c.label_noise);
  kv.set_double(p + "target_noise", c.target_noise);
  kv.set_double(p + "pixel_noise", c.pixel_noise);
  kv.set_u64(p + "seed", c.seed);
}

void load(const KeyValues& kv, const std::string& p, synth::SynthConfig& out) {
  const long long samples = kv.get_int(p + "samples", static_cast<long long>(out.samples));
  if (samples <= 0) throw std::runtime_error(p + "samples must be positive");
  out.samples = static_cast<std::size_t>(samples);
  out.image_size = static_cast<int>(kv.get_int(p + "image_size", out.image_size));
  out.redundant = static_cast<int>(kv.get_int(p + "redundant", out.redundant));
  out.complementary = static_cast<int>(kv.get_int(p + "complementary", out.complementary));
  out.noise = static_cast<int>(kv.get_int(p + "noise", out.noise));
  const std::string task =
      kv.get_string(p + "task", out.task == synth::SynthTask::classification ? "classification" : "regression");
  if (task == "classification") {
    out.task = synth::SynthTask::classification;
  } else if (task == "regression") {
    out.task = synth::SynthTask::regression;
  } else {
    throw std::runtime_error(p + "task: expected classification or regression, got '" + task + "'");
  }
  out.image_weight = kv.get_double(p + "image_weight", out.image_weight);
  out.complementary_weights = kv.get_doubles(p + "complementary_weights", out.complementary_weights);
  out.label_noise = kv.get_double(p + "label_noise", out.label_noise);
  out.target_noise = kv.get_double(p + "target_noise", out.target_noise);
  out.pixel_noise = kv.get_double(p + "pixel_noise", out.pixel_noise);
  out.seed = kv.get_u64(p + "seed", out.seed);
  out.validate();
}

void store(KeyValues& kv, const std::string& p, const finetune::ModelConfig& c) {
  store(kv, p + "encoder.", c.encoders);
  store(kv, p + "fusion.", c.fusion);
  store(kv, p + "task.", c.task);
}

void load(const KeyValues& kv, const std::string& p, finetune::ModelConfig& out) {
  load(kv, p + "encoder.", out.encoders);
  load(kv, p + "fusion.", out.fusion);
  load(kv, p + "task.", out.task);
}

}  // namespace rovtl::config
