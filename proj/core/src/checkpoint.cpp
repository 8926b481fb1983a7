#include "rovtl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <stdexcept>

namespace rovtl::checkpoint {

namespace {

constexpr char kMagic[8] = {'R', 'V', 'T', 'L', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

std::uint64_t fnv1a(const char* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buffer_.append(bytes, sizeof(T));
  }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buffer_ += s;
  }
  void raw(const void* data, std::size_t size) { buffer_.append(static_cast<const char*>(data), size); }
  std::string& buffer() { return buffer_; }

 private:
  std::string buffer_;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t begin, std::size_t end) : data_(data), pos_(begin), end_(end) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string string() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* out, std::size_t size) {
    need(size);
    std::memcpy(out, data_.data() + pos_, size);
    pos_ += size;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::uint64_t n) const {
    if (n > end_ - pos_) throw std::runtime_error("checkpoint is truncated or corrupt");
  }

  const std::string& data_;
  std::size_t pos_;
  std::size_t end_;
};

void restore(const Checkpoint& checkpoint, const nn::ParameterList& params, const std::set<std::string>& skip) {
  std::set<std::string> expected;
  for (const auto& p : params.items()) {
    expected.insert(p.name);
    if (skip.count(p.name)) continue;
    const ag::Matrix& source = checkpoint.tensor(p.name);
    if (source.rows() != p.var.rows() || source.cols() != p.var.cols()) {
      throw std::runtime_error("checkpoint tensor '" + p.name + "' has shape " + std::to_string(source.rows()) + "x" +
                               std::to_string(source.cols()) + ", model expects " + std::to_string(p.var.rows()) +
                               "x" + std::to_string(p.var.cols()));
    }
    ag::Var dst = p.var;
    dst.mutable_value() = source;
  }
  for (const auto& [name, tensor] : checkpoint.tensors) {
    if (!expected.count(name)) throw std::runtime_error("checkpoint has unexpected tensor '" + name + "'");
  }
}

void require_kind(const Checkpoint& checkpoint, ModelKind kind) {
  if (checkpoint.kind != kind) {
    throw std::runtime_error(std::string("checkpoint holds a ") +
                             (checkpoint.kind == ModelKind::pretrain ? "pretrained encoder" : "fine-tuned model") +
                             ", expected a " + (kind == ModelKind::pretrain ? "pretrained encoder" : "fine-tuned model"));
  }
}

void require_schema(const Checkpoint& checkpoint, const tabular::AttributeSchema& schema) {
  if (checkpoint.schema->fingerprint() != schema.fingerprint()) {
    throw std::runtime_error("checkpoint schema fingerprint does not match the data schema");
  }
}

std::vector<std::pair<std::string, ag::Matrix>> tensors_of(const nn::ParameterList& params) {
  std::vector<std::pair<std::string, ag::Matrix>> out;
  for (const auto& p : params.items()) out.emplace_back(p.name, p.var.value());
  return out;
}

}  // namespace

const ag::Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw std::runtime_error("checkpoint has no tensor '" + name + "'");
}

void save(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  if (!checkpoint.schema) throw std::invalid_argument("checkpoint without a schema");
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kFormatVersion);
  w.pod<std::uint32_t>(checkpoint.kind == ModelKind::pretrain ? 0 : 1);
  w.string(checkpoint.config.format());
  w.pod<std::uint64_t>(checkpoint.schema->fingerprint());
  w.string(tabular::format_schema(*checkpoint.schema));
  w.pod<std::uint64_t>(checkpoint.standardization.size());
  for (const auto& [name, stats] : checkpoint.standardization) {
    w.string(name);
    w.pod<double>(stats.mean);
    w.pod<double>(stats.stddev);
  }
  w.pod<std::uint64_t>(checkpoint.level_keys.size());
  for (const auto& key : checkpoint.level_keys) w.string(key);
  w.pod<std::uint64_t>(checkpoint.tensors.size());
  for (const auto& [name, m] : checkpoint.tensors) {
    w.string(name);
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    w.raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  const std::uint64_t checksum = fnv1a(w.buffer().data(), w.buffer().size());
  w.pod<std::uint64_t>(checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t header = sizeof(kMagic) + sizeof(std::uint32_t);
  if (data.size() < header + sizeof(std::uint64_t) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint file");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, data.data() + sizeof(kMagic), sizeof(version));
  if (version != kFormatVersion) {
    throw std::runtime_error(path.string() + ": checkpoint format version " + std::to_string(version) +
                             " is not supported (expected " + std::to_string(kFormatVersion) + ")");
  }
  const std::size_t body_end = data.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + body_end, sizeof(stored));
  if (stored != fnv1a(data.data(), body_end)) throw std::runtime_error(path.string() + ": checkpoint checksum mismatch");

  Reader r(data, header, body_end);
  Checkpoint c;
  const auto kind = r.pod<std::uint32_t>();
  if (kind > 1) throw std::runtime_error(path.string() + ": unknown model kind");
  c.kind = kind == 0 ? ModelKind::pretrain : ModelKind::finetune;
  c.config = config::KeyValues::parse(r.string(), path.string() + " (config block)");
  const auto fingerprint = r.pod<std::uint64_t>();
  c.schema = std::make_shared<const tabular::AttributeSchema>(tabular::parse_schema(r.string(), path.string()));
  if (c.schema->fingerprint() != fingerprint) throw std::runtime_error(path.string() + ": schema block is inconsistent");
  const auto stats = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < stats; ++i) {
    std::string name = r.string();
    encoders::ColumnStats s;
    s.mean = r.pod<double>();
    s.stddev = r.pod<double>();
    c.standardization[std::move(name)] = s;
  }
  const auto keys = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < keys; ++i) c.level_keys.push_back(r.string());
  const auto tensors = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < tensors; ++i) {
    std::string name = r.string();
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (rows > (1u << 24) || cols > (1u << 24)) throw std::runtime_error(path.string() + ": implausible tensor shape");
    ag::Matrix m(static_cast<ag::Index>(rows), static_cast<ag::Index>(cols));
    r.raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    c.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (!r.done()) throw std::runtime_error(path.string() + ": trailing bytes in checkpoint");
  return c;
}

Checkpoint capture(const pretrain::PretrainModel& model, const tabular::SchemaPtr& schema,
                   const config::KeyValues& extra) {
  Checkpoint c;
  c.kind = ModelKind::pretrain;
  c.config = extra;
  config::store(c.config, "encoder.", model.config);
  c.schema = schema;
  c.standardization = model.tabular.standardization();
  c.level_keys = model.tabular.level_keys();
  c.tensors = tensors_of(model.parameters());
  return c;
}

Checkpoint capture(const finetune::RovtlModel& model, const tabular::SchemaPtr& schema,
                   const config::KeyValues& extra) {
  Checkpoint c;
  c.kind = ModelKind::finetune;
  c.config = extra;
  config::store(c.config, "model.", model.config);
  c.schema = schema;
  c.standardization = model.tabular.standardization();
  c.level_keys = model.tabular.level_keys();
  c.tensors = tensors_of(model.all_parameters());
  return c;
}

pretrain::PretrainModel load_pretrain(const Checkpoint& checkpoint, const tabular::SchemaPtr& schema, LoadMode mode,
                                      const std::vector<tabular::TabularSample>& train) {
  require_kind(checkpoint, ModelKind::pretrain);
  if (mode == LoadMode::strict) require_schema(checkpoint, *schema);
  encoders::EncoderConfig cfg;
  config::load(checkpoint.config, "encoder.", cfg);
  pretrain::PretrainModel model = pretrain::PretrainModel::create(cfg, *schema, 0);
  std::set<std::string> skip;
  const bool same_levels = model.tabular.level_keys() == checkpoint.level_keys;
  if (!same_levels) {
    if (mode == LoadMode::strict) throw std::runtime_error("checkpoint level vocabulary does not match the schema");
    skip.insert("tabular_encoder.level_table");
  }
  restore(checkpoint, model.parameters(), skip);
  model.tabular.set_standardization(checkpoint.standardization);
  if (mode == LoadMode::transfer) model.tabular.adopt_schema(*schema, train);
  return model;
}

finetune::RovtlModel load_finetune(const Checkpoint& checkpoint, const tabular::SchemaPtr& schema) {
  require_kind(checkpoint, ModelKind::finetune);
  require_schema(checkpoint, *schema);
  finetune::ModelConfig cfg;
  config::load(checkpoint.config, "model.", cfg);
  finetune::RovtlModel model = finetune::RovtlModel::create(cfg, *schema, 0);
  if (model.tabular.level_keys() != checkpoint.level_keys) {
    throw std::runtime_error("checkpoint level vocabulary does not match the schema");
  }
  restore(checkpoint, model.all_parameters(), {});
  model.tabular.set_standardization(checkpoint.standardization);
  return model;
}

}  // namespace rovtl::checkpoint
