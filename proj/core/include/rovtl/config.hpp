#pragma once

// Plain-text `key = value` configuration. Lines starting with '#' are
// comments. Lists are comma separated. Every typed getter takes the
// default it falls back to and records the key as used, so callers can
// reject unknown keys and echo the fully resolved configuration.

#include "rovtl/encoders.hpp"
#include "rovtl/finetune.hpp"
#include "rovtl/fusion.hpp"
#include "rovtl/pretrain.hpp"
#include "rovtl/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace rovtl::config {

class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& where = "config");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long long value);
  void set_u64(const std::string& key, std::uint64_t value);
  void set_bool(const std::string& key, bool value);
  void set_ints(const std::string& key, const std::vector<int>& values);
  void set_doubles(const std::string& key, const std::vector<double>& values);
  void erase(const std::string& key) { values_.erase(key); }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  // Keys never read by a getter.
  std::vector<std::string> unused() const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  // Sorted `key = value` lines; parse(format()) reproduces the map.
  std::string format() const;
  void save(const std::filesystem::path& path) const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

// Each pair writes every field under `prefix` and reads them back with the
// current values of `out` as defaults.
void store(KeyValues& kv, const std::string& prefix, const encoders::EncoderConfig& c);
void load(const KeyValues& kv, const std::string& prefix, encoders::EncoderConfig& out);
void store(KeyValues& kv, const std::string& prefix, const fusion::FusionConfig& c);
void load(const KeyValues& kv, const std::string& prefix, fusion::FusionConfig& out);
void store(KeyValues& kv, const std::string& prefix, const finetune::TaskSpec& c);
void load(const KeyValues& kv, const std::string& prefix, finetune::TaskSpec& out);
void store(KeyValues& kv, const std::string& prefix, const nn::AdamOptions& c);
void load(const KeyValues& kv, const std::string& prefix, nn::AdamOptions& out);
void store(KeyValues& kv, const std::string& prefix, const pretrain::PretrainConfig& c);
void load(const KeyValues& kv, const std::string& prefix, pretrain::PretrainConfig& out);
void store(KeyValues& kv, const std::string& prefix, const finetune::FinetuneConfig& c);
void load(const KeyValues& kv, const std::string& prefix, finetune::FinetuneConfig& out);
void store(KeyValues& kv, const std::string& prefix, const synth::SynthConfig& c);
void load(const KeyValues& kv, const std::string& prefix, synth::SynthConfig& out);
void store(KeyValues& kv, const std::string& prefix, const finetune::ModelConfig& c);
void load(const KeyValues& kv, const std::string& prefix, finetune::ModelConfig& out);

}  // namespace rovtl::config
