#pragma once

// Binary model snapshots.
//
// Layout (little-endian): magic "RVTLCKPT", u32 format version, then
// length-prefixed sections: config text, schema fingerprint, schema text,
// standardization statistics, categorical level keys, named tensors
// (rows, cols, raw doubles), and finally an FNV-1a checksum of everything
// before it. Doubles are written bit for bit, so save -> load -> save
// reproduces the file exactly.

#include "rovtl/config.hpp"
#include "rovtl/finetune.hpp"
#include "rovtl/pretrain.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace rovtl::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class ModelKind { pretrain, finetune };

struct Checkpoint {
  ModelKind kind = ModelKind::pretrain;
  config::KeyValues config;  // model configuration plus caller extras
  tabular::SchemaPtr schema;
  std::map<std::string, encoders::ColumnStats> standardization;
  std::vector<std::string> level_keys;
  std::vector<std::pair<std::string, ag::Matrix>> tensors;

  const ag::Matrix& tensor(const std::string& name) const;
};

void save(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read(const std::filesystem::path& path);

// `extra` entries are stored alongside the model configuration.
Checkpoint capture(const pretrain::PretrainModel& model, const tabular::SchemaPtr& schema,
                   const config::KeyValues& extra = {});
Checkpoint capture(const finetune::RovtlModel& model, const tabular::SchemaPtr& schema,
                   const config::KeyValues& extra = {});

enum class LoadMode {
  // The target schema must have the checkpoint's fingerprint.
  strict,
  // Rebuild the encoders on another schema. Hash-bucket name embeddings and
  // all other shared weights carry over; the categorical level table is kept
  // only when the level vocabularies agree, and statistics for continuous
  // columns the checkpoint has never seen are fitted from `train`.
  transfer,
};

pretrain::PretrainModel load_pretrain(const Checkpoint& checkpoint, const tabular::SchemaPtr& schema,
                                      LoadMode mode = LoadMode::strict,
                                      const std::vector<tabular::TabularSample>& train = {});
finetune::RovtlModel load_finetune(const Checkpoint& checkpoint, const tabular::SchemaPtr& schema);

}  // namespace rovtl::checkpoint
