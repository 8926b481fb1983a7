#pragma once

// Tabular data model: a fixed attribute schema, samples holding an
// arbitrary subset of present attributes, the subset samplers used for
// augmentation, and the missingness protocols used for evaluation.

#include "rovtl/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rovtl::tabular {

enum class ColumnKind { categorical, continuous };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> levels;  // categorical only
};

class AttributeSchema {
 public:
  explicit AttributeSchema(std::vector<Column> columns);

  std::size_t size() const { return columns_.size(); }
  const Column& column(std::size_t index) const { return columns_.at(index); }
  const std::vector<Column>& columns() const { return columns_; }
  std::optional<int> index_of(std::string_view name) const;
  std::optional<int> level_of(std::size_t column, std::string_view level) const;

  // FNV-1a over names, kinds and vocabularies; identifies the schema in
  // checkpoints.
  std::uint64_t fingerprint() const;

  bool operator==(const AttributeSchema& other) const;

 private:
  std::vector<Column> columns_;
};

using SchemaPtr = std::shared_ptr<const AttributeSchema>;

struct Entry {
  int column = 0;
  // Continuous: the value. Categorical: the level index, stored exactly.
  double value = 0.0;

  bool operator==(const Entry&) const = default;
};

// A record restricted to the attributes that are present. Entries are kept
// sorted by column index.
class TabularSample {
 public:
  TabularSample() = default;
  TabularSample(SchemaPtr schema, std::vector<Entry> entries);

  const SchemaPtr& schema() const { return schema_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<int> present() const;
  bool contains(int column) const;
  std::optional<double> value(int column) const;

  // Keeps only `columns` (each must be present). Values are unchanged.
  TabularSample restricted_to(std::vector<int> columns) const;
  TabularSample with_value(int column, double value) const;

  bool operator==(const TabularSample& other) const;

 private:
  SchemaPtr schema_;
  std::vector<Entry> entries_;
};

// Uniform size in [1, N], then a uniform subset of that size.
TabularSample sample_subset(const TabularSample& full, Rng& rng);

struct NestedPair {
  TabularSample plus;
  TabularSample minus;
};

// minus is a strict subset of plus, which is a subset of full.
// |plus| ~ U[1, N], |minus| ~ U[0, |plus| - 1].
NestedPair sample_nested_pair(const TabularSample& full, Rng& rng);

struct ImportanceRanking {
  std::vector<int> order;      // column indices, most important first
  std::vector<double> scores;  // indexed by column

  void validate(std::size_t column_count) const;
  // Position of each column in `order`.
  std::vector<int> positions() const;
};

enum class MissingnessKind { random, least_important, most_important };

std::string_view to_string(MissingnessKind kind);
MissingnessKind parse_missingness_kind(std::string_view text);

struct MissingnessProtocol {
  MissingnessKind kind = MissingnessKind::random;
  double availability = 1.0;
  std::optional<ImportanceRanking> ranking;
  std::uint64_t seed = 0;

  void validate() const;
};

// round-half-up(f * n)
std::size_t kept_count(double availability, std::size_t present);

TabularSample apply_missingness(const TabularSample& sample, const MissingnessProtocol& protocol);

// Observed values per column, used by the corruption augmentation.
struct MarginalPools {
  std::vector<std::vector<double>> values;
};

MarginalPools build_marginals(const std::vector<TabularSample>& samples, std::size_t column_count);

// Each present entry is independently replaced, with probability `rate`,
// by a uniform draw from its column pool.
TabularSample marginal_corrupt(const TabularSample& sample, const MarginalPools& pools, double rate, Rng& rng);

// Schema sidecar: one line per column, `name,kind[,level|level|...]`.
AttributeSchema read_schema(const std::filesystem::path& path);
AttributeSchema parse_schema(const std::string& content, const std::string& where = "schema");
std::string format_schema(const AttributeSchema& schema);
void write_schema(const AttributeSchema& schema, const std::filesystem::path& path);

// CSV with a header row of column names; empty cell = missing.
std::vector<TabularSample> read_csv(const std::filesystem::path& path, const SchemaPtr& schema);
void write_csv(const std::vector<TabularSample>& samples, const AttributeSchema& schema,
               const std::filesystem::path& path);

// Mode (categorical) or mean (continuous) fill for every absent column.
std::vector<std::vector<double>> impute_dense(const std::vector<TabularSample>& samples,
                                              const AttributeSchema& schema);

}  // namespace rovtl::tabular
