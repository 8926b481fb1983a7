#include "rovtl/tabular.hpp"

#include "rovtl/text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rovtl::tabular {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  h ^= 0xff;
  h *= kFnvPrime;
}

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

using text::format_double;
using text::parse_double;
using text::split;

// Uniform k-subset of `pool`, returned sorted.
std::vector<int> choose(std::vector<int> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::size_t uniform_size(std::size_t lo, std::size_t hi, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dist(lo, hi);
  return dist(rng);
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::categorical ? "categorical" : "continuous";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "continuous") return ColumnKind::continuous;
  throw std::invalid_argument("unknown column kind '" + std::string(text) + "'");
}

AttributeSchema::AttributeSchema(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw std::invalid_argument("schema: empty column name");
    if (c.name.find_first_of(",\n") != std::string::npos) {
      throw std::invalid_argument("schema: column name '" + c.name + "' contains a separator");
    }
    if (!names.insert(c.name).second) throw std::invalid_argument("schema: duplicate column '" + c.name + "'");
    if (c.kind == ColumnKind::categorical) {
      if (c.levels.empty()) throw std::invalid_argument("schema: categorical column '" + c.name + "' has no levels");
      std::set<std::string> levels(c.levels.begin(), c.levels.end());
      if (levels.size() != c.levels.size()) {
        throw std::invalid_argument("schema: duplicate level in '" + c.name + "'");
      }
      for (const auto& l : c.levels) {
        if (l.empty() || l.find_first_of(",|\n") != std::string::npos) {
          throw std::invalid_argument("schema: invalid level '" + l + "' in '" + c.name + "'");
        }
      }
    } else if (!c.levels.empty()) {
      throw std::invalid_argument("schema: continuous column '" + c.name + "' has levels");
    }
  }
}

std::optional<int> AttributeSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<int> AttributeSchema::level_of(std::size_t column, std::string_view level) const {
  const auto& levels = columns_.at(column).levels;
  auto it = std::find(levels.begin(), levels.end(), level);
  if (it == levels.end()) return std::nullopt;
  return static_cast<int>(it - levels.begin());
}

std::uint64_t AttributeSchema::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& c : columns_) {
    fnv_mix(h, c.name);
    fnv_mix(h, to_string(c.kind));
    for (const auto& l : c.levels) fnv_mix(h, l);
  }
  return h;
}

bool AttributeSchema::operator==(const AttributeSchema& other) const {
  if (columns_.size() != other.columns_.size()) return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& a = columns_[i];
    const auto& b = other.columns_[i];
    if (a.name != b.name || a.kind != b.kind || a.levels != b.levels) return false;
  }
  return true;
}

TabularSample::TabularSample(SchemaPtr schema, std::vector<Entry> entries)
    : schema_(std::move(schema)), entries_(std::move(entries)) {
  if (!schema_) throw std::invalid_argument("sample: null schema");
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.column < b.column; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    if (e.column < 0 || static_cast<std::size_t>(e.column) >= schema_->size()) {
      throw std::invalid_argument("sample: column " + std::to_string(e.column) + " outside schema");
    }
    if (i > 0 && entries_[i - 1].column == e.column) {
      throw std::invalid_argument("sample: column " + std::to_string(e.column) + " given twice");
    }
    if (!std::isfinite(e.value)) throw std::invalid_argument("sample: non-finite value");
    const Column& col = schema_->column(e.column);
    if (col.kind == ColumnKind::categorical) {
      const double level = e.value;
      if (level != std::floor(level) || level < 0 || level >= static_cast<double>(col.levels.size())) {
        throw std::invalid_argument("sample: level outside vocabulary of '" + col.name + "'");
      }
    }
  }
}

std::vector<int> TabularSample::present() const {
  std::vector<int> cols;
  cols.reserve(entries_.size());
  for (const auto& e : entries_) cols.push_back(e.column);
  return cols;
}

bool TabularSample::contains(int column) const { return value(column).has_value(); }

std::optional<double> TabularSample::value(int column) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), column,
                             [](const Entry& e, int c) { return e.column < c; });
  if (it == entries_.end() || it->column != column) return std::nullopt;
  return it->value;
}

TabularSample TabularSample::restricted_to(std::vector<int> columns) const {
  std::vector<Entry> kept;
  kept.reserve(columns.size());
  for (int c : columns) {
    auto v = value(c);
    if (!v) throw std::invalid_argument("restricted_to: column " + std::to_string(c) + " is not present");
    kept.push_back({c, *v});
  }
  return TabularSample(schema_, std::move(kept));
}

TabularSample TabularSample::with_value(int column, double v) const {
  std::vector<Entry> next = entries_;
  for (auto& e : next) {
    if (e.column == column) {
      e.value = v;
      return TabularSample(schema_, std::move(next));
    }
  }
  throw std::invalid_argument("with_value: column " + std::to_string(column) + " is not present");
}

bool TabularSample::operator==(const TabularSample& other) const {
  return entries_ == other.entries_ &&
         (schema_ == other.schema_ || (schema_ && other.schema_ && *schema_ == *other.schema_));
}

TabularSample sample_subset(const TabularSample& full, Rng& rng) {
  if (full.empty()) throw std::invalid_argument("sample_subset: sample has no present attributes");
  const std::size_t k = uniform_size(1, full.size(), rng);
  return full.restricted_to(choose(full.present(), k, rng));
}

NestedPair sample_nested_pair(const TabularSample& full, Rng& rng) {
  if (full.empty()) throw std::invalid_argument("sample_nested_pair: sample has no present attributes");
  const std::size_t plus_size = uniform_size(1, full.size(), rng);
  std::vector<int> plus_cols = choose(full.present(), plus_size, rng);
  const std::size_t minus_size = uniform_size(0, plus_size - 1, rng);
  std::vector<int> minus_cols = choose(plus_cols, minus_size, rng);
  return {full.restricted_to(std::move(plus_cols)), full.restricted_to(std::move(minus_cols))};
}

void ImportanceRanking::validate(std::size_t column_count) const {
  if (order.size() != column_count || scores.size() != column_count) {
    throw std::invalid_argument("ranking: size does not match schema");
  }
  std::vector<bool> seen(column_count, false);
  for (int c : order) {
    if (c < 0 || static_cast<std::size_t>(c) >= column_count || seen[c]) {
      throw std::invalid_argument("ranking: order is not a permutation");
    }
    seen[c] = true;
  }
  for (std::size_t i = 0; i < column_count; ++i) {
    if (!(scores[i] >= 0.0)) throw std::invalid_argument("ranking: negative score");
  }
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (scores[order[i]] > scores[order[i - 1]]) {
      throw std::invalid_argument("ranking: scores increase along the order");
    }
  }
}

std::vector<int> ImportanceRanking::positions() const {
  std::vector<int> pos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);
  return pos;
}

std::string_view to_string(MissingnessKind kind) {
  switch (kind) {
    case MissingnessKind::random:
      return "random";
    case MissingnessKind::least_important:
      return "li";
    case MissingnessKind::most_important:
      return "mi";
  }
  return "random";
}

MissingnessKind parse_missingness_kind(std::string_view text) {
  if (text == "random") return MissingnessKind::random;
  if (text == "li" || text == "least_important") return MissingnessKind::least_important;
  if (text == "mi" || text == "most_important") return MissingnessKind::most_important;
  throw std::invalid_argument("unknown missingness protocol '" + std::string(text) + "'");
}

void MissingnessProtocol::validate() const {
  if (!(availability >= 0.0 && availability <= 1.0)) {
    throw std::invalid_argument("missingness: availability fraction outside [0, 1]");
  }
  if (kind != MissingnessKind::random && !ranking) {
    throw std::invalid_argument("missingness: " + std::string(to_string(kind)) + " protocol needs a ranking");
  }
}

std::size_t kept_count(double availability, std::size_t present) {
  // The epsilon absorbs representation error of grid fractions like 0.3.
  const double raw = availability * static_cast<double>(present);
  const auto k = static_cast<std::size_t>(std::floor(raw + 0.5 + 1e-9));
  return std::min(k, present);
}

TabularSample apply_missingness(const TabularSample& sample, const MissingnessProtocol& protocol) {
  protocol.validate();
  const std::size_t k = kept_count(protocol.availability, sample.size());
  if (k == sample.size()) return sample;
  if (protocol.kind == MissingnessKind::random) {
    Rng rng(protocol.seed);
    return sample.restricted_to(choose(sample.present(), k, rng));
  }
  const ImportanceRanking& ranking = *protocol.ranking;
  if (sample.schema()) ranking.validate(sample.schema()->size());
  const std::vector<int> pos = ranking.positions();
  std::vector<int> cols = sample.present();
  std::sort(cols.begin(), cols.end(), [&](int a, int b) { return pos[a] < pos[b]; });
  if (protocol.kind == MissingnessKind::most_important) {
    cols.resize(k);
  } else {
    cols.erase(cols.begin(), cols.end() - static_cast<std::ptrdiff_t>(k));
  }
  std::sort(cols.begin(), cols.end());
  return sample.restricted_to(std::move(cols));
}

MarginalPools build_marginals(const std::vector<TabularSample>& samples, std::size_t column_count) {
  MarginalPools pools;
  pools.values.resize(column_count);
  for (const auto& s : samples) {
    for (const auto& e : s.entries()) {
      if (static_cast<std::size_t>(e.column) >= column_count) throw std::invalid_argument("marginals: column outside schema");
      pools.values[e.column].push_back(e.value);
    }
  }
  return pools;
}

TabularSample marginal_corrupt(const TabularSample& sample, const MarginalPools& pools, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("marginal_corrupt: rate outside [0, 1]");
  if (sample.schema() && pools.values.size() < sample.schema()->size()) {
    throw std::invalid_argument("marginal_corrupt: pools do not cover the schema");
  }
  std::bernoulli_distribution replace(rate);
  std::vector<Entry> out = sample.entries();
  for (auto& e : out) {
    if (!replace(rng)) continue;
    const auto& pool = pools.values.at(e.column);
    if (pool.empty()) {
      throw std::invalid_argument("marginal_corrupt: empty pool for column " + std::to_string(e.column));
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    e.value = pool[pick(rng)];
  }
  return TabularSample(sample.schema(), std::move(out));
}

AttributeSchema parse_schema(const std::string& content, const std::string& where) {
  std::istringstream in(content);
  std::vector<Column> columns;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, ',');
    if (fields.size() < 2 || fields.size() > 3) {
      throw std::runtime_error(where + ":" + std::to_string(line_no) + ": expected name,kind[,levels]");
    }
    Column c;
    c.name = fields[0];
    c.kind = parse_column_kind(fields[1]);
    if (fields.size() == 3 && !fields[2].empty()) c.levels = split(fields[2], '|');
    columns.push_back(std::move(c));
  }
  return AttributeSchema(std::move(columns));
}

std::string format_schema(const AttributeSchema& schema) {
  std::string out;
  for (const auto& c : schema.columns()) {
    out += c.name + ',' + std::string(to_string(c.kind));
    if (c.kind == ColumnKind::categorical) {
      out += ',';
      for (std::size_t i = 0; i < c.levels.size(); ++i) out += (i ? "|" : "") + c.levels[i];
    }
    out += '\n';
  }
  return out;
}

AttributeSchema read_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_schema(buffer.str(), path.string());
}

void write_schema(const AttributeSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schema file " + path.string());
  out << format_schema(schema);
}

std::vector<TabularSample> read_csv(const std::filesystem::path& path, const SchemaPtr& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header row");
  auto header = split(trim_cr(line), ',');
  std::vector<int> column_of(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto idx = schema->index_of(header[i]);
    if (!idx) throw std::runtime_error(path.string() + ": header column '" + header[i] + "' not in schema");
    column_of[i] = *idx;
  }
  std::vector<TabularSample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    auto cells = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) throw std::runtime_error(where + ": wrong number of cells");
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].empty()) continue;
      const int col = column_of[i];
      if (schema->column(col).kind == ColumnKind::categorical) {
        auto level = schema->level_of(col, cells[i]);
        if (!level) throw std::runtime_error(where + ": unknown level '" + cells[i] + "'");
        entries.push_back({col, static_cast<double>(*level)});
      } else {
        entries.push_back({col, parse_double(cells[i], where)});
      }
    }
    samples.emplace_back(schema, std::move(entries));
  }
  return samples;
}

void write_csv(const std::vector<TabularSample>& samples, const AttributeSchema& schema,
               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv " + path.string());
  for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? "," : "") << schema.column(c).name;
  out << '\n';
  for (const auto& s : samples) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out << ',';
      auto v = s.value(static_cast<int>(c));
      if (!v) continue;
      const Column& col = schema.column(c);
      if (col.kind == ColumnKind::categorical) {
        out << col.levels.at(static_cast<std::size_t>(*v));
      } else {
        out << format_double(*v);
      }
    }
    out << '\n';
  }
}

std::vector<std::vector<double>> impute_dense(const std::vector<TabularSample>& samples,
                                              const AttributeSchema& schema) {
  const std::size_t p = schema.size();
  std::vector<double> fill(p, 0.0);
  for (std::size_t c = 0; c < p; ++c) {
    if (schema.column(c).kind == ColumnKind::categorical) {
      std::map<double, std::size_t> counts;
      for (const auto& s : samples) {
        if (auto v = s.value(static_cast<int>(c))) ++counts[*v];
      }
      std::size_t best = 0;
      for (const auto& [level, n] : counts) {
        if (n > best) {
          best = n;
          fill[c] = level;
        }
      }
    } else {
      double total = 0.0;
      std::size_t n = 0;
      for (const auto& s : samples) {
        if (auto v = s.value(static_cast<int>(c))) {
          total += *v;
          ++n;
        }
      }
      fill[c] = n ? total / static_cast<double>(n) : 0.0;
    }
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<double> row = fill;
    for (const auto& e : s.entries()) row[e.column] = e.value;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rovtl::tabular
