#include "rovtl/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rovtl {

void Dataset::validate() const {
  if (!schema) throw std::invalid_argument("dataset: missing schema");
  if (images.size() != samples.size() || static_cast<std::size_t>(targets.rows()) != samples.size()) {
    throw std::invalid_argument("dataset: images, samples and targets are not aligned");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.schema = schema;
  out.targets.resize(static_cast<ag::Index>(indices.size()), targets.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.images.push_back(images.at(indices[i]));
    out.samples.push_back(samples.at(indices[i]));
    out.targets.row(static_cast<ag::Index>(i)) = targets.row(static_cast<ag::Index>(indices[i]));
  }
  return out;
}

void write_split(const Dataset& data, const std::filesystem::path& dir) {
  data.validate();
  std::filesystem::create_directories(dir);
  tabular::write_csv(data.samples, *data.schema, dir / "tabular.csv");
  vision::write_image_archive(data.images, dir / "images.bin", dir / "images.idx");
  std::ofstream out(dir / "targets.csv");
  if (!out) throw std::runtime_error("cannot write " + (dir / "targets.csv").string());
  for (ag::Index c = 0; c < data.targets.cols(); ++c) out << (c ? "," : "") << "target" << c;
  out << '\n';
  char buf[64];
  for (ag::Index r = 0; r < data.targets.rows(); ++r) {
    for (ag::Index c = 0; c < data.targets.cols(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), data.targets(r, c));
      out << (c ? "," : "") << std::string(buf, ptr);
    }
    out << '\n';
  }
}

Dataset read_split(const std::filesystem::path& dir, const tabular::SchemaPtr& schema) {
  Dataset data;
  data.schema = schema;
  data.samples = tabular::read_csv(dir / "tabular.csv", schema);
  data.images = vision::read_image_archive(dir / "images.bin", dir / "images.idx");
  std::ifstream in(dir / "targets.csv");
  if (!in) throw std::runtime_error("cannot open " + (dir / "targets.csv").string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(row, cell, ',')) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc()) throw std::runtime_error("targets.csv: cannot parse '" + cell + "'");
      values.push_back(v);
    }
    rows.push_back(std::move(values));
  }
  const ag::Index cols = rows.empty() ? 1 : static_cast<ag::Index>(rows.front().size());
  data.targets.resize(static_cast<ag::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<ag::Index>(rows[r].size()) != cols) throw std::runtime_error("targets.csv: ragged rows");
    for (ag::Index c = 0; c < cols; ++c) data.targets(static_cast<ag::Index>(r), c) = rows[r][c];
  }
  data.validate();
  return data;
}

}  // namespace rovtl
