#pragma once

#include "rovtl/autograd.hpp"
#include "rovtl/image.hpp"
#include "rovtl/tabular.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rovtl {

// Paired images, tabular records and targets for one split. Targets are a
// matrix with one row per sample: a class index (multiclass), a 0/1 vector
// (multilabel) or real values (regression).
struct Dataset {
  tabular::SchemaPtr schema;
  std::vector<vision::Image> images;
  std::vector<tabular::TabularSample> samples;
  ag::Matrix targets;

  std::size_t size() const { return samples.size(); }
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

// Split directory layout: tabular.csv, targets.csv, images.bin, images.idx.
// The schema sidecar lives one level up (shared by all splits).
void write_split(const Dataset& data, const std::filesystem::path& dir);
Dataset read_split(const std::filesystem::path& dir, const tabular::SchemaPtr& schema);

}  // namespace rovtl
