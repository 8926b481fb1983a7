#pragma once

// Synthetic paired image/tabular data with a planted signal split across
// the two modalities.
//
// Each sample draws a latent code u ~ U[-1, 1] that sets the peak intensity
// of a blob at a random position in the image. Redundant attributes are
// deterministic functions of u, complementary attributes are independent
// standard normals that enter the label, and noise attributes never do.
//
//   classification: clean label = [image_weight * u + w . c > 0]
//   regression:     target = image_weight * u + w . c + N(0, target_noise^2)

#include "rovtl/dataset.hpp"
#include "rovtl/tabular.hpp"

#include <cstdint>
#include <vector>

namespace rovtl::synth {

enum class SynthTask { classification, regression };

struct SynthConfig {
  std::size_t samples = 512;
  int image_size = 16;
  int redundant = 2;
  int complementary = 2;
  int noise = 2;
  SynthTask task = SynthTask::classification;
  double image_weight = 1.0;
  // One weight per complementary attribute; when empty every weight is 1.
  std::vector<double> complementary_weights;
  // Probability that the observed class differs from the clean one.
  double label_noise = 0.0;
  double target_noise = 0.1;
  double pixel_noise = 0.05;
  std::uint64_t seed = 0;

  int attribute_count() const { return redundant + complementary + noise; }
  double complementary_weight(int j) const;
  void validate() const;
};

enum class AttributeRole { redundant, complementary, noise };

struct SynthDataset {
  Dataset data;
  std::vector<AttributeRole> roles;     // per schema column
  std::vector<double> latent;           // u per sample
  tabular::ImportanceRanking truth;     // |label weight| per column
};

tabular::SchemaPtr make_schema(const SynthConfig& config);

// Samples are generated from independent per-index streams. Classification
// labels alternate 0/1 with the index, so the classes are balanced exactly.
SynthDataset generate(const SynthConfig& config);

// Accuracy of the Bayes rule that sees only u (the image), and of the one
// that also sees the complementary attributes. Classification only.
double bayes_accuracy_image_only(const SynthConfig& config);
double bayes_accuracy_full(const SynthConfig& config);

}  // namespace rovtl::synth
