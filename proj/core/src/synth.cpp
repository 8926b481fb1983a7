#include "rovtl/synth.hpp"

#include "rovtl/importance.hpp"
#include "rovtl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace rovtl::synth {

namespace {

constexpr int kCodeLevels = 4;
const char* const kNoiseLevels[] = {"a", "b", "c"};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double complementary_norm(const SynthConfig& config) {
  double s = 0.0;
  for (int j = 0; j < config.complementary; ++j) s += config.complementary_weight(j) * config.complementary_weight(j);
  return std::sqrt(s);
}

int code_level(double u) {
  const int level = static_cast<int>(std::floor((u + 1.0) / 2.0 * kCodeLevels));
  return std::clamp(level, 0, kCodeLevels - 1);
}

vision::Image render(const SynthConfig& config, double u, Rng& rng) {
  const int n = config.image_size;
  const double sigma = n / 8.0;
  const double margin = n / 4.0;
  std::uniform_real_distribution<double> position(margin, n - 1 - margin);
  const double cx = position(rng);
  const double cy = position(rng);
  const double amplitude = 1.0 + 0.75 * u;
  std::normal_distribution<double> noise(0.0, config.pixel_noise);
  vision::Image image(1, n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      const double v = amplitude * std::exp(-d2 / (2.0 * sigma * sigma)) + noise(rng);
      // Stored at float precision so archives round-trip exactly.
      image.at(0, y, x) = static_cast<double>(static_cast<float>(v));
    }
  }
  return image;
}

}  // namespace

double SynthConfig::complementary_weight(int j) const {
  if (complementary_weights.empty()) return 1.0;
  return complementary_weights.at(static_cast<std::size_t>(j));
}

void SynthConfig::validate() const {
  if (samples == 0) throw std::invalid_argument("synth: sample count must be positive");
  if (image_size < 8) throw std::invalid_argument("synth: image size must be at least 8");
  if (redundant < 1 || complementary < 1 || noise < 1) {
    throw std::invalid_argument("synth: need at least one redundant, complementary and noise attribute");
  }
  if (!complementary_weights.empty() && complementary_weights.size() != static_cast<std::size_t>(complementary)) {
    throw std::invalid_argument("synth: complementary weight count does not match the attribute count");
  }
  if (!(label_noise >= 0.0 && label_noise < 0.5)) throw std::invalid_argument("synth: label noise outside [0, 0.5)");
  if (!(target_noise >= 0.0) || !(pixel_noise >= 0.0)) throw std::invalid_argument("synth: negative noise scale");
  if (task == SynthTask::classification && image_weight == 0.0 && complementary_norm(*this) == 0.0) {
    throw std::invalid_argument("synth: label does not depend on anything");
  }
}

tabular::SchemaPtr make_schema(const SynthConfig& config) {
  std::vector<tabular::Column> columns;
  for (int j = 0; j < config.redundant; ++j) {
    if (j % 2 == 0) {
      columns.push_back({"redundant_" + std::to_string(j), tabular::ColumnKind::continuous, {}});
    } else {
      std::vector<std::string> levels;
      for (int l = 0; l < kCodeLevels; ++l) levels.push_back("q" + std::to_string(l));
      columns.push_back({"redundant_" + std::to_string(j), tabular::ColumnKind::categorical, levels});
    }
  }
  for (int j = 0; j < config.complementary; ++j) {
    columns.push_back({"complementary_" + std::to_string(j), tabular::ColumnKind::continuous, {}});
  }
  for (int j = 0; j < config.noise; ++j) {
    if (j % 2 == 0) {
      columns.push_back({"noise_" + std::to_string(j), tabular::ColumnKind::continuous, {}});
    } else {
      columns.push_back({"noise_" + std::to_string(j), tabular::ColumnKind::categorical,
                         {std::begin(kNoiseLevels), std::end(kNoiseLevels)}});
    }
  }
  return std::make_shared<const tabular::AttributeSchema>(std::move(columns));
}

SynthDataset generate(const SynthConfig& config) {
  config.validate();
  SynthDataset out;
  out.data.schema = make_schema(config);
  const std::size_t n = config.samples;
  const bool classify = config.task == SynthTask::classification;
  out.data.targets = ag::Matrix(static_cast<ag::Index>(n), 1);
  out.data.images.reserve(n);
  out.data.samples.reserve(n);
  out.latent.reserve(n);

  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(config.seed, streams::kSynth, i);
    double u = 0.0;
    std::vector<double> c(static_cast<std::size_t>(config.complementary));
    double target = 0.0;
    if (classify) {
      const int observed = static_cast<int>(i % 2);
      const int clean = unit(rng) < config.label_noise ? 1 - observed : observed;
      for (;;) {
        u = uniform(rng);
        double score = config.image_weight * u;
        for (int j = 0; j < config.complementary; ++j) {
          c[static_cast<std::size_t>(j)] = normal(rng);
          score += config.complementary_weight(j) * c[static_cast<std::size_t>(j)];
        }
        if ((score > 0.0 ? 1 : 0) == clean) break;
      }
      target = observed;
    } else {
      u = uniform(rng);
      target = config.image_weight * u;
      for (int j = 0; j < config.complementary; ++j) {
        c[static_cast<std::size_t>(j)] = normal(rng);
        target += config.complementary_weight(j) * c[static_cast<std::size_t>(j)];
      }
      target += config.target_noise * normal(rng);
    }

    std::vector<tabular::Entry> entries;
    int column = 0;
    for (int j = 0; j < config.redundant; ++j, ++column) {
      const double value = j % 2 == 0 ? (1.0 + j / 2) * u : static_cast<double>(code_level(u));
      entries.push_back({column, value});
    }
    for (int j = 0; j < config.complementary; ++j, ++column) entries.push_back({column, c[static_cast<std::size_t>(j)]});
    for (int j = 0; j < config.noise; ++j, ++column) {
      const double value = j % 2 == 0 ? normal(rng) : static_cast<double>(static_cast<int>(unit(rng) * 3.0) % 3);
      entries.push_back({column, value});
    }

    out.data.images.push_back(render(config, u, rng));
    out.data.samples.emplace_back(out.data.schema, std::move(entries));
    out.data.targets(static_cast<ag::Index>(i), 0) = target;
    out.latent.push_back(u);
  }

  std::vector<double> scores;
  for (int j = 0; j < config.redundant; ++j) {
    out.roles.push_back(AttributeRole::redundant);
    scores.push_back(std::abs(config.image_weight));
  }
  for (int j = 0; j < config.complementary; ++j) {
    out.roles.push_back(AttributeRole::complementary);
    scores.push_back(std::abs(config.complementary_weight(j)));
  }
  for (int j = 0; j < config.noise; ++j) {
    out.roles.push_back(AttributeRole::noise);
    scores.push_back(0.0);
  }
  out.truth = tabular::ranking_from_scores(scores);
  return out;
}

double bayes_accuracy_image_only(const SynthConfig& config) {
  config.validate();
  if (config.task != SynthTask::classification) throw std::invalid_argument("bayes accuracy needs a classification task");
  const double spread = complementary_norm(config);
  double clean = 1.0;
  if (spread > 0.0) {
    // u is symmetric, so integrate P(correct | u) over [0, 1] with Simpson's rule.
    const int intervals = 2000;
    const double h = 1.0 / intervals;
    double acc = 0.0;
    for (int k = 0; k <= intervals; ++k) {
      const double weight = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      acc += weight * normal_cdf(std::abs(config.image_weight) * k * h / spread);
    }
    clean = acc * h / 3.0;
  }
  return config.label_noise + (1.0 - 2.0 * config.label_noise) * clean;
}

double bayes_accuracy_full(const SynthConfig& config) {
  config.validate();
  if (config.task != SynthTask::classification) throw std::invalid_argument("bayes accuracy needs a classification task");
  return 1.0 - config.label_noise;
}

}  // namespace rovtl::synth
