#pragma once

// Metrics, availability sweeps and attention-based attribute reports.

#include "rovtl/dataset.hpp"
#include "rovtl/finetune.hpp"
#include "rovtl/tabular.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rovtl::eval {

using ag::Matrix;

enum class MetricKind { auc, accuracy, mae };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view text);
bool higher_is_better(MetricKind kind);

// Area under the ROC curve from the Mann-Whitney rank sum; tied scores get
// their average rank. Throws when only one class is present.
double binary_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// scores: n x outputs from finetune::to_scores. targets: the dataset target
// matrix. Binary multiclass AUC uses the positive-class column; more classes
// and multilabel tasks take the macro average of one-vs-rest AUCs over the
// columns that have both classes.
double metric(const Matrix& scores, const Matrix& targets, MetricKind kind, const finetune::TaskSpec& spec);

std::vector<double> default_fractions();

struct SweepResult {
  tabular::MissingnessKind protocol = tabular::MissingnessKind::random;
  MetricKind metric = MetricKind::accuracy;
  std::vector<double> fractions;
  std::vector<double> values;
  double mean = 0.0;

  void validate() const;
  double value_at(double fraction) const;
};

double mean_over_sweep(const std::vector<double>& values);

struct SweepOptions {
  tabular::MissingnessKind protocol = tabular::MissingnessKind::random;
  MetricKind metric = MetricKind::accuracy;
  std::optional<tabular::ImportanceRanking> ranking;
  std::vector<double> fractions = default_fractions();
  std::uint64_t seed = 0;
};

// Scores of the model on every test sample after dropping attributes under
// `protocol` at one availability fraction.
Matrix scores_at(const finetune::RovtlModel& model, const Dataset& test, const tabular::MissingnessProtocol& protocol);

// For the random kind each (fraction, sample) pair gets its own derived seed.
SweepResult sweep(const finetune::RovtlModel& model, const Dataset& test, const SweepOptions& options);

// Metric on the complete records.
double evaluate_full(const finetune::RovtlModel& model, const Dataset& test, MetricKind kind);

struct AttributeScore {
  std::string group;  // "class0", "label2", or "all"
  std::string attribute;
  double score = 0.0;
};

struct InterpretabilityReport {
  std::vector<std::string> groups;
  std::vector<std::string> attributes;  // schema order
  // groups x attributes; each row is a mean of per-sample distributions.
  Matrix scores;
  // Per-sample attention distributions over schema columns (n x attributes).
  Matrix per_sample;

  std::vector<AttributeScore> sorted_rows() const;
  // Attributes ranked by the mean over groups, highest first.
  std::vector<std::string> overall_ranking() const;
};

// Requires gated fusion. Samples with no attributes are skipped.
InterpretabilityReport interpretability_report(const finetune::RovtlModel& model, const Dataset& test);

void write_report_csv(const InterpretabilityReport& report, const std::filesystem::path& path);

// header: protocol,metric,fraction,value
void write_sweep_csv(const std::vector<SweepResult>& results, const std::filesystem::path& path);
std::vector<SweepResult> read_sweep_csv(const std::filesystem::path& path);

// Line plot of metric against fraction, one line per result. Legend
// entries default to the protocol names.
void write_sweep_svg(const std::vector<SweepResult>& results, const std::string& title,
                     const std::filesystem::path& path, const std::vector<std::string>& labels = {});

}  // namespace rovtl::eval
