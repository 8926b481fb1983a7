#include "rovtl/evaluation.hpp"

#include "rovtl/rng.hpp"
#include "rovtl/text.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rovtl::eval {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::auc:
      return "auc";
    case MetricKind::accuracy:
      return "accuracy";
    case MetricKind::mae:
      return "mae";
  }
  return "auc";
}

MetricKind parse_metric_kind(std::string_view text) {
  if (text == "auc") return MetricKind::auc;
  if (text == "accuracy") return MetricKind::accuracy;
  if (text == "mae") return MetricKind::mae;
  throw std::invalid_argument("unknown metric '" + std::string(text) + "'");
}

bool higher_is_better(MetricKind kind) { return kind != MetricKind::mae; }

double binary_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double average_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      const int label = labels[order[k]];
      if (label != 0 && label != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
      if (label == 1) {
        positive_rank_sum += average_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) throw std::invalid_argument("auc: both classes must be present");
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

namespace {

double macro_auc(const Matrix& scores, const std::vector<std::vector<int>>& labels) {
  double sum = 0.0;
  int scored = 0;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto& col = labels[c];
    const auto pos = std::count(col.begin(), col.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(col.size())) {
      std::clog << "warning: auc column " << c << " has a single class and is skipped\n";
      continue;
    }
    const Eigen::VectorXd column = scores.col(static_cast<ag::Index>(c));
    sum += binary_auc(std::vector<double>(column.data(), column.data() + column.size()), col);
    ++scored;
  }
  if (scored == 0) throw std::invalid_argument("auc: no column has both classes");
  return sum / scored;
}

int argmax_row(const Matrix& m, ag::Index r) {
  int best = 0;
  for (ag::Index c = 1; c < m.cols(); ++c) {
    if (m(r, c) > m(r, best)) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace

double metric(const Matrix& scores, const Matrix& targets, MetricKind kind, const finetune::TaskSpec& spec) {
  if (scores.rows() != targets.rows() || scores.cols() != spec.outputs || targets.cols() != spec.target_width()) {
    throw std::invalid_argument("metric: score/target shapes do not match the task");
  }
  if (scores.rows() == 0) throw std::invalid_argument("metric: empty evaluation set");
  const auto n = static_cast<std::size_t>(scores.rows());

  if (kind == MetricKind::mae) {
    if (spec.kind != finetune::TaskKind::regression) throw std::invalid_argument("metric: mae needs a regression task");
    return (scores - targets).cwiseAbs().mean();
  }
  if (spec.kind == finetune::TaskKind::regression) {
    throw std::invalid_argument("metric: " + std::string(to_string(kind)) + " needs a classification task");
  }

  if (spec.kind == finetune::TaskKind::multiclass) {
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i) classes[i] = static_cast<int>(targets(static_cast<ag::Index>(i), 0));
    if (kind == MetricKind::accuracy) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n; ++i) correct += argmax_row(scores, static_cast<ag::Index>(i)) == classes[i];
      return static_cast<double>(correct) / static_cast<double>(n);
    }
    if (spec.outputs == 2) {
      std::vector<int> positive(n);
      for (std::size_t i = 0; i < n; ++i) positive[i] = classes[i] == 1;
      const Eigen::VectorXd col = scores.col(1);
      return binary_auc(std::vector<double>(col.data(), col.data() + col.size()), positive);
    }
    std::vector<std::vector<int>> one_vs_rest(static_cast<std::size_t>(spec.outputs), std::vector<int>(n));
    for (std::size_t c = 0; c < one_vs_rest.size(); ++c) {
      for (std::size_t i = 0; i < n; ++i) one_vs_rest[c][i] = classes[i] == static_cast<int>(c);
    }
    return macro_auc(scores, one_vs_rest);
  }

  // multilabel
  if (kind == MetricKind::accuracy) {
    std::size_t correct = 0;
    for (ag::Index i = 0; i < scores.size(); ++i) correct += (scores.data()[i] >= 0.5) == (targets.data()[i] == 1.0);
    return static_cast<double>(correct) / static_cast<double>(scores.size());
  }
  std::vector<std::vector<int>> per_label(static_cast<std::size_t>(spec.outputs), std::vector<int>(n));
  for (std::size_t c = 0; c < per_label.size(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      per_label[c][i] = targets(static_cast<ag::Index>(i), static_cast<ag::Index>(c)) == 1.0;
    }
  }
  return macro_auc(scores, per_label);
}

std::vector<double> default_fractions() {
  std::vector<double> f;
  for (int k = 0; k <= 10; ++k) f.push_back(k / 10.0);
  return f;
}

double mean_over_sweep(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_over_sweep: no values");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

void SweepResult::validate() const {
  if (fractions.empty() || fractions.size() != values.size()) {
    throw std::invalid_argument("sweep result: fraction and value counts differ");
  }
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] <= 1.0)) throw std::invalid_argument("sweep result: fraction outside [0, 1]");
    if (i > 0 && !(fractions[i] > fractions[i - 1])) throw std::invalid_argument("sweep result: fractions not ascending");
  }
  if (std::abs(mean - mean_over_sweep(values)) > 1e-9) throw std::invalid_argument("sweep result: stale mean");
}

double SweepResult::value_at(double fraction) const {
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (std::abs(fractions[i] - fraction) < 1e-12) return values[i];
  }
  throw std::out_of_range("sweep result: no value at fraction " + text::format_double(fraction));
}

Matrix scores_at(const finetune::RovtlModel& model, const Dataset& test, const tabular::MissingnessProtocol& protocol) {
  Matrix scores(static_cast<ag::Index>(test.size()), model.config.task.outputs);
  for (std::size_t i = 0; i < test.size(); ++i) {
    tabular::MissingnessProtocol per_sample = protocol;
    per_sample.seed = derive_seed(protocol.seed, streams::kSweep, i);
    const tabular::TabularSample kept = tabular::apply_missingness(test.samples[i], per_sample);
    scores.row(static_cast<ag::Index>(i)) =
        finetune::to_scores(finetune::predict(test.images[i], kept, model), model.config.task);
  }
  return scores;
}

SweepResult sweep(const finetune::RovtlModel& model, const Dataset& test, const SweepOptions& options) {
  test.validate();
  SweepResult result;
  result.protocol = options.protocol;
  result.metric = options.metric;
  result.fractions = options.fractions;
  for (std::size_t k = 0; k < options.fractions.size(); ++k) {
    tabular::MissingnessProtocol protocol;
    protocol.kind = options.protocol;
    protocol.availability = options.fractions[k];
    protocol.ranking = options.ranking;
    protocol.seed = derive_seed(options.seed, streams::kSweep, k);
    protocol.validate();
    result.values.push_back(metric(scores_at(model, test, protocol), test.targets, options.metric, model.config.task));
  }
  result.mean = mean_over_sweep(result.values);
  result.validate();
  return result;
}

double evaluate_full(const finetune::RovtlModel& model, const Dataset& test, MetricKind kind) {
  Matrix scores(static_cast<ag::Index>(test.size()), model.config.task.outputs);
  for (std::size_t i = 0; i < test.size(); ++i) {
    scores.row(static_cast<ag::Index>(i)) =
        finetune::to_scores(finetune::predict(test.images[i], test.samples[i], model), model.config.task);
  }
  return metric(scores, test.targets, kind, model.config.task);
}

std::vector<AttributeScore> InterpretabilityReport::sorted_rows() const {
  std::vector<AttributeScore> rows;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<std::size_t> order(attributes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores(static_cast<ag::Index>(g), static_cast<ag::Index>(a)) >
             scores(static_cast<ag::Index>(g), static_cast<ag::Index>(b));
    });
    for (std::size_t a : order) {
      rows.push_back({groups[g], attributes[a], scores(static_cast<ag::Index>(g), static_cast<ag::Index>(a))});
    }
  }
  return rows;
}

std::vector<std::string> InterpretabilityReport::overall_ranking() const {
  const Eigen::RowVectorXd mean = scores.colwise().mean();
  std::vector<std::size_t> order(attributes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mean(static_cast<ag::Index>(a)) > mean(static_cast<ag::Index>(b)); });
  std::vector<std::string> out;
  for (std::size_t a : order) out.push_back(attributes[a]);
  return out;
}

InterpretabilityReport interpretability_report(const finetune::RovtlModel& model, const Dataset& test) {
  if (model.config.fusion.kind != fusion::FusionKind::gated) {
    throw std::invalid_argument("interpretability_report: needs gated fusion");
  }
  test.validate();
  const tabular::AttributeSchema& schema = *test.schema;
  const auto columns = static_cast<ag::Index>(schema.size());
  InterpretabilityReport report;
  for (const auto& c : schema.columns()) report.attributes.push_back(c.name);

  std::vector<std::size_t> used;
  std::vector<Eigen::RowVectorXd> rows;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const tabular::TabularSample& sample = test.samples[i];
    if (sample.empty()) continue;
    fusion::FusionTrace trace;
    finetune::predict(test.images[i], sample, model, &trace);
    const std::vector<double> weights = fusion::aggregate_attention(trace);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(columns);
    for (std::size_t k = 0; k < weights.size(); ++k) row(sample.entries()[k].column) = weights[k];
    rows.push_back(std::move(row));
    used.push_back(i);
  }
  report.per_sample.resize(static_cast<ag::Index>(rows.size()), columns);
  for (std::size_t r = 0; r < rows.size(); ++r) report.per_sample.row(static_cast<ag::Index>(r)) = rows[r];

  // Group membership per used sample.
  std::vector<std::vector<std::size_t>> members;
  const finetune::TaskSpec& spec = model.config.task;
  switch (spec.kind) {
    case finetune::TaskKind::multiclass:
      for (int c = 0; c < spec.outputs; ++c) {
        std::vector<std::size_t> m;
        for (std::size_t r = 0; r < used.size(); ++r) {
          if (static_cast<int>(test.targets(static_cast<ag::Index>(used[r]), 0)) == c) m.push_back(r);
        }
        if (m.empty()) continue;
        report.groups.push_back("class" + std::to_string(c));
        members.push_back(std::move(m));
      }
      break;
    case finetune::TaskKind::multilabel:
      for (int c = 0; c < spec.outputs; ++c) {
        std::vector<std::size_t> m;
        for (std::size_t r = 0; r < used.size(); ++r) {
          if (test.targets(static_cast<ag::Index>(used[r]), c) == 1.0) m.push_back(r);
        }
        if (m.empty()) continue;
        report.groups.push_back("label" + std::to_string(c));
        members.push_back(std::move(m));
      }
      break;
    case finetune::TaskKind::regression: {
      std::vector<std::size_t> m(used.size());
      std::iota(m.begin(), m.end(), 0);
      if (!m.empty()) {
        report.groups.push_back("all");
        members.push_back(std::move(m));
      }
      break;
    }
  }
  report.scores = Matrix::Zero(static_cast<ag::Index>(members.size()), columns);
  for (std::size_t g = 0; g < members.size(); ++g) {
    for (std::size_t r : members[g]) report.scores.row(static_cast<ag::Index>(g)) += rows[r];
    report.scores.row(static_cast<ag::Index>(g)) /= static_cast<double>(members[g].size());
  }
  return report;
}

void write_report_csv(const InterpretabilityReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "group,attribute,score\n";
  for (const auto& row : report.sorted_rows()) {
    out << row.group << ',' << row.attribute << ',' << text::format_double(row.score) << '\n';
  }
}

void write_sweep_csv(const std::vector<SweepResult>& results, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "protocol,metric,fraction,value\n";
  for (const auto& r : results) {
    r.validate();
    for (std::size_t k = 0; k < r.fractions.size(); ++k) {
      out << tabular::to_string(r.protocol) << ',' << to_string(r.metric) << ',' << text::format_double(r.fractions[k])
          << ',' << text::format_double(r.values[k]) << '\n';
    }
  }
}

std::vector<SweepResult> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (text::trim(line) != "protocol,metric,fraction,value") {
    throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");
  }
  std::vector<SweepResult> results;
  while (std::getline(in, line)) {
    line = text::trim(line);
    if (line.empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != 4) throw std::runtime_error(path.string() + ": expected 4 fields in '" + line + "'");
    const auto protocol = tabular::parse_missingness_kind(fields[0]);
    const auto kind = parse_metric_kind(fields[1]);
    if (results.empty() || results.back().protocol != protocol || results.back().metric != kind) {
      results.push_back({protocol, kind, {}, {}, 0.0});
    }
    results.back().fractions.push_back(text::parse_double(fields[2], path.string()));
    results.back().values.push_back(text::parse_double(fields[3], path.string()));
  }
  for (auto& r : results) {
    r.mean = mean_over_sweep(r.values);
    r.validate();
  }
  return results;
}

void write_sweep_svg(const std::vector<SweepResult>& results, const std::string& title,
                     const std::filesystem::path& path, const std::vector<std::string>& labels) {
  if (results.empty()) throw std::invalid_argument("write_sweep_svg: nothing to plot");
  if (!labels.empty() && labels.size() != results.size()) throw std::invalid_argument("write_sweep_svg: label count");
  constexpr double width = 480, height = 320, left = 60, right = 20, top = 40, bottom = 50;
  const char* const colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double lo = results.front().values.front();
  double hi = lo;
  for (const auto& r : results) {
    for (double v : r.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo < 1e-9) {
    lo -= 0.05;
    hi += 0.05;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto px = [&](double f) { return left + f * (width - left - right); };
  auto py = [&](double v) { return top + (hi - v) / (hi - lo) * (height - top - bottom); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 10; k += 2) {
    const double f = k / 10.0;
    out << "<text x=\"" << px(f) << "\" y=\"" << height - bottom + 15 << "\" text-anchor=\"middle\">" << k * 10
        << "%</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    char label[32];
    std::snprintf(label, sizeof(label), "%.3f", v);
    out << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  out << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">available tabular data</text>\n";
  out << "<text x=\"14\" y=\"" << (top + height - bottom) / 2 << "\" transform=\"rotate(-90 14 "
      << (top + height - bottom) / 2 << ")\" text-anchor=\"middle\">" << to_string(results.front().metric)
      << "</text>\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const char* color = colors[i % std::size(colors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < r.fractions.size(); ++k) out << px(r.fractions[k]) << ',' << py(r.values[k]) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << width - right - 4 << "\" y=\"" << top + 14 * (i + 1) << "\" text-anchor=\"end\" fill=\""
        << color << "\">" << (labels.empty() ? std::string(tabular::to_string(r.protocol)) : labels[i]) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace rovtl::eval
