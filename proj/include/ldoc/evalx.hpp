#pragma once

#include <array>
#include <string>
#include <vector>

namespace ldoc {

// 2x2 counts; rows = gold class, cols = predicted class.
struct ConfusionMatrix {
  std::array<std::array<long, 2>, 2> cm{{{0, 0}, {0, 0}}};

  long total() const { return cm[0][0] + cm[0][1] + cm[1][0] + cm[1][1]; }
  long operator()(int gold, int pred) const {
    return cm[static_cast<std::size_t>(gold)][static_cast<std::size_t>(pred)];
  }
};

struct MacroMetrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  // Names of classes with a zero row/column sum (scored 0, not skipped).
  std::vector<std::string> flags;
};

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& golds);

MacroMetrics macro_metrics(const ConfusionMatrix& cm);

struct MetricsRow {
  std::string variant;
  std::string split;
  double accuracy = 0.0;        // fractions in [0,1]; rendered as %
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::uint64_t seed = 0;
  double wall_clock_s = 0.0;
  std::vector<std::string> flags;
};

// JSON-lines, one row per object, full precision.
void write_results_jsonl(const std::string& path,
                         const std::vector<MetricsRow>& rows);
// Aligned text table with Acc./mP/mR column groups per split.
std::string render_results_table(const std::vector<MetricsRow>& rows);

struct PipelineConfig;  // cli module

// Runs the configured variant grid end to end (training Step II per
// variant) and returns one row per variant x split.
std::vector<MetricsRow> run_experiment(const PipelineConfig& config);

}  // namespace ldoc
