#include "ldoc/evalx.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ldoc {

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& golds) {
  if (preds.empty()) throw std::invalid_argument("confusion: empty inputs");
  if (preds.size() != golds.size())
    throw std::invalid_argument("confusion: preds/golds length mismatch (" +
                                std::to_string(preds.size()) + " vs " +
                                std::to_string(golds.size()) + ")");
  ConfusionMatrix out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], g = golds[i];
    if (p < 0 || p > 1 || g < 0 || g > 1)
      throw std::invalid_argument("confusion: labels must be 0 or 1");
    ++out.cm[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
  }
  return out;
}

MacroMetrics macro_metrics(const ConfusionMatrix& cm) {
  const long total = cm.total();
  if (total == 0) throw std::invalid_argument("macro_metrics: empty confusion matrix");
  MacroMetrics m;
  m.accuracy = static_cast<double>(cm(0, 0) + cm(1, 1)) /
               static_cast<double>(total);
  for (int c = 0; c < 2; ++c) {
    const long col = cm(0, c) + cm(1, c);
    const long row = cm(c, 0) + cm(c, 1);
    // Zero denominators score 0 and flag the class as degenerate.
    if (col == 0)
      m.flags.push_back("degenerate class " + std::to_string(c) +
                        " (no predictions)");
    else
      m.macro_precision += static_cast<double>(cm(c, c)) / col / 2.0;
    if (row == 0)
      m.flags.push_back("degenerate class " + std::to_string(c) +
                        " (no gold examples)");
    else
      m.macro_recall += static_cast<double>(cm(c, c)) / row / 2.0;
  }
  return m;
}

void write_results_jsonl(const std::string& path,
                         const std::vector<MetricsRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write results: " + path);
  for (const auto& r : rows) {
    nlohmann::json j;
    j["variant"] = r.variant;
    j["split"] = r.split;
    j["accuracy"] = r.accuracy;
    j["mP"] = r.macro_precision;
    j["mR"] = r.macro_recall;
    j["seed"] = r.seed;
    j["flags"] = r.flags;
    os << j.dump() << "\n";
  }
}

std::string render_results_table(const std::vector<MetricsRow>& rows) {
  // One line per variant with Validation and Test column groups.
  std::vector<std::string> variants;
  for (const auto& r : rows) {
    bool seen = false;
    for (const auto& v : variants) seen = seen || v == r.variant;
    if (!seen) variants.push_back(r.variant);
  }
  auto find_row = [&](const std::string& v,
                      const std::string& split) -> const MetricsRow* {
    for (const auto& r : rows)
      if (r.variant == v && r.split == split) return &r;
    return nullptr;
  };

  std::size_t name_w = 24;
  for (const auto& v : variants) name_w = std::max(name_w, v.size() + 2);

  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s | %20s | %20s\n",
                static_cast<int>(name_w), "Models", "Validation", "Test");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-*s | %6s %6s %6s | %6s %6s %6s\n",
                static_cast<int>(name_w), "(Metrics %)", "Acc.", "mP", "mR",
                "Acc.", "mP", "mR");
  out += buf;
  out += std::string(name_w + 2 * 24 + 3, '-') + "\n";
  for (const auto& v : variants) {
    const auto* val = find_row(v, "validation");
    const auto* test = find_row(v, "test");
    auto cell = [](const MetricsRow* r, double MetricsRow::* f) {
      char c[16];
      if (r) std::snprintf(c, sizeof(c), "%6.2f", (r->*f) * 100.0);
      else std::snprintf(c, sizeof(c), "%6s", "-");
      return std::string(c);
    };
    std::snprintf(buf, sizeof(buf), "%-*s | %s %s %s | %s %s %s\n",
                  static_cast<int>(name_w), v.c_str(),
                  cell(val, &MetricsRow::accuracy).c_str(),
                  cell(val, &MetricsRow::macro_precision).c_str(),
                  cell(val, &MetricsRow::macro_recall).c_str(),
                  cell(test, &MetricsRow::accuracy).c_str(),
                  cell(test, &MetricsRow::macro_precision).c_str(),
                  cell(test, &MetricsRow::macro_recall).c_str());
    out += buf;
  }
  return out;
}

}  // namespace ldoc
