#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldoc/evalx.hpp"
#include "ldoc/pipeline.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string artifacts;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string head;
  std::vector<std::string> overrides;
};

ldoc::PipelineConfig build_config(const CliOptions& opts) {
  ldoc::PipelineConfig config;
  if (!opts.config_path.empty())
    config = ldoc::PipelineConfig::from_json_file(opts.config_path);
  for (const auto& ov : opts.overrides) config.apply_override(ov);
  // Direct flags win over --stage-override (apply_override re-parses the
  // config, so they must come last).
  if (!opts.artifacts.empty()) config.artifacts = opts.artifacts;
  if (opts.seed) config.seed = *opts.seed;
  if (!opts.variant.empty()) config.variant = opts.variant;
  if (!opts.head.empty()) config.head = opts.head;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-step long-document classifier pipeline"};
  app.require_subcommand(1);

  CliOptions opts;
  app.add_option("--config", opts.config_path, "JSON config file");
  app.add_option("--artifacts", opts.artifacts, "Artifact directory");
  app.add_option("--seed", opts.seed, "Global seed");
  app.add_option("--variant", opts.variant,
                 "Input variant: alpha, beta, alpha_nc, beta_nc");
  app.add_option("--head", opts.head,
                 "Classifier head: encoder, encoder_bilstm, bigru_x2, "
                 "bilstm_bigru");
  app.add_option("--stage-override", opts.overrides,
                 "Dotted config override, e.g. doc_model.epochs=3")
      ->take_all();

  std::string command;
  for (const char* name :
       {"synth", "ingest", "train-chunk", "embed", "reduce", "cluster",
        "train-doc", "evaluate", "pipeline"}) {
    auto* sub = app.add_subcommand(name);
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    ldoc::Pipeline pipeline(build_config(opts));
    if (command == "synth") pipeline.synth();
    else if (command == "ingest") pipeline.ingest();
    else if (command == "train-chunk") pipeline.train_chunk();
    else if (command == "embed") pipeline.embed();
    else if (command == "reduce") pipeline.reduce();
    else if (command == "cluster") pipeline.cluster();
    else if (command == "train-doc") pipeline.train_doc();
    else if (command == "evaluate") {
      std::cout << ldoc::render_results_table(pipeline.evaluate());
    } else if (command == "pipeline") {
      std::cout << ldoc::render_results_table(pipeline.run_all());
    }
  } catch (const ldoc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
