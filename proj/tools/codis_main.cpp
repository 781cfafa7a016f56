// codis command-line front end. Talks to the shared library exclusively
// through the C API in codis/codis.h.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "codis/codis.h"

namespace {

struct GlobalArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int workers = 0;
};

int dispatch(const std::string& subcommand, const GlobalArgs& args) {
  codis_run_options opts{};
  opts.config_path = args.config.empty() ? nullptr : args.config.c_str();
  opts.output_dir = args.out.c_str();
  opts.has_seed = args.has_seed ? 1 : 0;
  opts.seed = args.seed;
  opts.workers = args.workers;
  const codis_status status = codis_run(subcommand.c_str(), &opts);
  if (status != CODIS_OK) std::fprintf(stderr, "codis %s: %s\n", subcommand.c_str(), codis_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codis - coincident pulse-train event detection, classification,"
               " disentanglement and property inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", codis_version());

  GlobalArgs args;
  const char* descriptions[][2] = {
      {"simulate", "generate a synthetic labeled dataset or stream"},
      {"detect", "segment a raw stream into quality-controlled signals"},
      {"train", "train the coincidence classifier (with replicates)"},
      {"transfer-matrix", "evaluate models against datasets full-factorially"},
      {"disentangle", "classify, fit templates and infer event properties"},
      {"report", "render plots and summaries from result tables"},
  };
  for (const auto& d : descriptions) {
    auto* sub = app.add_subcommand(d[0], d[1]);
    sub->add_option("--config", args.config, "config file (sectioned key = value text)");
    sub->add_option("--out", args.out, "output directory")->required();
    sub->add_option("--seed", args.seed, "seed override for the subcommand section")
        ->each([&args](const std::string&) { args.has_seed = true; });
    sub->add_option("--workers", args.workers, "worker threads (0 = hardware)");
  }

  CLI11_PARSE(app, argc, argv);
  for (const auto* sub : app.get_subcommands()) return dispatch(sub->get_name(), args);
  return 1;
}
