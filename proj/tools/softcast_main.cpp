#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "softcast/config.hpp"
#include "softcast/error.hpp"
#include "softcast/kernels.hpp"
#include "softcast/pipeline.hpp"

namespace {

using Command = std::function<int(const softcast::RunConfig&, std::ostream&)>;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string backend = "auto";
};

int run(const Options& opt, const Command& cmd) {
  softcast::RunConfig cfg = opt.config.empty() ? softcast::RunConfig{} : softcast::load_config(opt.config);
  cfg = softcast::apply_overrides(cfg, opt.overrides);
  if (opt.backend != "auto") softcast::kernels::set_backend(softcast::kernels::parse_backend(opt.backend));
  return cmd(cfg, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"softcast: soft-token trajectory forecasting with risk-aware decoding"};
  app.require_subcommand(1);

  Options opt;
  if (const char* env = std::getenv("SOFTCAST_CONFIG")) opt.config = env;
  app.add_option("-c,--config", opt.config, "JSON run config (default: $SOFTCAST_CONFIG)");
  app.add_option("-s,--set", opt.overrides, "override a config value, e.g. --set train.seed=3")
      ->take_all();
  app.add_option("--backend", opt.backend, "kernel backend: auto, scalar, avx2, neon (default: $SOFTCAST_KERNELS or the best the CPU supports)");

  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"gen-synthetic", {"write a synthetic dataset to paths.data", softcast::cmd_gen_synthetic}},
      {"ingest", {"clean and window paths.data, report the split", softcast::cmd_ingest}},
      {"train", {"two-stage training, writes the checkpoint", softcast::cmd_train}},
      {"forecast", {"roll out and decode test windows to CSV/JSON", softcast::cmd_forecast}},
      {"evaluate", {"forecast and report per-horizon metrics", softcast::cmd_evaluate}},
      {"sweep-lambda", {"decode one rollout under each eval.lambdas value", softcast::cmd_sweep_lambda}},
      {"plot-grid", {"render forecasts onto the error grid as SVG", softcast::cmd_plot_grid}},
  };
  Command chosen;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->fallthrough();
    const Command fn = entry.second;
    sub->callback([&chosen, fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    return run(opt, chosen);
  } catch (const softcast::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const softcast::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const softcast::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const softcast::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
