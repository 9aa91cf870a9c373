// formlab: command-line front end for the imitation lab.
//
//   formlab <subcommand> [-c config.txt] [--set key=value ...] [--force]
//
// Exit codes: 0 success, 1 runtime failure (or failed verification),
// 2 malformed config or usage, 3 missing input artifact, 4 output exists.

#include <CLI11.hpp>

#include "formlab/harness/commands.hpp"

namespace {

using namespace formlab;
using namespace formlab::harness;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  bool force = false;
};

int run(const CommonOptions& o, const std::function<int(const ExperimentConfig&, bool)>& body) {
  try {
    const ExperimentConfig cfg = o.config_path.empty() ? parse_config("", "defaults", o.overrides)
                                                       : load_config(o.config_path, o.overrides);
    return body(cfg, o.force);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const MissingDependency& e) {
    std::cerr << "missing dependency: " << e.what() << "\n";
    return kMissingDependency;
  } catch (const OutputExists& e) {
    std::cerr << "refusing to overwrite: " << e.what() << "\n";
    return kOutputExists;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FORM imitation-from-observation lab"};
  app.require_subcommand(1);
  CommonOptions opt;
  int code = kOk;

  auto add = [&](const std::string& name, const std::string& help,
                 std::function<int(const ExperimentConfig&, bool)> body) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", opt.config_path, "config file (key = value lines)");
    sub->add_option("--set", opt.overrides, "override one key, e.g. --set learner.steps=1000")->take_all();
    sub->add_flag("--force", opt.force, "clear an existing output directory");
    sub->callback([&opt, &code, body] { code = run(opt, body); });
  };

  add("train-expert", "train an RL expert on the task reward", [](const ExperimentConfig& c, bool f) {
    cmd_train_expert(c, f, std::cerr);
    return kOk;
  });
  add("record-demos", "record expert demonstrations with distractors", [](const ExperimentConfig& c, bool f) {
    cmd_record_demos(c, f, std::cerr);
    return kOk;
  });
  add("train-demo-model", "fit the demonstrator effect model", [](const ExperimentConfig& c, bool f) {
    cmd_train_demo_model(c, f, std::cerr);
    return kOk;
  });
  add("imitate", "train an imitator with the configured method", [](const ExperimentConfig& c, bool f) {
    cmd_imitate(c, f, std::cerr);
    return kOk;
  });
  add("evaluate", "evaluate a saved policy or the expert", [](const ExperimentConfig& c, bool f) {
    cmd_evaluate(c, f, std::cerr);
    return kOk;
  });
  add("sweep", "distractor sweep over methods, N, M and seeds", [](const ExperimentConfig& c, bool f) {
    const SweepReport r = cmd_sweep(c, f, std::cerr);
    std::cerr << "sweep: " << r.ran << " ran, " << r.skipped << " skipped, " << r.failed << " failed\n";
    return kOk;
  });
  add("verify", "run the verification suites", [](const ExperimentConfig& c, bool f) {
    return cmd_verify(c, f, std::cerr) ? kOk : kFailure;
  });
  add("plot", "write SVG plots for sweeps and traces", [](const ExperimentConfig& c, bool f) {
    for (const auto& p : cmd_plot(c, f, std::cerr)) std::cout << p.string() << "\n";
    return kOk;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : kConfigError;
  }
  return code;
}
