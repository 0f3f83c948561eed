#include <charconv>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mf/config.hpp"
#include "mf/errors.hpp"
#include "mf/pipeline.hpp"

namespace {

// key=value threshold on the per-step F1 aggregates of every written report
void set_threshold(mf::AssertThresholds& th, const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) {
    throw mf::InvalidConfig("--assert expects key=value, got '" + arg + "'");
  }
  const std::string key = arg.substr(0, eq);
  const std::string text = arg.substr(eq + 1);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw mf::InvalidConfig("--assert " + key + ": bad number '" + text + "'");
  }
  if (key == "t0_mean_min") {
    th.t0_mean_min = value;
  } else if (key == "t_end_mean_min") {
    th.t_end_mean_min = value;
  } else if (key == "t_end_gap_max") {
    th.t_end_gap_max = value;
  } else if (key == "step_increase_max") {
    th.step_increase_max = value;
  } else {
    throw mf::InvalidConfig("--assert: unknown threshold '" + key + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"manoeuvre identification and prediction pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> assert_args;

  CLI::App* gen =
      app.add_subcommand("gen", "generate a track and driving sessions");
  CLI::App* train =
      app.add_subcommand("train", "train models from recorded sessions");
  CLI::App* eval =
      app.add_subcommand("eval", "evaluate checkpoints and write reports");
  CLI::App* report =
      app.add_subcommand("report", "render per-step statistics tables");
  for (CLI::App* sub : {gen, train, eval, report}) {
    sub->add_option("--config", config_path, "run configuration file")
        ->required();
  }
  eval->add_option("--assert", assert_args,
                   "threshold key=value; keys: t0_mean_min, t_end_mean_min, "
                   "t_end_gap_max, step_increase_max");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const mf::RunConfig config = mf::load_run_config(config_path);
    if (gen->parsed()) {
      mf::cmd_gen(config);
    } else if (train->parsed()) {
      mf::cmd_train(config);
    } else if (eval->parsed()) {
      mf::AssertThresholds thresholds;
      for (const std::string& arg : assert_args) {
        set_threshold(thresholds, arg);
      }
      if (!mf::cmd_eval(config, thresholds)) {
        std::cerr << "mf: assertion failed: F1 aggregates below thresholds\n";
        return 2;
      }
    } else if (report->parsed()) {
      mf::cmd_report(config);
    }
  } catch (const mf::InvalidConfig& e) {
    std::cerr << "mf: config error: " << e.what() << "\n";
    return 1;
  } catch (const mf::IoError& e) {
    std::cerr << "mf: i/o error: " << e.what() << "\n";
    return 3;
  } catch (const mf::MissingData& e) {
    std::cerr << "mf: " << e.what() << "\n";
    return 3;
  } catch (const mf::MissingCheckpoint& e) {
    std::cerr << "mf: " << e.what() << "\n";
    return 3;
  } catch (const mf::FormatVersionMismatch& e) {
    std::cerr << "mf: " << e.what() << "\n";
    return 3;
  } catch (const mf::CorruptFile& e) {
    std::cerr << "mf: corrupt file: " << e.what() << "\n";
    return 3;
  } catch (const mf::Error& e) {
    std::cerr << "mf: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
