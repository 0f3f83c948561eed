#ifndef MF_CONFIG_HPP
#define MF_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mf/eval.hpp"
#include "mf/sim.hpp"

namespace mf {

// One flat key = value file drives a full run. Every random choice traces to
// a named seed here; nothing falls back to wall-clock entropy.
struct RunConfig {
  // generation
  int subjects = 3;
  double duration = 60.0;  // seconds per session
  double dt = kDefaultDt;
  std::uint64_t seed = 1;  // master seed for track, profiles and simulation
  int track_turns = 12;
  std::string out_dir = "out";
  // features and windowing
  int set_id = 4;
  int t_wi = 30;
  int t_wo = 30;
  int stride = 3;
  // model family and hyperparameters
  std::string family = "bilstm";
  int hidden = 32;
  double dropout = 0.2;
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  int n_pre = 30;
  std::vector<int> mlp_hidden = {64, 64};
  int mlp_epochs = 200;
  int trees = 10;
  int min_leaf = 2;
  // protocol
  double train_fraction = 0.7;
  std::uint64_t split_seed = 1;
  std::uint64_t train_seed = 1;
  std::vector<int> tests = {1};
  std::string mode = "all";  // all | individual | concatenated
  int pool = 0;              // concatenated pool size; 0 means all subjects
  // per-subject profile overrides: 1-based subject -> field -> value
  std::map<int, std::map<std::string, double>> subject_overrides;
};

// Parses the flat TOML-subset: `key = value` lines, `#` comments, double
// quoted strings, and bracketed integer lists. Dotted keys of the form
// subject.<i>.<field> override driver profile fields. Unknown keys or
// malformed values raise InvalidConfig.
RunConfig parse_run_config(const std::string& text);

// read_file + parse + validate.
RunConfig load_run_config(const std::filesystem::path& path);

// Range and cross-field validation; raises InvalidConfig.
void validate_config(const RunConfig& config);

// "bilstm" | "mlp" | "extra_trees"; anything else raises InvalidConfig.
ModelFamily family_from_string(const std::string& name);

ProtocolConfig to_protocol_config(const RunConfig& config);

void apply_profile_overrides(DriverProfile& profile,
                             const std::map<std::string, double>& overrides);

}  // namespace mf

#endif  // MF_CONFIG_HPP
