#include "mf/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "mf/errors.hpp"
#include "mf/io.hpp"

namespace mf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw InvalidConfig("bad value '" + std::string(value) + "' for key '" +
                      std::string(key) + "'");
}

template <typename T>
T to_number(std::string_view key, std::string_view value) {
  T v{};
  const auto res =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    bad_value(key, value);
  }
  return v;
}

double to_double(std::string_view key, std::string_view value) {
  return to_number<double>(key, value);
}

int to_int(std::string_view key, std::string_view value) {
  return to_number<int>(key, value);
}

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  return to_number<std::uint64_t>(key, value);
}

std::string to_string_value(std::string_view key, std::string_view value) {
  if (value.size() < 2 || value.front() != '"' || value.back() != '"') {
    bad_value(key, value);
  }
  return std::string(value.substr(1, value.size() - 2));
}

std::vector<int> to_int_list(std::string_view key, std::string_view value) {
  if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
    bad_value(key, value);
  }
  std::vector<int> out;
  std::string_view body = trim(value.substr(1, value.size() - 2));
  if (body.empty()) return out;
  while (true) {
    const std::size_t comma = body.find(',');
    const std::string_view item = trim(body.substr(0, comma));
    if (item.empty()) bad_value(key, value);
    out.push_back(to_int(key, item));
    if (comma == std::string_view::npos) return out;
    body = trim(body.substr(comma + 1));
  }
}

const std::set<std::string, std::less<>>& override_fields() {
  static const std::set<std::string, std::less<>> fields = {
      "upper_arm",      "forearm",        "torso",
      "shoulder_width", "seat_distance",  "lookahead_gain",
      "lookahead_base", "steering_lag",   "target_speed_straight",
      "target_speed_turn", "noise_joint_xy", "noise_joint_z",
      "outlier_rate"};
  return fields;
}

void set_override(RunConfig& config, std::string_view key,
                  std::string_view value) {
  // subject.<i>.<field> = <double>
  std::string_view rest = key.substr(std::string_view("subject.").size());
  const std::size_t dot = rest.find('.');
  if (dot == std::string_view::npos) {
    throw InvalidConfig("override key '" + std::string(key) +
                        "' wants the form subject.<i>.<field>");
  }
  const int subject = to_int(key, rest.substr(0, dot));
  const std::string field(rest.substr(dot + 1));
  if (!override_fields().contains(field)) {
    throw InvalidConfig("unknown profile field '" + field + "' in key '" +
                        std::string(key) + "'");
  }
  config.subject_overrides[subject][field] = to_double(key, value);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    const std::string_view line =
        trim(strip_comment(std::string_view(text).substr(start, end - start)));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidConfig("line " + std::to_string(line_no) +
                          " is not a key = value pair");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw InvalidConfig("line " + std::to_string(line_no) +
                          " is missing a key or value");
    }

    if (key == "subjects") {
      config.subjects = to_int(key, value);
    } else if (key == "duration") {
      config.duration = to_double(key, value);
    } else if (key == "dt") {
      config.dt = to_double(key, value);
    } else if (key == "seed") {
      config.seed = to_u64(key, value);
    } else if (key == "track_turns") {
      config.track_turns = to_int(key, value);
    } else if (key == "out_dir") {
      config.out_dir = to_string_value(key, value);
    } else if (key == "set_id") {
      config.set_id = to_int(key, value);
    } else if (key == "t_wi") {
      config.t_wi = to_int(key, value);
    } else if (key == "t_wo") {
      config.t_wo = to_int(key, value);
    } else if (key == "stride") {
      config.stride = to_int(key, value);
    } else if (key == "family") {
      config.family = to_string_value(key, value);
    } else if (key == "hidden") {
      config.hidden = to_int(key, value);
    } else if (key == "dropout") {
      config.dropout = to_double(key, value);
    } else if (key == "epochs") {
      config.epochs = to_int(key, value);
    } else if (key == "batch_size") {
      config.batch_size = to_int(key, value);
    } else if (key == "lr") {
      config.lr = to_double(key, value);
    } else if (key == "n_pre") {
      config.n_pre = to_int(key, value);
    } else if (key == "mlp_hidden") {
      config.mlp_hidden = to_int_list(key, value);
    } else if (key == "mlp_epochs") {
      config.mlp_epochs = to_int(key, value);
    } else if (key == "trees") {
      config.trees = to_int(key, value);
    } else if (key == "min_leaf") {
      config.min_leaf = to_int(key, value);
    } else if (key == "train_fraction") {
      config.train_fraction = to_double(key, value);
    } else if (key == "split_seed") {
      config.split_seed = to_u64(key, value);
    } else if (key == "train_seed") {
      config.train_seed = to_u64(key, value);
    } else if (key == "tests") {
      config.tests = to_int_list(key, value);
    } else if (key == "mode") {
      config.mode = to_string_value(key, value);
    } else if (key == "pool") {
      config.pool = to_int(key, value);
    } else if (key.substr(0, 8) == "subject.") {
      set_override(config, key, value);
    } else {
      throw InvalidConfig("unknown config key '" + std::string(key) + "'");
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig config = parse_run_config(read_file(path));
  validate_config(config);
  return config;
}

void validate_config(const RunConfig& config) {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidConfig(what);
  };
  require(config.subjects >= 1, "subjects must be >= 1");
  require(config.duration > 0.0, "duration must be positive");
  require(config.dt > 0.0, "dt must be positive");
  require(config.track_turns >= 1, "track_turns must be >= 1");
  require(!config.out_dir.empty(), "out_dir must not be empty");
  require(config.set_id >= 1 && config.set_id <= 5, "set_id must be 1..5");
  require(config.t_wi >= 1, "t_wi must be >= 1");
  require(config.t_wo >= 1, "t_wo must be >= 1");
  require(config.stride >= 1, "stride must be >= 1");
  const ModelFamily family = family_from_string(config.family);
  require(family != ModelFamily::BiLstm || config.t_wi == config.t_wo,
          "the sequence family needs t_wi == t_wo");
  require(config.hidden >= 1, "hidden must be >= 1");
  require(config.dropout >= 0.0 && config.dropout < 1.0,
          "dropout must lie in [0, 1)");
  require(config.epochs >= 1, "epochs must be >= 1");
  require(config.batch_size >= 1, "batch_size must be >= 1");
  require(config.lr > 0.0, "lr must be positive");
  require(config.n_pre >= 1, "n_pre must be >= 1");
  require(!config.mlp_hidden.empty(), "mlp_hidden must not be empty");
  for (const int h : config.mlp_hidden) {
    require(h >= 1, "mlp_hidden entries must be >= 1");
  }
  require(config.mlp_epochs >= 1, "mlp_epochs must be >= 1");
  require(config.trees >= 1, "trees must be >= 1");
  require(config.min_leaf >= 1, "min_leaf must be >= 1");
  require(config.train_fraction > 0.0 && config.train_fraction < 1.0,
          "train_fraction must lie strictly inside (0, 1)");
  require(!config.tests.empty(), "tests must not be empty");
  std::set<int> seen;
  for (const int t : config.tests) {
    require(t >= 1 && t <= 4, "test ids must be 1..4");
    require(seen.insert(t).second, "test ids must not repeat");
  }
  require(config.mode == "all" || config.mode == "individual" ||
              config.mode == "concatenated",
          "mode must be all, individual or concatenated");
  require(config.pool >= 0 && config.pool <= config.subjects,
          "pool must lie in 0..subjects");
  for (const auto& [subject, fields] : config.subject_overrides) {
    require(subject >= 1 && subject <= config.subjects,
            "override subject index out of range");
    require(!fields.empty(), "override subject has no fields");
  }
}

ModelFamily family_from_string(const std::string& name) {
  if (name == "bilstm") return ModelFamily::BiLstm;
  if (name == "mlp") return ModelFamily::Mlp;
  if (name == "extra_trees") return ModelFamily::ExtraTrees;
  throw InvalidConfig("unknown model family '" + name + "'");
}

ProtocolConfig to_protocol_config(const RunConfig& config) {
  ProtocolConfig pc;
  pc.hidden = config.hidden;
  pc.dropout = config.dropout;
  pc.epochs = config.epochs;
  pc.batch_size = config.batch_size;
  pc.lr = config.lr;
  pc.seed = config.train_seed;
  pc.split.train_fraction = config.train_fraction;
  pc.split.seed = config.split_seed;
  pc.n_pre = config.n_pre;
  pc.mlp.hidden = config.mlp_hidden;
  pc.mlp.epochs = config.mlp_epochs;
  pc.mlp.batch_size = config.batch_size;
  pc.mlp.lr = config.lr;
  pc.trees.n_estimators = config.trees;
  pc.trees.min_samples_leaf = config.min_leaf;
  return pc;
}

void apply_profile_overrides(DriverProfile& profile,
                             const std::map<std::string, double>& overrides) {
  for (const auto& [field, value] : overrides) {
    if (field == "upper_arm") {
      profile.upper_arm = value;
    } else if (field == "forearm") {
      profile.forearm = value;
    } else if (field == "torso") {
      profile.torso = value;
    } else if (field == "shoulder_width") {
      profile.shoulder_width = value;
    } else if (field == "seat_distance") {
      profile.seat_distance = value;
    } else if (field == "lookahead_gain") {
      profile.lookahead_gain = value;
    } else if (field == "lookahead_base") {
      profile.lookahead_base = value;
    } else if (field == "steering_lag") {
      profile.steering_lag = value;
    } else if (field == "target_speed_straight") {
      profile.target_speed_straight = value;
    } else if (field == "target_speed_turn") {
      profile.target_speed_turn = value;
    } else if (field == "noise_joint_xy") {
      profile.noise_joint_xy = value;
    } else if (field == "noise_joint_z") {
      profile.noise_joint_z = value;
    } else if (field == "outlier_rate") {
      profile.outlier_rate = value;
    } else {
      throw InvalidConfig("unknown profile field '" + field + "'");
    }
  }
}

}  // namespace mf
