#include "mf/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "mf/errors.hpp"
#include "mf/io.hpp"
#include "mf/parallel.hpp"
#include "mf/rng.hpp"

namespace mf {

namespace {

std::filesystem::path out_file(const RunConfig& config,
                               const std::string& name) {
  return std::filesystem::path(config.out_dir) / name;
}

struct SubjectData {
  Session session;
  FeatureMatrix features;  // raw, unscaled
  std::vector<Manoeuvre> labels;
};

std::vector<SubjectData> load_subjects(const RunConfig& config) {
  std::vector<SubjectData> subjects;
  const FeatureSet set = feature_set_from_id(config.set_id);
  for (int i = 1; i <= config.subjects; ++i) {
    const auto csv = session_path(config, i);
    const auto sidecar = profile_path(config, i);
    if (!std::filesystem::exists(csv) || !std::filesystem::exists(sidecar)) {
      throw MissingData("no recorded session for subject " +
                        std::to_string(i) + " under '" + config.out_dir +
                        "'; generate sessions first");
    }
    const auto [profile, dt] = profile_from_json(read_file(sidecar));
    SubjectData data;
    data.session = session_from_csv(read_file(csv), profile, dt);
    data.features = extract_features(data.session, set);
    data.labels.reserve(data.session.rows.size());
    for (const SessionRow& row : data.session.rows) {
      data.labels.push_back(row.label);
    }
    subjects.push_back(std::move(data));
  }
  return subjects;
}

ScalerKind scaler_kind_for(ModelFamily family) {
  return family == ModelFamily::BiLstm ? ScalerKind::MinMaxSymmetric
                                       : ScalerKind::Standardize;
}

// Windows of one subject's session under a given model's scaling statistics.
// The split membership is scaler-independent (labels and window order do not
// change), so train/validation parts line up across models.
WindowedDataset subject_windows(const SubjectData& subject,
                                const Scaler& scaler, const RunConfig& config,
                                int subject_1based) {
  const FeatureMatrix scaled = apply_scaler(scaler, subject.features);
  return window_sequences(scaled, subject.labels, config.t_wi, config.t_wo,
                          config.stride, subject_1based);
}

std::pair<WindowedDataset, WindowedDataset> split_subject(
    const WindowedDataset& windows, const ProtocolConfig& pc, int subject_0based) {
  SplitSpec spec = pc.split;
  spec.seed = mix_seed(pc.split.seed, static_cast<std::uint64_t>(subject_0based));
  return stratified_split(windows, spec);
}

// One model to train: its checkpoint id, seed salt, and 0-based training
// subjects. Matches the salts of the in-memory protocol (individual model i
// uses salt i, pool of subjects 1..b uses salt 100+b).
struct ModelPlan {
  std::string id;
  std::uint64_t salt = 0;
  std::vector<int> pool;
};

ModelPlan individual_plan(int i) {
  return {"S" + std::to_string(i + 1), static_cast<std::uint64_t>(i), {i}};
}

ModelPlan pooled_plan(int b) {
  ModelPlan plan;
  plan.id = "C" + std::to_string(b);
  plan.salt = 100 + static_cast<std::uint64_t>(b);
  for (int i = 0; i < b; ++i) plan.pool.push_back(i);
  return plan;
}

std::vector<ModelPlan> plan_models(const RunConfig& config) {
  std::vector<ModelPlan> plans;
  if (config.mode == "individual" || config.mode == "all") {
    for (int i = 0; i < config.subjects; ++i) {
      plans.push_back(individual_plan(i));
    }
  }
  if (config.mode == "concatenated") {
    plans.push_back(pooled_plan(config.pool > 0 ? config.pool
                                                : config.subjects));
  } else if (config.mode == "all") {
    for (int b = 1; b <= config.subjects; ++b) {
      plans.push_back(pooled_plan(b));
    }
  }
  return plans;
}

TrainedFamily load_checkpoint(const RunConfig& config,
                              const std::string& model_id) {
  const auto path = checkpoint_path(config, model_id);
  if (!std::filesystem::exists(path)) {
    throw MissingCheckpoint("no checkpoint for model " + model_id +
                            " under '" + config.out_dir +
                            "'; train models first");
  }
  return checkpoint_from_json(read_file(path));
}

// The report CSV stores nine significant digits. Aggregates are computed
// from the values as stored so that reloading the CSV and re-aggregating
// reproduces them exactly.
double stored_precision(double x) {
  const std::string text = format_double(x);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

bool thresholds_hold(const std::vector<TwoAggregate>& aggs,
                     const AssertThresholds& th) {
  if (aggs.empty()) return false;
  const TwoAggregate& first = aggs.front();
  const TwoAggregate& last = aggs.back();
  if (th.t0_mean_min >= 0.0 && first.mean < th.t0_mean_min) return false;
  if (th.t_end_mean_min >= 0.0 && last.mean < th.t_end_mean_min) return false;
  if (th.t_end_gap_max >= 0.0 && first.mean - last.mean > th.t_end_gap_max) {
    return false;
  }
  if (th.step_increase_max >= 0.0) {
    for (std::size_t k = 1; k < aggs.size(); ++k) {
      if (aggs[k].mean - aggs[k - 1].mean > th.step_increase_max) return false;
    }
  }
  return true;
}

}  // namespace

std::filesystem::path track_path(const RunConfig& config) {
  return out_file(config, "track.json");
}
std::filesystem::path session_path(const RunConfig& config, int subject) {
  return out_file(config, "subject_" + std::to_string(subject) + ".csv");
}
std::filesystem::path profile_path(const RunConfig& config, int subject) {
  return out_file(config, "subject_" + std::to_string(subject) + ".json");
}
std::filesystem::path manifest_path(const RunConfig& config) {
  return out_file(config, "manifest.json");
}
std::filesystem::path checkpoint_path(const RunConfig& config,
                                      const std::string& model_id) {
  return out_file(config, "checkpoint_" + model_id + ".json");
}
std::filesystem::path history_path(const RunConfig& config,
                                   const std::string& model_id) {
  return out_file(config, "history_" + model_id + ".csv");
}
std::filesystem::path report_path(const RunConfig& config, int test_id) {
  return out_file(config, "report_test" + std::to_string(test_id) + ".csv");
}
std::filesystem::path aggregates_path(const RunConfig& config, int test_id) {
  return out_file(config, "aggregates_test" + std::to_string(test_id) + ".json");
}
std::filesystem::path stats_path(const RunConfig& config, int test_id) {
  return out_file(config, "stats_test" + std::to_string(test_id) + ".csv");
}

void cmd_gen(const RunConfig& config) {
  validate_config(config);
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + config.out_dir +
                  "': " + ec.message());
  }

  std::map<std::string, std::string> manifest;
  const auto put = [&](const std::filesystem::path& path,
                       const std::string& contents) {
    write_file_atomic(path, contents);
    manifest[path.filename().string()] = digest_hex(fnv1a(contents));
  };

  TrackGenSpec spec;
  spec.n_turns = config.track_turns;
  const TrackMap track = generate_track(spec, mix_seed(config.seed, 0));
  put(track_path(config), track_to_json(track.segments()));

  Rng profile_rng(mix_seed(config.seed, 1));
  for (int i = 1; i <= config.subjects; ++i) {
    DriverProfile profile = sample_profile(
        i, mix_seed(config.seed, 10 + static_cast<std::uint64_t>(i)),
        profile_rng);
    if (const auto it = config.subject_overrides.find(i);
        it != config.subject_overrides.end()) {
      apply_profile_overrides(profile, it->second);
    }
    validate_profile(profile);
    const Session session =
        simulate_session(track, profile, config.duration, config.dt);
    put(session_path(config, i), session_to_csv(session));
    put(profile_path(config, i), profile_to_json(profile, config.dt));
    std::cout << "generated subject " << i << ": " << session.rows.size()
              << " rows\n";
  }
  write_file_atomic(manifest_path(config), manifest_to_json(manifest));
}

void cmd_train(const RunConfig& config) {
  validate_config(config);
  const ModelFamily family = family_from_string(config.family);
  const ProtocolConfig pc = to_protocol_config(config);
  const std::vector<SubjectData> subjects = load_subjects(config);
  const std::vector<ModelPlan> plans = plan_models(config);

  // distinct models train fully independently: all seeds are pre-derived
  // from the plan salts and every plan writes its own files
  std::vector<std::string> summaries(plans.size());
  parallel_for_index(static_cast<int>(plans.size()), [&](int p) {
    const ModelPlan& plan = plans[static_cast<std::size_t>(p)];

    // scaling statistics learned from the plan's training subjects only
    FeatureMatrix pooled;
    pooled.set_id = subjects[static_cast<std::size_t>(plan.pool[0])].features.set_id;
    Eigen::Index total_rows = 0;
    for (const int i : plan.pool) {
      total_rows += subjects[static_cast<std::size_t>(i)].features.values.rows();
    }
    pooled.values.resize(total_rows, subjects[0].features.values.cols());
    Eigen::Index at = 0;
    for (const int i : plan.pool) {
      const auto& values = subjects[static_cast<std::size_t>(i)].features.values;
      pooled.values.middleRows(at, values.rows()) = values;
      at += values.rows();
    }
    const Scaler scaler = fit_scaler(pooled, scaler_kind_for(family));

    std::vector<WindowedDataset> train_parts;
    for (const int i : plan.pool) {
      const WindowedDataset windows = subject_windows(
          subjects[static_cast<std::size_t>(i)], scaler, config, i + 1);
      train_parts.push_back(split_subject(windows, pc, i).first);
    }
    const WindowedDataset train_set =
        train_parts.size() == 1 ? std::move(train_parts[0])
                                : merge_datasets(train_parts);

    TrainHistory history;
    TrainedFamily model =
        train_family(train_set, family, pc, plan.salt, &history);
    model.scaler = scaler;
    if (family == ModelFamily::BiLstm) model.seq.scaler = scaler;

    write_file_atomic(checkpoint_path(config, plan.id),
                      checkpoint_to_json(model));
    if (!history.train_loss.empty()) {
      std::string csv = "epoch,train_loss\n";
      for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        csv += std::to_string(e + 1);
        csv += ',';
        csv += format_double(history.train_loss[e]);
        csv += '\n';
      }
      write_file_atomic(history_path(config, plan.id), csv);
    }
    summaries[static_cast<std::size_t>(p)] = "trained " + plan.id + " on " +
                                             std::to_string(train_set.size()) +
                                             " windows";
  });
  for (const std::string& line : summaries) std::cout << line << "\n";
}

bool cmd_eval(const RunConfig& config, const AssertThresholds& thresholds) {
  validate_config(config);
  const ProtocolConfig pc = to_protocol_config(config);
  const std::vector<SubjectData> subjects = load_subjects(config);
  const int n = config.subjects;

  bool ok = true;
  for (const int test_id : config.tests) {
    // checkpoints for this test, in model order
    std::vector<std::string> ids;
    for (int m = 1; m <= n; ++m) {
      ids.push_back((test_id <= 2 ? "S" : "C") + std::to_string(m));
    }
    std::vector<TrainedFamily> models;
    models.reserve(ids.size());
    for (const std::string& id : ids) {
      models.push_back(load_checkpoint(config, id));
    }

    // independent (model, subject) evaluations; the report is assembled
    // afterwards in fixed task order so the merge is deterministic
    struct EvalTask {
      int model = 0;
      int subject_id = 0;  // 1-based; 0 = pooled validation
      bool known = true;
      std::vector<int> window_subjects;  // 0-based sources of val windows
    };
    std::vector<EvalTask> tasks;
    for (int m = 0; m < n; ++m) {
      if (test_id == 1) {
        tasks.push_back({m, m + 1, true, {m}});
      } else if (test_id == 2) {
        for (int j = 0; j < n; ++j) {
          if (j != m) tasks.push_back({m, j + 1, false, {j}});
        }
      } else if (test_id == 3) {
        std::vector<int> pool(static_cast<std::size_t>(m) + 1);
        std::iota(pool.begin(), pool.end(), 0);
        tasks.push_back({m, 0, true, std::move(pool)});
      } else {
        for (int j = 0; j < n; ++j) {
          tasks.push_back({m, j + 1, j <= m, {j}});
        }
      }
    }

    std::vector<std::vector<std::pair<int, F1Result>>> scores(tasks.size());
    parallel_for_index(static_cast<int>(tasks.size()), [&](int k) {
      const EvalTask& task = tasks[static_cast<std::size_t>(k)];
      const TrainedFamily& model =
          models[static_cast<std::size_t>(task.model)];
      // every evaluation subject is scaled with this model's statistics
      std::vector<WindowedDataset> parts;
      for (const int j : task.window_subjects) {
        const WindowedDataset windows = subject_windows(
            subjects[static_cast<std::size_t>(j)], model.scaler, config,
            j + 1);
        parts.push_back(split_subject(windows, pc, j).second);
      }
      const WindowedDataset val = parts.size() == 1 ? std::move(parts[0])
                                                    : merge_datasets(parts);
      scores[static_cast<std::size_t>(k)] = eval_family(model, val);
    });

    EvalReport report;
    report.test_id = test_id;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      append_cells(report, ids[static_cast<std::size_t>(tasks[k].model)],
                   tasks[k].subject_id, tasks[k].known, scores[k]);
    }

    for (EvalCell& cell : report.cells) cell.f1 = stored_precision(cell.f1);
    report.aggregates = aggregate_per_two(report);
    write_file_atomic(report_path(config, test_id), report_to_csv(report));
    write_file_atomic(aggregates_path(config, test_id),
                      aggregates_to_json(report));
    const bool pass = thresholds_hold(report.aggregates, thresholds);
    ok = ok && pass;
    std::cout << "test " << test_id << ": " << report.cells.size()
              << " cells, mean F1 " << format_double(report.aggregates.front().mean)
              << " at step " << report.aggregates.front().two << ", "
              << format_double(report.aggregates.back().mean) << " at step "
              << report.aggregates.back().two << "\n";
  }
  return ok;
}

void cmd_report(const RunConfig& config) {
  validate_config(config);
  for (const int test_id : config.tests) {
    const auto source = report_path(config, test_id);
    if (!std::filesystem::exists(source)) {
      throw MissingData("no report for test " + std::to_string(test_id) +
                        " under '" + config.out_dir + "'; evaluate first");
    }
    const EvalReport report = report_from_csv(read_file(source));
    std::string csv = "two,mean,stddev,lo,hi\n";
    for (const TwoAggregate& agg : report.aggregates) {
      csv += std::to_string(agg.two);
      csv += ',';
      csv += format_double(agg.mean);
      csv += ',';
      csv += format_double(agg.stddev);
      csv += ',';
      csv += format_double(agg.lo);
      csv += ',';
      csv += format_double(agg.hi);
      csv += '\n';
    }
    write_file_atomic(stats_path(config, test_id), csv);
  }
}

}  // namespace mf
