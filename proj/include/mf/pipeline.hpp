#ifndef MF_PIPELINE_HPP
#define MF_PIPELINE_HPP

#include <filesystem>
#include <string>

#include "mf/config.hpp"

namespace mf {

// Artifact locations under config.out_dir; subjects are 1-based.
std::filesystem::path track_path(const RunConfig& config);
std::filesystem::path session_path(const RunConfig& config, int subject);
std::filesystem::path profile_path(const RunConfig& config, int subject);
std::filesystem::path manifest_path(const RunConfig& config);
std::filesystem::path checkpoint_path(const RunConfig& config,
                                      const std::string& model_id);
std::filesystem::path history_path(const RunConfig& config,
                                   const std::string& model_id);
std::filesystem::path report_path(const RunConfig& config, int test_id);
std::filesystem::path aggregates_path(const RunConfig& config, int test_id);
std::filesystem::path stats_path(const RunConfig& config, int test_id);

// Generates the track, per-subject profiles and sessions, plus a manifest of
// output digests. Deterministic in config seeds.
void cmd_gen(const RunConfig& config);

// Loads sessions and trains the planned models: per-model scaling statistics
// fitted on the model's own training subjects, windowing, the per-subject
// stratified split, then training on the pooled train parts. Writes one
// checkpoint per model id and a per-epoch loss history for sequence models.
void cmd_train(const RunConfig& config);

// Aggregate thresholds applied to every report cmd_eval writes; negative
// values disable a threshold.
struct AssertThresholds {
  double t0_mean_min = -1.0;        // mean F1 at the first prediction step
  double t_end_mean_min = -1.0;     // mean F1 at the last prediction step
  double t_end_gap_max = -1.0;      // first-step mean minus last-step mean
  double step_increase_max = -1.0;  // max rise between consecutive steps
};

// Evaluates the requested tests from stored checkpoints on each subject's
// validation split, writes report CSVs and aggregate JSONs, and returns
// false when any enabled threshold fails on any written report.
bool cmd_eval(const RunConfig& config, const AssertThresholds& thresholds = {});

// Renders per-step statistics tables (two, mean, stddev, lo, hi) from the
// stored report CSVs.
void cmd_report(const RunConfig& config);

}  // namespace mf

#endif  // MF_PIPELINE_HPP
