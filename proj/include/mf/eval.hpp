#ifndef MF_EVAL_HPP
#define MF_EVAL_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mf/baselines.hpp"
#include "mf/features.hpp"
#include "mf/nn.hpp"

namespace mf {

// ---------------------------------------------------------------------------
// Splitting and scoring

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

// Per-class shuffled partition, stratified by the manoeuvre at each window's
// current-time step (the first output row). Per-class train counts land
// within half a sample of the fraction. Throws ClassTooSmall when a class
// present in the dataset has fewer than 2 windows.
std::pair<WindowedDataset, WindowedDataset> stratified_split(
    const WindowedDataset& dataset, const SplitSpec& spec);

struct F1Result {
  std::array<double, kNumManoeuvres> per_class{};
  double macro = 0.0;
};

// Precision/recall F1 per class over integer labels in [0, 3); F1 = 0 for a
// class with no true or predicted members. Macro is the unweighted mean.
F1Result f1_scores(std::span<const int> predicted, std::span<const int> truth);

// Per-class F1 at every prediction step: row j scores the argmax prediction
// j steps ahead of the window end. Returns t_wo x 3.
Eigen::MatrixXd evaluate_sequence_model(const SequenceModel& model,
                                        const WindowedDataset& dataset);

// ---------------------------------------------------------------------------
// Four-test protocol

enum class ModelFamily { BiLstm, Mlp, ExtraTrees };

struct ProtocolConfig {
  int hidden = 32;
  double dropout = 0.2;
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 1;  // base seed; per-model seeds derive from it
  SplitSpec split;
  int n_pre = 30;  // pre-manoeuvre horizon for shallow prediction
  MlpConfig mlp;
  ExtraTreesConfig trees;
};

struct EvalCell {
  std::string model_id;  // "S<i>" individual, "C<b>" concatenated pool 1..b
  int subject_id = 0;    // 1-based; 0 marks a pooled validation set
  int two = 0;
  int manoeuvre = 0;
  double f1 = 0.0;
  bool known = true;  // subject contributed to the model's training pool
};

struct TwoAggregate {
  int two = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population std over per-(model,subject) means
  double lo = 0.0;
  double hi = 0.0;
};

struct EvalReport {
  int test_id = 0;
  std::vector<EvalCell> cells;
  std::vector<TwoAggregate> aggregates;
};

// Mean/std/min/max of the per-(model, subject) macro means at each
// prediction step. Throws EmptyReport when there are no cells.
std::vector<TwoAggregate> aggregate_per_two(const EvalReport& report);

// Deterministic seed derivation (splitmix64): every model and split draws an
// independent stream keyed off one base seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

// One trained model under a family: the sequence classifier, or a pair of
// shallow models covering identification (step 0) and pre-manoeuvre
// prediction (step t_wo-1). Carries the scaling statistics fitted on its
// training pool so evaluation data can be scaled identically.
struct TrainedFamily {
  ModelFamily family = ModelFamily::BiLstm;
  SequenceModel seq;                     // BiLstm
  MlpModel mlp_id, mlp_pred;             // Mlp
  ExtraTreesModel trees_id, trees_pred;  // ExtraTrees
  Scaler scaler;
  FeatureSet set_id = FeatureSet::Set4;
  int t_wi = 30;
  int t_wo = 30;
  int n_pre = 30;
  std::uint64_t training_seed = 0;
};

// Trains one model of the family on the given training windows. The salt
// keys this model's seed streams off config.seed: the protocol uses salt i
// for individual model S_{i+1} and salt 100+b for the pool of subjects 1..b.
// For the sequence family the per-epoch loss history lands in *history when
// given; shallow families leave it empty.
TrainedFamily train_family(const WindowedDataset& train_set, ModelFamily family,
                           const ProtocolConfig& config, std::uint64_t salt,
                           TrainHistory* history = nullptr);

// Per-step macro/per-class scores on a validation set: every step for the
// sequence family, steps {0, t_wo-1} for shallow families (pre-manoeuvre
// classes merged onto their eventual turn before scoring).
std::vector<std::pair<int, F1Result>> eval_family(const TrainedFamily& model,
                                                  const WindowedDataset& val);

// Expands per-step scores into per-manoeuvre report cells.
void append_cells(EvalReport& report, const std::string& model_id,
                  int subject_id, bool known,
                  std::span<const std::pair<int, F1Result>> scores);

// The four-test methodology. Subjects are per-subject windowed datasets
// (already scaled). Test 1: each individual model on its own validation
// split. Test 2: each individual model on every other subject's validation
// split. Test 3: concatenated models C_b (pooling subjects 1..b) on their
// own pooled validation splits. Test 4: every C_b against every subject's
// validation split, subjects beyond b flagged unknown. Deep models score
// every step 0..t_wo-1; shallow families score identification (step 0) and
// the pre-manoeuvre prediction horizon (step t_wo-1).
EvalReport run_test_protocol(int test_id,
                             std::span<const WindowedDataset> subjects,
                             ModelFamily family, const ProtocolConfig& config);

}  // namespace mf

#endif  // MF_EVAL_HPP
