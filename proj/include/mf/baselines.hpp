#ifndef MF_BASELINES_HPP
#define MF_BASELINES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "mf/track.hpp"

namespace mf {

// ---------------------------------------------------------------------------
// Multi-layer perceptron: rectified-linear hidden layers, softmax output,
// trained with mini-batch Adam on cross-entropy.

struct MlpConfig {
  std::vector<int> hidden{64, 64};
  int epochs = 200;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

struct MlpModel {
  std::vector<Eigen::MatrixXd> W;  // per layer, out x in
  std::vector<Eigen::MatrixXd> b;  // per layer, out x 1

  int input() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
  int classes() const { return W.empty() ? 0 : static_cast<int>(W.back().rows()); }
};

Eigen::MatrixXd relu(const Eigen::MatrixXd& z);

// X is rows x d, Y is rows x classes one-hot. Deterministic in config.seed.
MlpModel train_mlp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                   const MlpConfig& config);

// Class probabilities; rows of the batch form sum to 1.
Eigen::VectorXd predict_mlp(const MlpModel& model, const Eigen::VectorXd& row);
Eigen::MatrixXd predict_mlp_batch(const MlpModel& model,
                                  const Eigen::MatrixXd& X);

// ---------------------------------------------------------------------------
// Extremely randomized trees: each tree fits the full training set; at every
// node K = ceil(sqrt(d)) random features get one uniform random threshold
// each between the node's min and max, and the best split by Gini reduction
// wins. Leaves keep >= min_samples_leaf samples and store the class counts.

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Eigen::VectorXd dist;  // leaf class distribution
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // node 0 is the root
};

struct ExtraTreesConfig {
  int n_estimators = 10;
  int min_samples_leaf = 2;
  std::uint64_t seed = 1;
};

struct ExtraTreesModel {
  std::vector<DecisionTree> trees;
  int n_features = 0;
  int n_classes = 0;
};

// y holds class ids in [0, n_classes). Deterministic in config.seed.
ExtraTreesModel train_extra_trees(const Eigen::MatrixXd& X,
                                  std::span<const int> y, int n_classes,
                                  const ExtraTreesConfig& config);

// Mean of per-tree leaf distributions (vote fractions; sums to 1).
Eigen::VectorXd predict_trees(const ExtraTreesModel& model,
                              const Eigen::VectorXd& row);
Eigen::MatrixXd predict_trees_batch(const ExtraTreesModel& model,
                                    const Eigen::MatrixXd& X);

// ---------------------------------------------------------------------------
// Pre-manoeuvre relabelling: shallow models predict upcoming turns through
// extra classes on the samples just before a Straight -> turn transition.

inline constexpr int kPreLeft = 3;
inline constexpr int kPreRight = 4;
inline constexpr int kNumShallowClasses = 5;

// Extended per-row class ids: base manoeuvres keep their index; the n_pre
// Straight rows immediately before each Straight -> turn transition become
// pre-Left / pre-Right (the nearest upcoming transition wins on overlap).
// Throws NoTransitions when the series has no Straight -> turn transition.
std::vector<int> relabel_pre(std::span<const Manoeuvre> labels, int n_pre);

// Scoring collapses pre classes onto their eventual turn class.
int merge_to_base(int ext_class);

struct ShallowPredictionDataset {
  Eigen::MatrixXd X;   // rows x (d + 3): features + current-manoeuvre one-hot
  std::vector<int> y;  // extended class ids
  int n_pre = 30;
};

// Deterministically balances every present class to the median class count:
// larger classes are under-sampled by even stride, smaller ones over-sampled
// by cyclic duplication. Row/label pairing is preserved.
std::pair<Eigen::MatrixXd, std::vector<int>> balance_to_median(
    const Eigen::MatrixXd& X, std::span<const int> y, int n_classes);

// Relabels, appends the current manoeuvre one-hot to every row, then
// balances every class to the median class count (under-sampling by even
// stride, over-sampling by cyclic duplication; both deterministic).
ShallowPredictionDataset resample_relabel(const Eigen::MatrixXd& rows,
                                          std::span<const Manoeuvre> labels,
                                          int n_pre);

}  // namespace mf

#endif  // MF_BASELINES_HPP
