#include "mf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <utility>

#include "mf/errors.hpp"
#include "mf/nn.hpp"
#include "mf/parallel.hpp"
#include "mf/rng.hpp"

namespace mf {

namespace {

Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Eigen::ArrayXd shifted =
        logits.col(j).array() - logits.col(j).maxCoeff();
    const Eigen::ArrayXd e = shifted.exp();
    p.col(j) = (e / e.sum()).matrix();
  }
  return p;
}

void glorot_fill(Eigen::MatrixXd& m, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = rng.uniform(-limit, limit);
    }
  }
}

// Forward through all layers for a column batch; activations[l] is the
// output of layer l (activations[0] is the input).
Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& a0,
                            std::vector<Eigen::MatrixXd>* activations) {
  Eigen::MatrixXd a = a0;
  if (activations != nullptr) activations->assign(1, a);
  const std::size_t L = model.W.size();
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = model.W[l] * a;
    z.colwise() += Eigen::VectorXd(model.b[l]);
    a = l + 1 < L ? relu(z) : column_softmax(z);
    if (activations != nullptr) activations->push_back(a);
  }
  return a;
}

}  // namespace

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

MlpModel train_mlp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                   const MlpConfig& config) {
  if (X.rows() == 0) throw EmptyDataset("no training rows");
  if (Y.rows() != X.rows()) {
    throw ShapeMismatch("feature and target row counts differ");
  }
  if (config.epochs < 1 || config.batch_size < 1 || config.hidden.empty()) {
    throw InvalidSpec("epochs, batch_size and hidden sizes must be positive");
  }
  for (int h : config.hidden) {
    if (h < 1) throw InvalidSpec("hidden sizes must be positive");
  }

  const int d = static_cast<int>(X.cols());
  const int c = static_cast<int>(Y.cols());
  Rng rng(config.seed);

  MlpModel model;
  std::vector<int> sizes{d};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(c);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    glorot_fill(w, sizes[l], sizes[l + 1], rng);
    model.W.push_back(std::move(w));
    model.b.push_back(Eigen::MatrixXd::Zero(sizes[l + 1], 1));
  }

  std::vector<Eigen::MatrixXd*> params;
  for (std::size_t l = 0; l < model.W.size(); ++l) {
    params.push_back(&model.W[l]);
    params.push_back(&model.b[l]);
  }
  AdamState adam = make_adam_state(params, config.lr);

  const std::size_t n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<Eigen::MatrixXd> acts;
  ModelGrads grads(params.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const auto B = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xb(d, B);
      Eigen::MatrixXd yb(c, B);
      for (Eigen::Index j = 0; j < B; ++j) {
        xb.col(j) = X.row(static_cast<Eigen::Index>(order[start + j])).transpose();
        yb.col(j) = Y.row(static_cast<Eigen::Index>(order[start + j])).transpose();
      }

      const Eigen::MatrixXd probs = mlp_forward(model, xb, &acts);
      Eigen::MatrixXd delta = (probs - yb) / static_cast<double>(B);
      for (std::size_t l = model.W.size(); l-- > 0;) {
        grads[2 * l] = delta * acts[l].transpose();
        grads[2 * l + 1] = delta.rowwise().sum();
        if (l > 0) {
          delta = (model.W[l].transpose() * delta).array() *
                  (acts[l].array() > 0.0).cast<double>();
        }
      }
      adam_step(params, grads, adam);
    }
  }
  return model;
}

Eigen::VectorXd predict_mlp(const MlpModel& model, const Eigen::VectorXd& row) {
  if (row.size() != model.input()) {
    throw ShapeMismatch("row width does not match model input");
  }
  return mlp_forward(model, row, nullptr).col(0);
}

Eigen::MatrixXd predict_mlp_batch(const MlpModel& model,
                                  const Eigen::MatrixXd& X) {
  if (X.cols() != model.input()) {
    throw ShapeMismatch("feature width does not match model input");
  }
  return mlp_forward(model, X.transpose(), nullptr).transpose();
}

namespace {

double gini(const Eigen::VectorXd& counts) {
  const double n = counts.sum();
  if (n <= 0.0) return 0.0;
  return 1.0 - (counts.array() / n).square().sum();
}

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  std::span<const int> y;
  int n_classes;
  int min_leaf;
  Rng rng;
  DecisionTree tree;

  Eigen::VectorXd class_counts(const std::vector<int>& idx) const {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_classes);
    for (int i : idx) counts[y[static_cast<std::size_t>(i)]] += 1.0;
    return counts;
  }

  int make_leaf(const Eigen::VectorXd& counts) {
    TreeNode node;
    node.dist = counts / counts.sum();
    tree.nodes.push_back(std::move(node));
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  int build(const std::vector<int>& idx) {
    const Eigen::VectorXd counts = class_counts(idx);
    const int n = static_cast<int>(idx.size());
    const double parent_gini = gini(counts);
    if (n < 2 * min_leaf || parent_gini == 0.0) return make_leaf(counts);

    const int d = static_cast<int>(X.cols());
    const int K = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
    std::vector<int> features(static_cast<std::size_t>(d));
    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < K; ++k) {
      const auto j = static_cast<std::size_t>(k) +
                     rng.uniform_int(static_cast<std::uint64_t>(d - k));
      std::swap(features[static_cast<std::size_t>(k)], features[j]);
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = -1.0;
    std::vector<int> best_left, best_right, left, right;
    for (int k = 0; k < K; ++k) {
      const int f = features[static_cast<std::size_t>(k)];
      double lo = X(idx[0], f), hi = lo;
      for (int i : idx) {
        lo = std::min(lo, X(i, f));
        hi = std::max(hi, X(i, f));
      }
      if (hi <= lo) continue;
      const double threshold = rng.uniform(lo, hi);
      left.clear();
      right.clear();
      for (int i : idx) {
        (X(i, f) <= threshold ? left : right).push_back(i);
      }
      if (static_cast<int>(left.size()) < min_leaf ||
          static_cast<int>(right.size()) < min_leaf) {
        continue;
      }
      const double nl = static_cast<double>(left.size());
      const double nr = static_cast<double>(right.size());
      const double score = parent_gini -
                           (nl * gini(class_counts(left)) +
                            nr * gini(class_counts(right))) /
                               static_cast<double>(n);
      if (score > best_score) {
        best_score = score;
        best_feature = f;
        best_threshold = threshold;
        best_left = left;
        best_right = right;
      }
    }
    if (best_feature < 0) return make_leaf(counts);

    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(self)].feature = best_feature;
    tree.nodes[static_cast<std::size_t>(self)].threshold = best_threshold;
    const int left_id = build(best_left);
    const int right_id = build(best_right);
    tree.nodes[static_cast<std::size_t>(self)].left = left_id;
    tree.nodes[static_cast<std::size_t>(self)].right = right_id;
    return self;
  }
};

const TreeNode& find_leaf(const DecisionTree& tree, const Eigen::VectorXd& row) {
  int node = 0;
  while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
    node = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return tree.nodes[static_cast<std::size_t>(node)];
}

}  // namespace

ExtraTreesModel train_extra_trees(const Eigen::MatrixXd& X,
                                  std::span<const int> y, int n_classes,
                                  const ExtraTreesConfig& config) {
  if (config.n_estimators < 1 || config.min_samples_leaf < 1 || n_classes < 1) {
    throw InvalidSpec("tree counts, leaf sizes and classes must be positive");
  }
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw ShapeMismatch("feature and label counts differ");
  }
  if (X.rows() < 2 * config.min_samples_leaf) {
    throw TooFewSamples("need at least 2*min_samples_leaf rows");
  }
  for (int label : y) {
    if (label < 0 || label >= n_classes) {
      throw InvalidSpec("label outside [0, n_classes)");
    }
  }

  ExtraTreesModel model;
  model.n_features = static_cast<int>(X.cols());
  model.n_classes = n_classes;
  Rng master(config.seed);
  std::vector<int> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), 0);
  // Per-tree seeds are drawn up front so the forest is identical no matter
  // how many workers build it.
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(config.n_estimators));
  for (std::uint64_t& seed : seeds) seed = master.fork_seed();
  model.trees.resize(seeds.size());
  parallel_for_index(config.n_estimators, [&](int t) {
    TreeBuilder builder{X, y, n_classes, config.min_samples_leaf,
                        Rng(seeds[static_cast<std::size_t>(t)]), {}};
    builder.build(all);
    model.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
  });
  return model;
}

Eigen::VectorXd predict_trees(const ExtraTreesModel& model,
                              const Eigen::VectorXd& row) {
  if (row.size() != model.n_features) {
    throw ShapeMismatch("row width does not match model features");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(model.n_classes);
  for (const DecisionTree& tree : model.trees) {
    acc += find_leaf(tree, row).dist;
  }
  return acc / static_cast<double>(model.trees.size());
}

Eigen::MatrixXd predict_trees_batch(const ExtraTreesModel& model,
                                    const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), model.n_classes);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.row(i) = predict_trees(model, X.row(i).transpose()).transpose();
  }
  return out;
}

std::vector<int> relabel_pre(std::span<const Manoeuvre> labels, int n_pre) {
  if (n_pre < 1) throw InvalidSpec("n_pre must be positive");
  const auto n = static_cast<std::ptrdiff_t>(labels.size());
  std::vector<int> ext(labels.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    ext[static_cast<std::size_t>(i)] = index_of(labels[static_cast<std::size_t>(i)]);
  }
  bool any = false;
  for (std::ptrdiff_t t = 1; t < n; ++t) {
    const Manoeuvre prev = labels[static_cast<std::size_t>(t - 1)];
    const Manoeuvre cur = labels[static_cast<std::size_t>(t)];
    if (prev != Manoeuvre::Straight || cur == Manoeuvre::Straight) continue;
    any = true;
    const int pre = cur == Manoeuvre::Left ? kPreLeft : kPreRight;
    for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, t - n_pre); i < t; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      // only Straight rows may be claimed; an earlier transition is nearer
      if (labels[k] == Manoeuvre::Straight &&
          ext[k] == index_of(Manoeuvre::Straight)) {
        ext[k] = pre;
      }
    }
  }
  if (!any) throw NoTransitions("no Straight -> turn transition in series");
  return ext;
}

int merge_to_base(int ext_class) {
  if (ext_class == kPreLeft) return index_of(Manoeuvre::Left);
  if (ext_class == kPreRight) return index_of(Manoeuvre::Right);
  return ext_class;
}

std::pair<Eigen::MatrixXd, std::vector<int>> balance_to_median(
    const Eigen::MatrixXd& X, std::span<const int> y, int n_classes) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw LengthMismatch("row and label counts differ");
  }
  if (n_classes < 1) throw InvalidSpec("class count must be positive");
  std::vector<std::vector<Eigen::Index>> by_class(
      static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= n_classes) {
      throw InvalidSpec("label outside [0, n_classes)");
    }
    by_class[static_cast<std::size_t>(y[i])].push_back(
        static_cast<Eigen::Index>(i));
  }
  std::vector<std::size_t> counts;
  for (const auto& members : by_class) {
    if (!members.empty()) counts.push_back(members.size());
  }
  if (counts.empty()) throw EmptyDataset("no rows to balance");
  std::sort(counts.begin(), counts.end());
  const std::size_t mid = counts.size() / 2;
  const std::size_t target =
      counts.size() % 2 == 1
          ? counts[mid]
          : (counts[mid - 1] + counts[mid] + 1) / 2;

  std::vector<Eigen::Index> chosen;
  std::vector<int> chosen_label;
  for (int c = 0; c < n_classes; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) continue;
    for (std::size_t k = 0; k < target; ++k) {
      const std::size_t pick = members.size() >= target
                                   ? k * members.size() / target
                                   : k % members.size();
      chosen.push_back(members[pick]);
      chosen_label.push_back(c);
    }
  }

  Eigen::MatrixXd out(static_cast<Eigen::Index>(chosen.size()), X.cols());
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = X.row(chosen[k]);
  }
  return {std::move(out), std::move(chosen_label)};
}

ShallowPredictionDataset resample_relabel(const Eigen::MatrixXd& rows,
                                          std::span<const Manoeuvre> labels,
                                          int n_pre) {
  if (static_cast<std::size_t>(rows.rows()) != labels.size()) {
    throw LengthMismatch("row and label counts differ");
  }
  const std::vector<int> ext = relabel_pre(labels, n_pre);

  const Eigen::Index d = rows.cols();
  Eigen::MatrixXd augmented(rows.rows(), d + kNumManoeuvres);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    augmented.row(i).head(d) = rows.row(i);
    augmented.row(i).tail(kNumManoeuvres).setZero();
    augmented(i, d + index_of(labels[static_cast<std::size_t>(i)])) = 1.0;
  }

  ShallowPredictionDataset out;
  out.n_pre = n_pre;
  std::tie(out.X, out.y) =
      balance_to_median(augmented, ext, kNumShallowClasses);
  return out;
}

}  // namespace mf
