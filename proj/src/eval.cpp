#include "mf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

#include "mf/errors.hpp"
#include "mf/rng.hpp"

namespace mf {

// splitmix64 mixing so every model/split draws an independent seed from the
// config's base seed
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

int argmax_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  Eigen::Index c;
  m.row(row).maxCoeff(&c);
  return static_cast<int>(c);
}

// Per-row shallow views of a windowed dataset: the feature vector at the
// window's current time, the identification label, the extended class with
// pre-manoeuvre relabelling read off the window's own future block, and the
// label at the far end of the prediction horizon.
struct ShallowRows {
  Eigen::MatrixXd id_X;         // n x d
  std::vector<int> id_y;        // current manoeuvre
  Eigen::MatrixXd pred_X;       // n x (d+3), current manoeuvre appended
  std::vector<int> ext_y;       // extended classes incl. pre-L/pre-R
  std::vector<int> horizon_y;   // manoeuvre at step t_wo-1
};

ShallowRows shallow_rows(const WindowedDataset& ds, int n_pre) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  const Eigen::Index d = ds.X[0].cols();
  ShallowRows rows;
  rows.id_X.resize(n, d);
  rows.pred_X.resize(n, d + kNumManoeuvres);
  rows.id_y.reserve(static_cast<std::size_t>(n));
  rows.ext_y.reserve(static_cast<std::size_t>(n));
  rows.horizon_y.reserve(static_cast<std::size_t>(n));
  const int horizon = std::min(n_pre, ds.t_wo - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = ds.X[static_cast<std::size_t>(i)];
    const auto& y = ds.Y[static_cast<std::size_t>(i)];
    rows.id_X.row(i) = x.row(ds.t_wi - 1);
    const int current = argmax_row(y, 0);
    rows.id_y.push_back(current);

    int ext = current;
    if (current == index_of(Manoeuvre::Straight)) {
      for (int j = 1; j <= horizon; ++j) {
        const int future = argmax_row(y, j);
        if (future != index_of(Manoeuvre::Straight)) {
          ext = future == index_of(Manoeuvre::Left) ? kPreLeft : kPreRight;
          break;
        }
      }
    }
    rows.ext_y.push_back(ext);
    rows.horizon_y.push_back(argmax_row(y, ds.t_wo - 1));

    rows.pred_X.row(i).head(d) = x.row(ds.t_wi - 1);
    rows.pred_X.row(i).tail(kNumManoeuvres).setZero();
    rows.pred_X(i, d + current) = 1.0;
  }
  return rows;
}

Eigen::MatrixXd one_hot_rows(std::span<const int> y, int n_classes) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()),
                                            n_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    Y(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  }
  return Y;
}

std::vector<int> argmax_labels(const Eigen::MatrixXd& probs) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    out.push_back(argmax_row(probs, i));
  }
  return out;
}

}  // namespace

TrainedFamily train_family(const WindowedDataset& train_set, ModelFamily family,
                           const ProtocolConfig& config, std::uint64_t salt,
                           TrainHistory* history) {
  TrainedFamily out;
  out.family = family;
  out.set_id = train_set.set_id;
  out.t_wi = train_set.t_wi;
  out.t_wo = train_set.t_wo;
  out.n_pre = config.n_pre;
  if (history) *history = TrainHistory{};
  if (family == ModelFamily::BiLstm) {
    Rng init(mix_seed(config.seed, salt * 8 + 1));
    out.seq = init_model(config.hidden, train_set.set_id, train_set.t_wi,
                         train_set.t_wo, config.dropout, init);
    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.lr = config.lr;
    tc.seed = mix_seed(config.seed, salt * 8 + 2);
    const TrainHistory h = train(out.seq, train_set, nullptr, tc);
    if (history) *history = h;
    out.training_seed = tc.seed;
    return out;
  }

  const ShallowRows rows = shallow_rows(train_set, config.n_pre);
  auto [bal_X, bal_y] =
      balance_to_median(rows.pred_X, rows.ext_y, kNumShallowClasses);
  if (family == ModelFamily::Mlp) {
    MlpConfig id_cfg = config.mlp;
    id_cfg.seed = mix_seed(config.seed, salt * 8 + 3);
    out.mlp_id = train_mlp(rows.id_X, one_hot_rows(rows.id_y, kNumManoeuvres),
                           id_cfg);
    MlpConfig pred_cfg = config.mlp;
    pred_cfg.seed = mix_seed(config.seed, salt * 8 + 4);
    out.mlp_pred =
        train_mlp(bal_X, one_hot_rows(bal_y, kNumShallowClasses), pred_cfg);
    out.training_seed = id_cfg.seed;
  } else {
    ExtraTreesConfig id_cfg = config.trees;
    id_cfg.seed = mix_seed(config.seed, salt * 8 + 5);
    out.trees_id = train_extra_trees(rows.id_X, rows.id_y, kNumManoeuvres,
                                     id_cfg);
    ExtraTreesConfig pred_cfg = config.trees;
    pred_cfg.seed = mix_seed(config.seed, salt * 8 + 6);
    out.trees_pred =
        train_extra_trees(bal_X, bal_y, kNumShallowClasses, pred_cfg);
    out.training_seed = id_cfg.seed;
  }
  return out;
}

std::vector<std::pair<int, F1Result>> eval_family(const TrainedFamily& model,
                                                  const WindowedDataset& val) {
  std::vector<std::pair<int, F1Result>> scores;
  if (model.family == ModelFamily::BiLstm) {
    const Eigen::MatrixXd f1 = evaluate_sequence_model(model.seq, val);
    for (int j = 0; j < val.t_wo; ++j) {
      F1Result r;
      for (int c = 0; c < kNumManoeuvres; ++c) {
        r.per_class[static_cast<std::size_t>(c)] = f1(j, c);
      }
      r.macro = f1.row(j).mean();
      scores.emplace_back(j, r);
    }
    return scores;
  }

  const ShallowRows rows = shallow_rows(val, model.n_pre);
  const Eigen::MatrixXd id_probs =
      model.family == ModelFamily::Mlp
          ? predict_mlp_batch(model.mlp_id, rows.id_X)
          : predict_trees_batch(model.trees_id, rows.id_X);
  scores.emplace_back(0, f1_scores(argmax_labels(id_probs), rows.id_y));

  const Eigen::MatrixXd pred_probs =
      model.family == ModelFamily::Mlp
          ? predict_mlp_batch(model.mlp_pred, rows.pred_X)
          : predict_trees_batch(model.trees_pred, rows.pred_X);
  std::vector<int> merged = argmax_labels(pred_probs);
  for (int& label : merged) label = merge_to_base(label);
  scores.emplace_back(val.t_wo - 1, f1_scores(merged, rows.horizon_y));
  return scores;
}

void append_cells(EvalReport& report, const std::string& model_id,
                  int subject_id, bool known,
                  std::span<const std::pair<int, F1Result>> scores) {
  for (const auto& [two, f1] : scores) {
    for (int c = 0; c < kNumManoeuvres; ++c) {
      EvalCell cell;
      cell.model_id = model_id;
      cell.subject_id = subject_id;
      cell.two = two;
      cell.manoeuvre = c;
      cell.f1 = f1.per_class[static_cast<std::size_t>(c)];
      cell.known = known;
      report.cells.push_back(std::move(cell));
    }
  }
}

std::pair<WindowedDataset, WindowedDataset> stratified_split(
    const WindowedDataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw InvalidSpec("train fraction must lie strictly inside (0, 1)");
  }
  if (dataset.size() == 0) throw EmptyDataset("nothing to split");

  std::vector<std::vector<std::size_t>> by_class(kNumManoeuvres);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(argmax_row(dataset.Y[i], 0))].push_back(i);
  }
  for (const auto& members : by_class) {
    if (members.size() == 1) {
      throw ClassTooSmall("a stratum holds a single window");
    }
  }

  Rng rng(spec.seed);
  WindowedDataset train, val;
  for (WindowedDataset* part : {&train, &val}) {
    part->t_wi = dataset.t_wi;
    part->t_wo = dataset.t_wo;
    part->stride = dataset.stride;
    part->set_id = dataset.set_id;
  }
  for (auto& members : by_class) {
    if (members.empty()) continue;
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.uniform_int(i)]);
    }
    const auto n = members.size();
    auto n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    for (std::size_t k = 0; k < n; ++k) {
      WindowedDataset& part = k < n_train ? train : val;
      part.X.push_back(dataset.X[members[k]]);
      part.Y.push_back(dataset.Y[members[k]]);
      part.subject_ids.push_back(dataset.subject_ids[members[k]]);
    }
  }
  return {std::move(train), std::move(val)};
}

F1Result f1_scores(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw LengthMismatch("prediction and truth lengths differ");
  }
  if (predicted.empty()) throw EmptyInput("no labels to score");

  double tp[kNumManoeuvres] = {}, fp[kNumManoeuvres] = {},
         fn[kNumManoeuvres] = {};
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || p >= kNumManoeuvres || t < 0 || t >= kNumManoeuvres) {
      throw InvalidSpec("label outside the manoeuvre set");
    }
    if (p == t) {
      tp[p] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  F1Result result;
  for (int c = 0; c < kNumManoeuvres; ++c) {
    const double prec_den = tp[c] + fp[c];
    const double rec_den = tp[c] + fn[c];
    const double precision = prec_den > 0.0 ? tp[c] / prec_den : 0.0;
    const double recall = rec_den > 0.0 ? tp[c] / rec_den : 0.0;
    const double pr = precision + recall;
    result.per_class[static_cast<std::size_t>(c)] =
        pr > 0.0 ? 2.0 * precision * recall / pr : 0.0;
    result.macro += result.per_class[static_cast<std::size_t>(c)];
  }
  result.macro /= static_cast<double>(kNumManoeuvres);
  return result;
}

Eigen::MatrixXd evaluate_sequence_model(const SequenceModel& model,
                                        const WindowedDataset& dataset) {
  if (dataset.size() == 0) throw EmptyDataset("nothing to evaluate");
  if (dataset.t_wi != model.t_wi || dataset.t_wo != model.t_wo ||
      dataset.X[0].cols() != model.input()) {
    throw ShapeMismatch("dataset window shape does not match model");
  }
  const auto probs = predict_probs(model, dataset.X);
  const auto n = dataset.size();
  Eigen::MatrixXd f1(dataset.t_wo, kNumManoeuvres);
  std::vector<int> pred(n), truth(n);
  for (int j = 0; j < dataset.t_wo; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = argmax_row(probs[i], j);
      truth[i] = argmax_row(dataset.Y[i], j);
    }
    const F1Result r = f1_scores(pred, truth);
    for (int c = 0; c < kNumManoeuvres; ++c) {
      f1(j, c) = r.per_class[static_cast<std::size_t>(c)];
    }
  }
  return f1;
}

std::vector<TwoAggregate> aggregate_per_two(const EvalReport& report) {
  if (report.cells.empty()) throw EmptyReport("report holds no cells");
  // two -> (model, subject) -> per-manoeuvre scores
  std::map<int, std::map<std::pair<std::string, int>, std::vector<double>>>
      grouped;
  for (const EvalCell& cell : report.cells) {
    grouped[cell.two][{cell.model_id, cell.subject_id}].push_back(cell.f1);
  }
  std::vector<TwoAggregate> out;
  for (const auto& [two, groups] : grouped) {
    std::vector<double> means;
    means.reserve(groups.size());
    for (const auto& [key, scores] : groups) {
      means.push_back(std::accumulate(scores.begin(), scores.end(), 0.0) /
                      static_cast<double>(scores.size()));
    }
    TwoAggregate agg;
    agg.two = two;
    agg.mean = std::accumulate(means.begin(), means.end(), 0.0) /
               static_cast<double>(means.size());
    double var = 0.0;
    for (double m : means) var += (m - agg.mean) * (m - agg.mean);
    agg.stddev = std::sqrt(var / static_cast<double>(means.size()));
    agg.lo = *std::min_element(means.begin(), means.end());
    agg.hi = *std::max_element(means.begin(), means.end());
    out.push_back(agg);
  }
  return out;
}

EvalReport run_test_protocol(int test_id,
                             std::span<const WindowedDataset> subjects,
                             ModelFamily family, const ProtocolConfig& config) {
  if (test_id < 1 || test_id > 4) throw InvalidSpec("test_id must be 1..4");
  const auto N = subjects.size();
  if (N < 2) throw InsufficientSubjects("the protocol needs >= 2 subjects");
  for (const WindowedDataset& s : subjects) {
    if (s.t_wi != subjects[0].t_wi || s.t_wo != subjects[0].t_wo ||
        s.set_id != subjects[0].set_id) {
      throw ShapeMismatch("subjects disagree on window shape");
    }
  }

  std::vector<WindowedDataset> train_split(N), val_split(N);
  for (std::size_t i = 0; i < N; ++i) {
    SplitSpec spec = config.split;
    spec.seed = mix_seed(config.split.seed, i);
    std::tie(train_split[i], val_split[i]) =
        stratified_split(subjects[i], spec);
  }

  EvalReport report;
  report.test_id = test_id;
  if (test_id == 1 || test_id == 2) {
    for (std::size_t i = 0; i < N; ++i) {
      const TrainedFamily model =
          train_family(train_split[i], family, config, i);
      const std::string id = "S" + std::to_string(i + 1);
      if (test_id == 1) {
        append_cells(report, id, static_cast<int>(i + 1), true,
                   eval_family(model, val_split[i]));
      } else {
        for (std::size_t j = 0; j < N; ++j) {
          if (j == i) continue;
          append_cells(report, id, static_cast<int>(j + 1), false,
                     eval_family(model, val_split[j]));
        }
      }
    }
  } else {
    for (std::size_t b = 1; b <= N; ++b) {
      const WindowedDataset pooled_train = merge_datasets(
          std::span<const WindowedDataset>(train_split.data(), b));
      const TrainedFamily model =
          train_family(pooled_train, family, config, 100 + b);
      const std::string id = "C" + std::to_string(b);
      if (test_id == 3) {
        const WindowedDataset pooled_val = merge_datasets(
            std::span<const WindowedDataset>(val_split.data(), b));
        append_cells(report, id, 0, true, eval_family(model, pooled_val));
      } else {
        for (std::size_t j = 0; j < N; ++j) {
          append_cells(report, id, static_cast<int>(j + 1), j < b,
                     eval_family(model, val_split[j]));
        }
      }
    }
  }
  report.aggregates = aggregate_per_two(report);
  return report;
}

}  // namespace mf
