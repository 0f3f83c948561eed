#include "mf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mf/errors.hpp"

namespace mf {

namespace {

constexpr double kProbFloor = 1e-12;

Eigen::MatrixXd logistic(const Eigen::MatrixXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

void glorot_fill(Eigen::MatrixXd& m, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = rng.uniform(-limit, limit);
    }
  }
}

// Per-timestep activations of one direction over a batch; every entry is
// an H x B matrix indexed by the direction's own step order.
struct DirectionTrace {
  std::vector<Eigen::MatrixXd> gate[kNumGates];
  std::vector<Eigen::MatrixXd> c;
  std::vector<Eigen::MatrixXd> tanh_c;
  std::vector<Eigen::MatrixXd> h;
};

// Runs the gated recurrence. X holds T matrices of shape d x B; when
// reversed is true the cell consumes X back to front (its step tau reads
// X[T-1-tau]). The trace is filled in the cell's own step order.
void run_direction(const LstmCellParams& cell,
                   const std::vector<Eigen::MatrixXd>& X, bool reversed,
                   DirectionTrace& trace) {
  const auto T = static_cast<Eigen::Index>(X.size());
  const Eigen::Index B = X[0].cols();
  const int H = cell.hidden;
  for (int g = 0; g < kNumGates; ++g) trace.gate[g].resize(static_cast<std::size_t>(T));
  trace.c.resize(static_cast<std::size_t>(T));
  trace.tanh_c.resize(static_cast<std::size_t>(T));
  trace.h.resize(static_cast<std::size_t>(T));

  Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd c_prev = Eigen::MatrixXd::Zero(H, B);
  for (Eigen::Index tau = 0; tau < T; ++tau) {
    const auto& x = X[static_cast<std::size_t>(reversed ? T - 1 - tau : tau)];
    Eigen::MatrixXd pre[kNumGates];
    for (int g = 0; g < kNumGates; ++g) {
      pre[g] = cell.W[g] * x + cell.U[g] * h_prev;
      pre[g].colwise() += Eigen::VectorXd(cell.b[g]);
    }
    const std::size_t k = static_cast<std::size_t>(tau);
    trace.gate[kGateI][k] = logistic(pre[kGateI]);
    trace.gate[kGateF][k] = logistic(pre[kGateF]);
    trace.gate[kGateO][k] = logistic(pre[kGateO]);
    trace.gate[kGateG][k] = pre[kGateG].array().tanh().matrix();
    trace.c[k] = (trace.gate[kGateF][k].array() * c_prev.array() +
                  trace.gate[kGateI][k].array() * trace.gate[kGateG][k].array())
                     .matrix();
    trace.tanh_c[k] = trace.c[k].array().tanh().matrix();
    trace.h[k] =
        (trace.gate[kGateO][k].array() * trace.tanh_c[k].array()).matrix();
    h_prev = trace.h[k];
    c_prev = trace.c[k];
  }
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> X;      // T entries, d x B
  DirectionTrace fwd;
  DirectionTrace bwd;
  std::vector<Eigen::MatrixXd> mask;   // T entries, 2H x B (empty: no dropout)
  std::vector<Eigen::MatrixXd> dropped;  // concat after mask, 2H x B
  std::vector<Eigen::MatrixXd> probs;  // T entries, 3 x B
};

void check_input_shape(const SequenceModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() != model.t_wi || x.cols() != model.input()) {
    throw ShapeMismatch("expected " + std::to_string(model.t_wi) + " x " +
                        std::to_string(model.input()) + " input, got " +
                        std::to_string(x.rows()) + " x " +
                        std::to_string(x.cols()));
  }
}

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

// Forward over a batch; fills the cache with everything backward needs.
void forward_batch(const SequenceModel& model,
                   std::span<const Eigen::MatrixXd> x_batch, bool training,
                   Rng* rng, ForwardCache& cache) {
  if (x_batch.empty()) throw EmptyInput("empty forward batch");
  for (const auto& x : x_batch) check_input_shape(model, x);
  if (training && model.dropout_rate > 0.0 && rng == nullptr) {
    throw InvalidSpec("training-mode dropout needs a random generator");
  }

  const int T = model.t_wi;
  const auto B = static_cast<Eigen::Index>(x_batch.size());
  const int d = model.input();
  const int H = model.hidden();

  cache.X.assign(static_cast<std::size_t>(T), Eigen::MatrixXd(d, B));
  for (Eigen::Index i = 0; i < B; ++i) {
    for (int t = 0; t < T; ++t) {
      cache.X[static_cast<std::size_t>(t)].col(i) =
          x_batch[static_cast<std::size_t>(i)].row(t).transpose();
    }
  }

  run_direction(model.forward_cell, cache.X, false, cache.fwd);
  run_direction(model.backward_cell, cache.X, true, cache.bwd);

  const bool use_dropout = training && model.dropout_rate > 0.0;
  const double keep = 1.0 - model.dropout_rate;
  cache.mask.clear();
  if (use_dropout) cache.mask.resize(static_cast<std::size_t>(T));
  cache.dropped.resize(static_cast<std::size_t>(T));
  cache.probs.resize(static_cast<std::size_t>(T));

  for (int t = 0; t < T; ++t) {
    const std::size_t k = static_cast<std::size_t>(t);
    Eigen::MatrixXd concat(2 * H, B);
    concat.topRows(H) = cache.fwd.h[k];
    concat.bottomRows(H) = cache.bwd.h[static_cast<std::size_t>(T - 1 - t)];
    if (use_dropout) {
      Eigen::MatrixXd& m = cache.mask[k];
      m.resize(2 * H, B);
      for (Eigen::Index j = 0; j < B; ++j) {
        for (Eigen::Index i = 0; i < 2 * H; ++i) {
          m(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
        }
      }
      cache.dropped[k] = concat.cwiseProduct(m);
    } else {
      cache.dropped[k] = std::move(concat);
    }
    const Eigen::MatrixXd logits =
        (model.dense_w.transpose() * cache.dropped[k]).colwise() +
        Eigen::VectorXd(model.dense_b);
    cache.probs[k] = column_softmax(logits);
  }
}

double batch_loss(const ForwardCache& cache,
                  std::span<const Eigen::MatrixXd> y_batch) {
  const auto T = static_cast<Eigen::Index>(cache.probs.size());
  const auto B = static_cast<Eigen::Index>(y_batch.size());
  double acc = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& p = cache.probs[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < B; ++i) {
      for (Eigen::Index c = 0; c < p.rows(); ++c) {
        const double y = y_batch[static_cast<std::size_t>(i)](t, c);
        if (y != 0.0) acc -= y * std::log(std::max(p(c, i), kProbFloor));
      }
    }
  }
  return acc / static_cast<double>(T * B);
}

// Backward through one direction; d_h[tau] is the loss gradient w.r.t. the
// direction's step-tau output. Gradient matrices are accumulated in place.
void backprop_direction(const LstmCellParams& cell,
                        const std::vector<Eigen::MatrixXd>& X, bool reversed,
                        const DirectionTrace& trace,
                        std::vector<Eigen::MatrixXd>& d_h,
                        Eigen::MatrixXd* dW, Eigen::MatrixXd* dU,
                        Eigen::MatrixXd* db) {
  const auto T = static_cast<Eigen::Index>(X.size());
  const Eigen::Index B = X[0].cols();
  const int H = cell.hidden;
  Eigen::MatrixXd carry_h = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd carry_c = Eigen::MatrixXd::Zero(H, B);
  for (Eigen::Index tau = T - 1; tau >= 0; --tau) {
    const std::size_t k = static_cast<std::size_t>(tau);
    const auto& I = trace.gate[kGateI][k];
    const auto& F = trace.gate[kGateF][k];
    const auto& G = trace.gate[kGateG][k];
    const auto& O = trace.gate[kGateO][k];
    const auto& th = trace.tanh_c[k];

    const Eigen::MatrixXd dh = d_h[k] + carry_h;
    const Eigen::MatrixXd dO = dh.cwiseProduct(th);
    Eigen::MatrixXd dc =
        carry_c +
        (dh.array() * O.array() * (1.0 - th.array().square())).matrix();

    const Eigen::MatrixXd dI = dc.cwiseProduct(G);
    const Eigen::MatrixXd dG = dc.cwiseProduct(I);
    Eigen::MatrixXd dF;
    if (tau > 0) {
      dF = dc.cwiseProduct(trace.c[k - 1]);
    } else {
      dF = Eigen::MatrixXd::Zero(H, B);
    }

    Eigen::MatrixXd da[kNumGates];
    da[kGateI] = (dI.array() * I.array() * (1.0 - I.array())).matrix();
    da[kGateF] = (dF.array() * F.array() * (1.0 - F.array())).matrix();
    da[kGateO] = (dO.array() * O.array() * (1.0 - O.array())).matrix();
    da[kGateG] = (dG.array() * (1.0 - G.array().square())).matrix();

    const auto& x = X[static_cast<std::size_t>(reversed ? T - 1 - tau : tau)];
    carry_h.setZero();
    for (int g = 0; g < kNumGates; ++g) {
      dW[g].noalias() += da[g] * x.transpose();
      if (tau > 0) dU[g].noalias() += da[g] * trace.h[k - 1].transpose();
      db[g] += da[g].rowwise().sum();
      carry_h.noalias() += cell.U[g].transpose() * da[g];
    }
    carry_c = dc.cwiseProduct(F);
  }
}

}  // namespace

std::vector<Eigen::MatrixXd*> SequenceModel::parameters() {
  std::vector<Eigen::MatrixXd*> out;
  for (LstmCellParams* cell : {&forward_cell, &backward_cell}) {
    for (int g = 0; g < kNumGates; ++g) out.push_back(&cell->W[g]);
    for (int g = 0; g < kNumGates; ++g) out.push_back(&cell->U[g]);
    for (int g = 0; g < kNumGates; ++g) out.push_back(&cell->b[g]);
  }
  out.push_back(&dense_w);
  out.push_back(&dense_b);
  return out;
}

std::vector<const Eigen::MatrixXd*> SequenceModel::parameters() const {
  auto mutable_params = const_cast<SequenceModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

SequenceModel init_model(int hidden, FeatureSet set_id, int t_wi, int t_wo,
                         double dropout_rate, Rng& rng) {
  if (hidden < 1 || t_wi < 1 || t_wo < 1) {
    throw InvalidSpec("model sizes must be positive");
  }
  if (t_wi != t_wo) {
    throw InvalidSpec("step-j output predicts the label j steps ahead, so "
                      "t_wi must equal t_wo");
  }
  if (dropout_rate < 0.0 || dropout_rate > 1.0) {
    throw InvalidSpec("dropout rate must lie in [0, 1]");
  }
  const int d = feature_width(set_id);
  SequenceModel model;
  model.set_id = set_id;
  model.t_wi = t_wi;
  model.t_wo = t_wo;
  model.dropout_rate = dropout_rate;
  for (LstmCellParams* cell : {&model.forward_cell, &model.backward_cell}) {
    cell->hidden = hidden;
    cell->input = d;
    for (int g = 0; g < kNumGates; ++g) {
      cell->W[g].resize(hidden, d);
      glorot_fill(cell->W[g], d, hidden, rng);
      cell->U[g].resize(hidden, hidden);
      glorot_fill(cell->U[g], hidden, hidden, rng);
      cell->b[g] = Eigen::MatrixXd::Zero(hidden, 1);
    }
    cell->b[kGateF].setOnes();
  }
  model.dense_w.resize(2 * hidden, kNumManoeuvres);
  glorot_fill(model.dense_w, 2 * hidden, kNumManoeuvres, rng);
  model.dense_b = Eigen::MatrixXd::Zero(kNumManoeuvres, 1);
  return model;
}

long param_count(int hidden, int input, int classes) {
  if (hidden < 1 || input < 1 || classes < 1) {
    throw InvalidSpec("sizes must be positive");
  }
  const long H = hidden, d = input, c = classes;
  return 2 * (4 * (H * (H + d) + H)) + (2 * H * c + c);
}

Eigen::MatrixXd lstm_forward(const LstmCellParams& cell,
                             const Eigen::MatrixXd& x_seq) {
  if (x_seq.cols() != cell.input) {
    throw ShapeMismatch("input width " + std::to_string(x_seq.cols()) +
                        " does not match cell input " +
                        std::to_string(cell.input));
  }
  const auto T = x_seq.rows();
  std::vector<Eigen::MatrixXd> X(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    X[static_cast<std::size_t>(t)] = x_seq.row(t).transpose();
  }
  DirectionTrace trace;
  run_direction(cell, X, false, trace);
  Eigen::MatrixXd h(T, cell.hidden);
  for (Eigen::Index t = 0; t < T; ++t) {
    h.row(t) = trace.h[static_cast<std::size_t>(t)].col(0).transpose();
  }
  return h;
}

Eigen::MatrixXd bilstm_forward(const SequenceModel& model,
                               const Eigen::MatrixXd& x_seq) {
  if (x_seq.cols() != model.input()) {
    throw ShapeMismatch("input width does not match model");
  }
  const auto T = x_seq.rows();
  const int H = model.hidden();
  const Eigen::MatrixXd fwd = lstm_forward(model.forward_cell, x_seq);
  const Eigen::MatrixXd bwd_rev =
      lstm_forward(model.backward_cell, x_seq.colwise().reverse());
  Eigen::MatrixXd out(T, 2 * H);
  out.leftCols(H) = fwd;
  out.rightCols(H) = bwd_rev.colwise().reverse();
  return out;
}

Eigen::MatrixXd model_forward(const SequenceModel& model,
                              const Eigen::MatrixXd& x_seq, bool training,
                              Rng* rng) {
  ForwardCache cache;
  const Eigen::MatrixXd* batch = &x_seq;
  forward_batch(model, std::span<const Eigen::MatrixXd>(batch, 1), training,
                rng, cache);
  Eigen::MatrixXd probs(model.t_wi, kNumManoeuvres);
  for (int t = 0; t < model.t_wi; ++t) {
    probs.row(t) = cache.probs[static_cast<std::size_t>(t)].col(0).transpose();
  }
  return probs;
}

double ce_loss(const Eigen::MatrixXd& prob_seq, const Eigen::MatrixXd& y_seq) {
  if (prob_seq.rows() != y_seq.rows() || prob_seq.cols() != y_seq.cols()) {
    throw ShapeMismatch("probability and target shapes differ");
  }
  if (prob_seq.rows() == 0) throw EmptyInput("empty sequences");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < prob_seq.rows(); ++t) {
    for (Eigen::Index c = 0; c < prob_seq.cols(); ++c) {
      if (y_seq(t, c) != 0.0) {
        acc -= y_seq(t, c) * std::log(std::max(prob_seq(t, c), kProbFloor));
      }
    }
  }
  return acc / static_cast<double>(prob_seq.rows());
}

double batch_gradients(const SequenceModel& model,
                       std::span<const Eigen::MatrixXd> x_batch,
                       std::span<const Eigen::MatrixXd> y_batch, bool training,
                       Rng* rng, ModelGrads& grads) {
  if (x_batch.size() != y_batch.size()) {
    throw ShapeMismatch("batch inputs and targets differ in count");
  }
  for (const auto& y : y_batch) {
    if (y.rows() != model.t_wo || y.cols() != kNumManoeuvres) {
      throw ShapeMismatch("target window shape mismatch");
    }
  }
  ForwardCache cache;
  forward_batch(model, x_batch, training, rng, cache);
  const double loss = batch_loss(cache, y_batch);

  const auto params = model.parameters();
  grads.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    grads[i] = Eigen::MatrixXd::Zero(params[i]->rows(), params[i]->cols());
  }
  // layout mirrors SequenceModel::parameters()
  Eigen::MatrixXd* g_fwd_W = &grads[0];
  Eigen::MatrixXd* g_fwd_U = &grads[4];
  Eigen::MatrixXd* g_fwd_b = &grads[8];
  Eigen::MatrixXd* g_bwd_W = &grads[12];
  Eigen::MatrixXd* g_bwd_U = &grads[16];
  Eigen::MatrixXd* g_bwd_b = &grads[20];
  Eigen::MatrixXd& g_dense_w = grads[24];
  Eigen::MatrixXd& g_dense_b = grads[25];

  const int T = model.t_wi;
  const auto B = static_cast<Eigen::Index>(x_batch.size());
  const int H = model.hidden();
  const double scale = 1.0 / static_cast<double>(T * B);

  std::vector<Eigen::MatrixXd> dh_fwd(static_cast<std::size_t>(T));
  std::vector<Eigen::MatrixXd> dh_bwd(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const std::size_t k = static_cast<std::size_t>(t);
    Eigen::MatrixXd dlogit = cache.probs[k];
    for (Eigen::Index i = 0; i < B; ++i) {
      for (Eigen::Index c = 0; c < kNumManoeuvres; ++c) {
        dlogit(c, i) -= y_batch[static_cast<std::size_t>(i)](t, c);
      }
    }
    dlogit *= scale;
    g_dense_w.noalias() += cache.dropped[k] * dlogit.transpose();
    g_dense_b += dlogit.rowwise().sum();
    Eigen::MatrixXd dz = model.dense_w * dlogit;  // 2H x B
    if (!cache.mask.empty()) dz = dz.cwiseProduct(cache.mask[k]);
    dh_fwd[k] = dz.topRows(H);
    dh_bwd[static_cast<std::size_t>(T - 1 - t)] = dz.bottomRows(H);
  }

  backprop_direction(model.forward_cell, cache.X, false, cache.fwd, dh_fwd,
                     g_fwd_W, g_fwd_U, g_fwd_b);
  backprop_direction(model.backward_cell, cache.X, true, cache.bwd, dh_bwd,
                     g_bwd_W, g_bwd_U, g_bwd_b);
  return loss;
}

AdamState make_adam_state(const std::vector<Eigen::MatrixXd*>& params,
                          double lr) {
  AdamState st;
  st.lr = lr;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto* p : params) {
    st.m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    st.v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
  return st;
}

void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const ModelGrads& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeMismatch("optimizer state does not match parameters");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() ||
        params[i]->cols() != grads[i].cols()) {
      throw ShapeMismatch("gradient shape does not match parameter");
    }
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = (state.beta2 * state.v[i].array() +
                  (1.0 - state.beta2) * grads[i].array().square())
                     .matrix();
    const Eigen::ArrayXXd m_hat = state.m[i].array() / bc1;
    const Eigen::ArrayXXd v_hat = state.v[i].array() / bc2;
    params[i]->array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

TrainHistory train(SequenceModel& model, const WindowedDataset& train_set,
                   const WindowedDataset* val_set, const TrainConfig& config) {
  if (train_set.size() == 0) throw EmptyDataset("no training windows");
  if (config.epochs < 1 || config.batch_size < 1) {
    throw InvalidSpec("epochs and batch_size must be positive");
  }
  if (train_set.t_wi != model.t_wi || train_set.t_wo != model.t_wo) {
    throw ShapeMismatch("dataset window shape does not match model");
  }
  if (train_set.X[0].cols() != model.input()) {
    throw ShapeMismatch("dataset feature width does not match model");
  }

  Rng rng(config.seed);
  const auto params = model.parameters();
  AdamState adam = make_adam_state(params, config.lr);
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_params;

  std::vector<Eigen::MatrixXd> xb, yb;
  ModelGrads grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_int(i)]);
      }
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(config.batch_size));
      xb.clear();
      yb.clear();
      for (std::size_t i = start; i < stop; ++i) {
        xb.push_back(train_set.X[order[i]]);
        yb.push_back(train_set.Y[order[i]]);
      }
      const double loss = batch_gradients(model, xb, yb, true, &rng, grads);
      adam_step(params, grads, adam);
      loss_sum += loss * static_cast<double>(stop - start);
    }
    history.train_loss.push_back(loss_sum / static_cast<double>(n));

    if (val_set != nullptr && val_set->size() > 0) {
      const auto probs = predict_probs(model, val_set->X);
      double val = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        val += ce_loss(probs[i], val_set->Y[i]);
      }
      val /= static_cast<double>(probs.size());
      history.val_loss.push_back(val);
      if (val < best_val) {
        best_val = val;
        history.best_epoch = epoch;
        best_params.clear();
        for (const auto* p : params) best_params.push_back(*p);
      }
    } else {
      history.best_epoch = epoch;
    }
  }
  if (!best_params.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best_params[i];
  }
  model.training_seed = config.seed;
  return history;
}

double batch_ce_loss(const SequenceModel& model,
                     std::span<const Eigen::MatrixXd> x_batch,
                     std::span<const Eigen::MatrixXd> y_batch) {
  if (x_batch.size() != y_batch.size()) {
    throw ShapeMismatch("batch inputs and targets differ in count");
  }
  ForwardCache cache;
  forward_batch(model, x_batch, false, nullptr, cache);
  return batch_loss(cache, y_batch);
}

double grad_check(SequenceModel& model,
                  std::span<const Eigen::MatrixXd> x_batch,
                  std::span<const Eigen::MatrixXd> y_batch, double eps) {
  if (!(eps > 0.0)) throw InvalidSpec("finite-difference step must be positive");
  ModelGrads grads;
  batch_gradients(model, x_batch, y_batch, false, nullptr, grads);
  const auto params = model.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd& p = *params[i];
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double saved = p(r, c);
        p(r, c) = saved + eps;
        const double plus = batch_ce_loss(model, x_batch, y_batch);
        p(r, c) = saved - eps;
        const double minus = batch_ce_loss(model, x_batch, y_batch);
        p(r, c) = saved;
        const double numeric = (plus - minus) / (2.0 * eps);
        const double analytic = grads[i](r, c);
        const double denom = std::max(std::abs(numeric) + std::abs(analytic), 1e-8);
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
      }
    }
  }
  return worst;
}

std::vector<Eigen::MatrixXd> predict_probs(const SequenceModel& model,
                                           std::span<const Eigen::MatrixXd> x,
                                           int batch_size) {
  if (batch_size < 1) throw InvalidSpec("batch size must be positive");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(x.size());
  ForwardCache cache;
  for (std::size_t start = 0; start < x.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(x.size(), start + static_cast<std::size_t>(batch_size));
    forward_batch(model, x.subspan(start, stop - start), false, nullptr, cache);
    for (std::size_t i = start; i < stop; ++i) {
      Eigen::MatrixXd probs(model.t_wi, kNumManoeuvres);
      for (int t = 0; t < model.t_wi; ++t) {
        probs.row(t) =
            cache.probs[static_cast<std::size_t>(t)].col(static_cast<Eigen::Index>(i - start)).transpose();
      }
      out.push_back(std::move(probs));
    }
  }
  return out;
}

}  // namespace mf
