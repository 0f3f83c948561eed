#ifndef MF_NN_HPP
#define MF_NN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "mf/features.hpp"
#include "mf/rng.hpp"

namespace mf {

// Gate order used throughout: input, forget, cell-candidate, output.
enum GateIndex { kGateI = 0, kGateF = 1, kGateG = 2, kGateO = 3 };
inline constexpr int kNumGates = 4;

// One recurrent cell direction: per gate an input map W (H x d), a
// recurrent map U (H x H) and a bias (H x 1).
struct LstmCellParams {
  Eigen::MatrixXd W[kNumGates];
  Eigen::MatrixXd U[kNumGates];
  Eigen::MatrixXd b[kNumGates];
  int hidden = 0;
  int input = 0;
};

// Bidirectional recurrent sequence classifier: forward and backward cells,
// dropout on the concatenated per-step outputs, then a shared dense layer
// with row softmax at every timestep. Input windows are t_wi x d; the step-j
// output is the class distribution for the label j steps ahead of the
// window end, so t_wi == t_wo.
struct SequenceModel {
  LstmCellParams forward_cell;
  LstmCellParams backward_cell;
  Eigen::MatrixXd dense_w;  // 2H x 3
  Eigen::MatrixXd dense_b;  // 3 x 1
  double dropout_rate = 0.2;
  Scaler scaler;
  FeatureSet set_id = FeatureSet::Set4;
  int t_wi = 30;
  int t_wo = 30;
  std::uint64_t training_seed = 0;

  int hidden() const { return forward_cell.hidden; }
  int input() const { return forward_cell.input; }

  // Parameter traversal in a fixed order (forward cell W/U/b per gate,
  // backward cell likewise, dense weights, dense bias as a column).
  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<const Eigen::MatrixXd*> parameters() const;
};

// Glorot-uniform initialization, zero biases except the forget gate at 1.
SequenceModel init_model(int hidden, FeatureSet set_id, int t_wi, int t_wo,
                         double dropout_rate, Rng& rng);

long param_count(int hidden, int input, int classes = 3);

// Single-direction recurrence over one sequence; returns the T x H outputs.
Eigen::MatrixXd lstm_forward(const LstmCellParams& cell,
                             const Eigen::MatrixXd& x_seq);

// Forward pass over x (T x d) and a backward pass over reversed x,
// re-reversed, concatenated forward-first: T x 2H.
Eigen::MatrixXd bilstm_forward(const SequenceModel& model,
                               const Eigen::MatrixXd& x_seq);

// Full network: recurrent concat, dropout (training only; inverted
// scaling), dense, softmax. Returns T x 3 probabilities.
Eigen::MatrixXd model_forward(const SequenceModel& model,
                              const Eigen::MatrixXd& x_seq, bool training,
                              Rng* rng);

// Mean over timesteps of the categorical cross-entropy, probabilities
// clamped below at 1e-12.
double ce_loss(const Eigen::MatrixXd& prob_seq, const Eigen::MatrixXd& y_seq);

// Gradients in the same order as SequenceModel::parameters().
using ModelGrads = std::vector<Eigen::MatrixXd>;

// Exact mean-loss gradients over a batch of windows via backpropagation
// through time. Dropout masks are drawn from rng when training is true.
// Returns the batch loss alongside the gradients.
double batch_gradients(const SequenceModel& model,
                       std::span<const Eigen::MatrixXd> x_batch,
                       std::span<const Eigen::MatrixXd> y_batch, bool training,
                       Rng* rng, ModelGrads& grads);

struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(const std::vector<Eigen::MatrixXd*>& params,
                          double lr = 1e-3);

// Bias-corrected moment update: theta <- theta - lr * m_hat/(sqrt(v_hat)+eps).
void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const ModelGrads& grads, AdamState& state);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  std::uint64_t seed = 1;
  double lr = 1e-3;
  bool shuffle = true;
};

struct TrainHistory {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> val_loss;    // empty when no validation set given
  int best_epoch = 0;              // epoch whose parameters were kept
};

// Mini-batch training with seeded shuffling and Adam. When a validation
// set is given the parameters from the best-validation-loss epoch are
// restored at the end. Deterministic in config.seed.
TrainHistory train(SequenceModel& model, const WindowedDataset& train_set,
                   const WindowedDataset* val_set, const TrainConfig& config);

// Mean inference-mode loss over a batch of windows (no dropout).
double batch_ce_loss(const SequenceModel& model,
                     std::span<const Eigen::MatrixXd> x_batch,
                     std::span<const Eigen::MatrixXd> y_batch);

// Compares analytic gradients against central finite differences over every
// parameter; returns the maximum relative error. Throws InvalidSpec when
// eps is not positive.
double grad_check(SequenceModel& model,
                  std::span<const Eigen::MatrixXd> x_batch,
                  std::span<const Eigen::MatrixXd> y_batch, double eps);

// Inference probabilities for many windows, batched internally.
std::vector<Eigen::MatrixXd> predict_probs(const SequenceModel& model,
                                           std::span<const Eigen::MatrixXd> x,
                                           int batch_size = 256);

}  // namespace mf

#endif  // MF_NN_HPP
