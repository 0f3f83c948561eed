#ifndef MF_FEATURES_HPP
#define MF_FEATURES_HPP

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "mf/sim.hpp"
#include "mf/track.hpp"

namespace mf {

// The five candidate feature sets. Widths are fixed: 15, 12, 4, 7, 15.
enum class FeatureSet : int { Set1 = 1, Set2 = 2, Set3 = 3, Set4 = 4, Set5 = 5 };

int feature_width(FeatureSet set_id);
FeatureSet feature_set_from_id(int id);

// Row-per-timestep feature table extracted from one session.
struct FeatureMatrix {
  Eigen::MatrixXd values;  // T x d
  FeatureSet set_id = FeatureSet::Set4;
  std::vector<std::string> column_names;
};

// Azimuth/elevation of the shoulder-to-elbow vector in a frame whose axes
// are the sensor axes translated to torso_origin (translation cannot change
// a difference vector, so the origin only documents the anchoring). The
// radial component is discarded. Azimuth = atan2(u_z, u_x); elevation =
// asin(u_y / |u|). At the poles (|u_x|, |u_z| < 1e-12) azimuth is pinned
// to 0. Throws DegenerateVector when |u| < 1e-9.
std::pair<double, double> spherical_projection(const Eigen::Vector3d& shoulder,
                                               const Eigen::Vector3d& elbow,
                                               const Eigen::Vector3d& torso_origin);

// Columns per set:
//   Set1: raw spine-shoulder, shoulders and elbows (5 joints x 3).
//   Set2: shoulders and elbows centred on the spine-shoulder joint (4 x 3).
//   Set3: azimuth+elevation per arm (4).
//   Set4: Set3 + steering wheel angle + gas + velocity (7).
//   Set5: Set2 + steering wheel angle + gas + velocity (15).
FeatureMatrix extract_features(const Session& session, FeatureSet set_id);

enum class ScalerKind { MinMaxSymmetric, Standardize };

// Per-column affine scaling statistics learned from training data only.
// MinMaxSymmetric stores min/max and maps them to -1/+1; Standardize stores
// mean and population std and maps to zero mean, unit std. A degenerate
// (constant) column maps to all zeros under both kinds.
struct Scaler {
  ScalerKind kind = ScalerKind::MinMaxSymmetric;
  Eigen::VectorXd p1;  // per-column min, or mean
  Eigen::VectorXd p2;  // per-column max, or std
};

Scaler fit_scaler(const FeatureMatrix& train, ScalerKind kind);
FeatureMatrix apply_scaler(const Scaler& scaler, const FeatureMatrix& m);

// Sliding windows pairing t_wi rows of past features with the one-hot
// labels of the next t_wo timesteps. Window n ending at source index t has
// X = features[t - t_wi + 1 .. t] and Y = one_hot(label[t .. t + t_wo - 1]).
struct WindowedDataset {
  std::vector<Eigen::MatrixXd> X;  // each t_wi x d
  std::vector<Eigen::MatrixXd> Y;  // each t_wo x 3, one-hot rows
  std::vector<int> subject_ids;    // per window
  int t_wi = 0;
  int t_wo = 0;
  int stride = 1;
  FeatureSet set_id = FeatureSet::Set4;

  std::size_t size() const { return X.size(); }
};

// Throws SeriesTooShort when T < t_wi + t_wo - 1, LengthMismatch when
// features and labels disagree, InvalidSpec for non-positive t_wi/t_wo/stride.
WindowedDataset window_sequences(const FeatureMatrix& features,
                                 std::span<const Manoeuvre> labels, int t_wi,
                                 int t_wo, int stride, int subject_id);

// Concatenates windows of several datasets (same shape metadata required).
WindowedDataset merge_datasets(std::span<const WindowedDataset> parts);

}  // namespace mf

#endif  // MF_FEATURES_HPP
