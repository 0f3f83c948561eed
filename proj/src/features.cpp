#include "mf/features.hpp"

#include <cmath>

#include "mf/errors.hpp"

namespace mf {

int feature_width(FeatureSet set_id) {
  switch (set_id) {
    case FeatureSet::Set1: return 15;
    case FeatureSet::Set2: return 12;
    case FeatureSet::Set3: return 4;
    case FeatureSet::Set4: return 7;
    case FeatureSet::Set5: return 15;
  }
  throw InvalidSpec("unknown feature set");
}

FeatureSet feature_set_from_id(int id) {
  if (id < 1 || id > 5) {
    throw InvalidSpec("feature set id out of range: " + std::to_string(id));
  }
  return static_cast<FeatureSet>(id);
}

std::pair<double, double> spherical_projection(const Eigen::Vector3d& shoulder,
                                               const Eigen::Vector3d& elbow,
                                               const Eigen::Vector3d& torso_origin) {
  (void)torso_origin;  // a translated frame leaves difference vectors alone
  const Eigen::Vector3d u = elbow - shoulder;
  const double norm = u.norm();
  if (norm < 1e-9) throw DegenerateVector("elbow coincides with shoulder");
  double azimuth = 0.0;
  if (std::abs(u.x()) >= 1e-12 || std::abs(u.z()) >= 1e-12) {
    azimuth = std::atan2(u.z(), u.x());
  }
  const double elevation = std::asin(std::clamp(u.y() / norm, -1.0, 1.0));
  return {azimuth, elevation};
}

namespace {

void append_joint(std::vector<std::string>& names, const std::string& prefix) {
  names.push_back(prefix + "_x");
  names.push_back(prefix + "_y");
  names.push_back(prefix + "_z");
}

void put_vec(Eigen::MatrixXd& m, Eigen::Index row, int col,
             const Eigen::Vector3d& v) {
  m(row, col) = v.x();
  m(row, col + 1) = v.y();
  m(row, col + 2) = v.z();
}

}  // namespace

FeatureMatrix extract_features(const Session& session, FeatureSet set_id) {
  const auto T = static_cast<Eigen::Index>(session.rows.size());
  const int d = feature_width(set_id);
  FeatureMatrix out;
  out.set_id = set_id;
  out.values.resize(T, d);

  switch (set_id) {
    case FeatureSet::Set1:
      append_joint(out.column_names, "ss");
      append_joint(out.column_names, "ls");
      append_joint(out.column_names, "rs");
      append_joint(out.column_names, "le");
      append_joint(out.column_names, "re");
      break;
    case FeatureSet::Set2:
    case FeatureSet::Set5:
      append_joint(out.column_names, "ls_c");
      append_joint(out.column_names, "rs_c");
      append_joint(out.column_names, "le_c");
      append_joint(out.column_names, "re_c");
      break;
    case FeatureSet::Set3:
    case FeatureSet::Set4:
      out.column_names = {"az_l", "el_l", "az_r", "el_r"};
      break;
  }
  if (set_id == FeatureSet::Set3) {
    // nothing to add
  } else if (set_id == FeatureSet::Set4 || set_id == FeatureSet::Set5) {
    out.column_names.push_back("steer");
    out.column_names.push_back("gas");
    out.column_names.push_back("v");
  }

  for (Eigen::Index k = 0; k < T; ++k) {
    const SessionRow& row = session.rows[static_cast<std::size_t>(k)];
    const SkeletonFrame& f = row.skeleton;
    switch (set_id) {
      case FeatureSet::Set1:
        put_vec(out.values, k, 0, f.spine_shoulder);
        put_vec(out.values, k, 3, f.left_shoulder);
        put_vec(out.values, k, 6, f.right_shoulder);
        put_vec(out.values, k, 9, f.left_elbow);
        put_vec(out.values, k, 12, f.right_elbow);
        break;
      case FeatureSet::Set2:
      case FeatureSet::Set5:
        put_vec(out.values, k, 0, f.left_shoulder - f.spine_shoulder);
        put_vec(out.values, k, 3, f.right_shoulder - f.spine_shoulder);
        put_vec(out.values, k, 6, f.left_elbow - f.spine_shoulder);
        put_vec(out.values, k, 9, f.right_elbow - f.spine_shoulder);
        break;
      case FeatureSet::Set3:
      case FeatureSet::Set4: {
        const auto [az_l, el_l] =
            spherical_projection(f.left_shoulder, f.left_elbow, f.spine_shoulder);
        const auto [az_r, el_r] =
            spherical_projection(f.right_shoulder, f.right_elbow, f.spine_shoulder);
        out.values(k, 0) = az_l;
        out.values(k, 1) = el_l;
        out.values(k, 2) = az_r;
        out.values(k, 3) = el_r;
        break;
      }
    }
    if (set_id == FeatureSet::Set4 || set_id == FeatureSet::Set5) {
      const int base = set_id == FeatureSet::Set4 ? 4 : 12;
      out.values(k, base) = row.steering_wheel;
      out.values(k, base + 1) = row.gas;
      out.values(k, base + 2) = row.state.v;
    }
  }
  return out;
}

Scaler fit_scaler(const FeatureMatrix& train, ScalerKind kind) {
  if (train.values.rows() == 0) throw EmptyInput("cannot fit scaler on empty data");
  Scaler s;
  s.kind = kind;
  const Eigen::Index d = train.values.cols();
  s.p1.resize(d);
  s.p2.resize(d);
  if (kind == ScalerKind::MinMaxSymmetric) {
    s.p1 = train.values.colwise().minCoeff();
    s.p2 = train.values.colwise().maxCoeff();
  } else {
    s.p1 = train.values.colwise().mean();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double var =
          (train.values.col(j).array() - s.p1(j)).square().mean();
      s.p2(j) = std::sqrt(var);
    }
  }
  return s;
}

FeatureMatrix apply_scaler(const Scaler& scaler, const FeatureMatrix& m) {
  if (scaler.p1.size() != m.values.cols()) {
    throw ShapeMismatch("scaler width does not match feature width");
  }
  FeatureMatrix out = m;
  for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
    if (scaler.kind == ScalerKind::MinMaxSymmetric) {
      const double span = scaler.p2(j) - scaler.p1(j);
      if (span <= 0.0) {
        out.values.col(j).setZero();  // constant column carries no information
      } else {
        out.values.col(j) =
            ((m.values.col(j).array() - scaler.p1(j)) * (2.0 / span) - 1.0).matrix();
      }
    } else {
      if (scaler.p2(j) <= 0.0) {
        out.values.col(j).setZero();
      } else {
        out.values.col(j) =
            ((m.values.col(j).array() - scaler.p1(j)) / scaler.p2(j)).matrix();
      }
    }
  }
  return out;
}

WindowedDataset window_sequences(const FeatureMatrix& features,
                                 std::span<const Manoeuvre> labels, int t_wi,
                                 int t_wo, int stride, int subject_id) {
  if (t_wi < 1 || t_wo < 1 || stride < 1) {
    throw InvalidSpec("t_wi, t_wo and stride must be positive");
  }
  const auto T = features.values.rows();
  if (T != static_cast<Eigen::Index>(labels.size())) {
    throw LengthMismatch("features and labels disagree in length");
  }
  if (T < t_wi + t_wo - 1) {
    throw SeriesTooShort("need at least t_wi + t_wo - 1 rows, have " +
                         std::to_string(T));
  }

  WindowedDataset out;
  out.t_wi = t_wi;
  out.t_wo = t_wo;
  out.stride = stride;
  out.set_id = features.set_id;
  for (Eigen::Index t = t_wi - 1; t + t_wo - 1 < T; t += stride) {
    out.X.push_back(features.values.middleRows(t - t_wi + 1, t_wi));
    Eigen::MatrixXd y(t_wo, kNumManoeuvres);
    for (int j = 0; j < t_wo; ++j) {
      const auto oh = one_hot(labels[static_cast<std::size_t>(t + j)]);
      for (int c = 0; c < kNumManoeuvres; ++c) y(j, c) = oh[static_cast<std::size_t>(c)];
    }
    out.Y.push_back(std::move(y));
    out.subject_ids.push_back(subject_id);
  }
  return out;
}

WindowedDataset merge_datasets(std::span<const WindowedDataset> parts) {
  if (parts.empty()) throw EmptyInput("no datasets to merge");
  WindowedDataset out;
  out.t_wi = parts[0].t_wi;
  out.t_wo = parts[0].t_wo;
  out.stride = parts[0].stride;
  out.set_id = parts[0].set_id;
  for (const auto& p : parts) {
    if (p.t_wi != out.t_wi || p.t_wo != out.t_wo || p.set_id != out.set_id) {
      throw ShapeMismatch("datasets disagree in window shape or feature set");
    }
    out.X.insert(out.X.end(), p.X.begin(), p.X.end());
    out.Y.insert(out.Y.end(), p.Y.begin(), p.Y.end());
    out.subject_ids.insert(out.subject_ids.end(), p.subject_ids.begin(),
                           p.subject_ids.end());
  }
  return out;
}

}  // namespace mf
