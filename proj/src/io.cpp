#include "mf/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "mf/errors.hpp"

namespace mf {

namespace {

using nlohmann::json;

constexpr std::string_view kSessionHeader =
    "t,s,x,y,heading,v,steer,gas,ssx,ssy,ssz,lsx,lsy,lsz,rsx,rsy,rsz,lex,ley,"
    "lez,rex,rey,rez,label";
constexpr std::string_view kReportHeader =
    "model_id,subject_id,two,manoeuvre,f1,known";
constexpr std::string_view kWindowsMagic = "MFW1";
constexpr int kCheckpointVersion = 1;

double parse_double(std::string_view field) {
  double v = 0.0;
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw CorruptFile("bad numeric field '" + std::string(field) + "'");
  }
  return v;
}

long parse_long(std::string_view field) {
  long v = 0;
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw CorruptFile("bad integer field '" + std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(sep, start);
    if (end == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, end - start));
    start = end + 1;
  }
}

// --- little-endian byte packing ---------------------------------------------

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
  }
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
  }
}

void append_f32(std::string& out, double v) {
  append_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

struct ByteReader {
  std::string_view bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw CorruptFile("truncated dataset file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
};

// --- json helpers -------------------------------------------------------------

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptFile(e.what());
  }
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw CorruptFile("matrix value is not an array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw CorruptFile("ragged matrix rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw CorruptFile("vector value is not an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  }
  return v;
}

constexpr const char* kGateNames[kNumGates] = {"i", "f", "g", "o"};

json cell_to_json(const LstmCellParams& cell) {
  json j;
  for (int g = 0; g < kNumGates; ++g) {
    j[std::string("W_") + kGateNames[g]] = matrix_to_json(cell.W[g]);
    j[std::string("U_") + kGateNames[g]] = matrix_to_json(cell.U[g]);
    j[std::string("b_") + kGateNames[g]] = vector_to_json(cell.b[g].col(0));
  }
  return j;
}

LstmCellParams cell_from_json(const json& j) {
  LstmCellParams cell;
  for (int g = 0; g < kNumGates; ++g) {
    cell.W[g] = matrix_from_json(j.at(std::string("W_") + kGateNames[g]));
    cell.U[g] = matrix_from_json(j.at(std::string("U_") + kGateNames[g]));
    cell.b[g] = vector_from_json(j.at(std::string("b_") + kGateNames[g]));
  }
  cell.hidden = static_cast<int>(cell.W[kGateI].rows());
  cell.input = static_cast<int>(cell.W[kGateI].cols());
  for (int g = 0; g < kNumGates; ++g) {
    if (cell.W[g].rows() != cell.hidden || cell.W[g].cols() != cell.input ||
        cell.U[g].rows() != cell.hidden || cell.U[g].cols() != cell.hidden ||
        cell.b[g].rows() != cell.hidden || cell.b[g].cols() != 1) {
      throw CorruptFile("inconsistent recurrent cell shapes");
    }
  }
  return cell;
}

json scaler_to_json(const Scaler& s) {
  json j;
  j["kind"] = s.kind == ScalerKind::MinMaxSymmetric ? "minmax_symmetric"
                                                    : "standardize";
  j["p1"] = vector_to_json(s.p1);
  j["p2"] = vector_to_json(s.p2);
  return j;
}

Scaler scaler_from_json(const json& j) {
  Scaler s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "minmax_symmetric") {
    s.kind = ScalerKind::MinMaxSymmetric;
  } else if (kind == "standardize") {
    s.kind = ScalerKind::Standardize;
  } else {
    throw CorruptFile("unknown scaler kind '" + kind + "'");
  }
  s.p1 = vector_from_json(j.at("p1"));
  s.p2 = vector_from_json(j.at("p2"));
  if (s.p1.size() != s.p2.size()) {
    throw CorruptFile("scaler statistic lengths differ");
  }
  return s;
}

json mlp_to_json(const MlpModel& m) {
  json j;
  json weights = json::array();
  json biases = json::array();
  for (const Eigen::MatrixXd& w : m.W) weights.push_back(matrix_to_json(w));
  for (const Eigen::MatrixXd& b : m.b) biases.push_back(vector_to_json(b.col(0)));
  j["W"] = std::move(weights);
  j["b"] = std::move(biases);
  return j;
}

MlpModel mlp_from_json(const json& j) {
  MlpModel m;
  const json& weights = j.at("W");
  const json& biases = j.at("b");
  if (weights.size() != biases.size() || weights.empty()) {
    throw CorruptFile("layer weight and bias counts differ");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    m.W.push_back(matrix_from_json(weights.at(l)));
    m.b.push_back(vector_from_json(biases.at(l)));
    if (m.b.back().rows() != m.W.back().rows()) {
      throw CorruptFile("layer bias length does not match its weight rows");
    }
    if (l > 0 && m.W[l].cols() != m.W[l - 1].rows()) {
      throw CorruptFile("consecutive layer shapes incompatible");
    }
  }
  return m;
}

json forest_to_json(const ExtraTreesModel& m) {
  json j;
  j["n_features"] = m.n_features;
  j["n_classes"] = m.n_classes;
  json trees = json::array();
  for (const DecisionTree& tree : m.trees) {
    json nodes = json::array();
    for (const TreeNode& node : tree.nodes) {
      json n;
      n["feature"] = node.feature;
      n["threshold"] = node.threshold;
      n["left"] = node.left;
      n["right"] = node.right;
      n["dist"] = vector_to_json(node.dist);
      nodes.push_back(std::move(n));
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

ExtraTreesModel forest_from_json(const json& j) {
  ExtraTreesModel m;
  m.n_features = j.at("n_features").get<int>();
  m.n_classes = j.at("n_classes").get<int>();
  for (const json& nodes : j.at("trees")) {
    DecisionTree tree;
    for (const json& n : nodes) {
      TreeNode node;
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
      node.dist = vector_from_json(n.at("dist"));
      const auto limit = static_cast<int>(nodes.size());
      if (node.feature >= m.n_features || node.left >= limit ||
          node.right >= limit) {
        throw CorruptFile("tree node references out of range");
      }
      tree.nodes.push_back(std::move(node));
    }
    if (tree.nodes.empty()) throw CorruptFile("empty tree");
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Raw file helpers

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed on '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw IoError("cannot move '" + tmp.string() + "' into place: " +
                  ec.message());
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  const auto res =
      std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return {buf, res.ptr};
}

// ---------------------------------------------------------------------------
// Session CSV and profile sidecar

std::string session_to_csv(const Session& session) {
  std::string out{kSessionHeader};
  out += '\n';
  for (const SessionRow& row : session.rows) {
    const double scalars[] = {row.t,   row.state.s,       row.state.x,
                              row.state.y, row.state.heading, row.state.v,
                              row.steering_wheel, row.gas};
    for (const double v : scalars) {
      out += format_double(v);
      out += ',';
    }
    const Eigen::Vector3d* joints[] = {
        &row.skeleton.spine_shoulder, &row.skeleton.left_shoulder,
        &row.skeleton.right_shoulder, &row.skeleton.left_elbow,
        &row.skeleton.right_elbow};
    for (const Eigen::Vector3d* joint : joints) {
      for (int k = 0; k < 3; ++k) {
        out += format_double((*joint)(k));
        out += ',';
      }
    }
    out += std::to_string(index_of(row.label));
    out += '\n';
  }
  return out;
}

Session session_from_csv(const std::string& text, const DriverProfile& profile,
                         double dt) {
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front() != kSessionHeader) {
    throw CorruptFile("session CSV header mismatch");
  }
  Session session;
  session.profile = profile;
  session.dt = dt;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string_view> fields = split(lines[i], ',');
    if (fields.size() != 24) {
      throw CorruptFile("session CSV row has " +
                        std::to_string(fields.size()) + " fields, wanted 24");
    }
    SessionRow row;
    row.t = parse_double(fields[0]);
    row.state.s = parse_double(fields[1]);
    row.state.x = parse_double(fields[2]);
    row.state.y = parse_double(fields[3]);
    row.state.heading = parse_double(fields[4]);
    row.state.v = parse_double(fields[5]);
    row.steering_wheel = parse_double(fields[6]);
    row.gas = parse_double(fields[7]);
    Eigen::Vector3d* joints[] = {
        &row.skeleton.spine_shoulder, &row.skeleton.left_shoulder,
        &row.skeleton.right_shoulder, &row.skeleton.left_elbow,
        &row.skeleton.right_elbow};
    std::size_t f = 8;
    for (Eigen::Vector3d* joint : joints) {
      for (int k = 0; k < 3; ++k) (*joint)(k) = parse_double(fields[f++]);
    }
    const long label = parse_long(fields[23]);
    if (label < 0 || label >= kNumManoeuvres) {
      throw CorruptFile("label index out of range");
    }
    row.label = manoeuvre_from_index(static_cast<int>(label));
    session.rows.push_back(std::move(row));
  }
  return session;
}

std::string profile_to_json(const DriverProfile& profile, double dt) {
  json j;
  j["subject_id"] = profile.subject_id;
  j["upper_arm"] = profile.upper_arm;
  j["forearm"] = profile.forearm;
  j["torso"] = profile.torso;
  j["shoulder_width"] = profile.shoulder_width;
  j["seat_distance"] = profile.seat_distance;
  j["lookahead_gain"] = profile.lookahead_gain;
  j["lookahead_base"] = profile.lookahead_base;
  j["steering_lag"] = profile.steering_lag;
  j["target_speed_straight"] = profile.target_speed_straight;
  j["target_speed_turn"] = profile.target_speed_turn;
  j["noise_joint_xy"] = profile.noise_joint_xy;
  j["noise_joint_z"] = profile.noise_joint_z;
  j["outlier_rate"] = profile.outlier_rate;
  j["seed"] = profile.seed;
  j["dt"] = dt;
  return j.dump(2) + "\n";
}

std::pair<DriverProfile, double> profile_from_json(const std::string& text) {
  const json j = parse_json(text);
  try {
    DriverProfile p;
    p.subject_id = j.at("subject_id").get<int>();
    p.upper_arm = j.at("upper_arm").get<double>();
    p.forearm = j.at("forearm").get<double>();
    p.torso = j.at("torso").get<double>();
    p.shoulder_width = j.at("shoulder_width").get<double>();
    p.seat_distance = j.at("seat_distance").get<double>();
    p.lookahead_gain = j.at("lookahead_gain").get<double>();
    p.lookahead_base = j.at("lookahead_base").get<double>();
    p.steering_lag = j.at("steering_lag").get<double>();
    p.target_speed_straight = j.at("target_speed_straight").get<double>();
    p.target_speed_turn = j.at("target_speed_turn").get<double>();
    p.noise_joint_xy = j.at("noise_joint_xy").get<double>();
    p.noise_joint_z = j.at("noise_joint_z").get<double>();
    p.outlier_rate = j.at("outlier_rate").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return {p, j.at("dt").get<double>()};
  } catch (const json::exception& e) {
    throw CorruptFile(e.what());
  }
}

// ---------------------------------------------------------------------------
// Track JSON

std::string track_to_json(std::span<const RoadSegment> segments) {
  json arr = json::array();
  for (const RoadSegment& seg : segments) {
    json j;
    switch (seg.kind) {
      case SegmentKind::Straight:
        j["kind"] = "straight";
        j["length"] = seg.length;
        break;
      case SegmentKind::LeftTurn:
        j["kind"] = "left";
        j["radius"] = seg.radius;
        j["angle"] = seg.angle;
        break;
      case SegmentKind::RightTurn:
        j["kind"] = "right";
        j["radius"] = seg.radius;
        j["angle"] = seg.angle;
        break;
    }
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<RoadSegment> track_from_json(const std::string& text) {
  const json arr = parse_json(text);
  if (!arr.is_array()) throw CorruptFile("track file is not a JSON array");
  std::vector<RoadSegment> segments;
  try {
    for (const json& j : arr) {
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "straight") {
        segments.push_back(RoadSegment::straight(j.at("length").get<double>()));
      } else if (kind == "left") {
        segments.push_back(RoadSegment::left_turn(j.at("radius").get<double>(),
                                                  j.at("angle").get<double>()));
      } else if (kind == "right") {
        segments.push_back(RoadSegment::right_turn(
            j.at("radius").get<double>(), j.at("angle").get<double>()));
      } else {
        throw CorruptFile("unknown segment kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw CorruptFile(e.what());
  }
  return segments;
}

// ---------------------------------------------------------------------------
// Windowed dataset binary

std::string windows_to_bytes(const WindowedDataset& ds) {
  std::string out{kWindowsMagic};
  const std::size_t n = ds.size();
  const auto d =
      n > 0 ? static_cast<std::uint32_t>(ds.X[0].cols()) : std::uint32_t{0};
  append_u32(out, static_cast<std::uint32_t>(n));
  append_u32(out, static_cast<std::uint32_t>(ds.t_wi));
  append_u32(out, static_cast<std::uint32_t>(ds.t_wo));
  append_u32(out, d);
  append_u32(out, static_cast<std::uint32_t>(static_cast<int>(ds.set_id)));
  append_u32(out, static_cast<std::uint32_t>(ds.stride));
  for (std::size_t i = 0; i < n; ++i) {
    append_u32(out,
               std::bit_cast<std::uint32_t>(
                   static_cast<std::int32_t>(ds.subject_ids[i])));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < ds.X[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < ds.X[i].cols(); ++c) {
        append_f32(out, ds.X[i](r, c));
      }
    }
    for (Eigen::Index r = 0; r < ds.Y[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < ds.Y[i].cols(); ++c) {
        append_f32(out, ds.Y[i](r, c));
      }
    }
  }
  append_u64(out, fnv1a(out));
  return out;
}

WindowedDataset windows_from_bytes(std::string_view bytes) {
  constexpr std::size_t kHeader = 4 + 6 * 4;
  if (bytes.size() < kHeader + 8) throw CorruptFile("truncated dataset file");
  if (bytes.substr(0, 4) != kWindowsMagic) {
    throw CorruptFile("bad dataset magic");
  }
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(
                  bytes[bytes.size() - 8 + static_cast<std::size_t>(i)]))
              << (8 * i);
  }
  if (fnv1a(bytes.substr(0, bytes.size() - 8)) != stored) {
    throw CorruptFile("dataset digest mismatch");
  }

  ByteReader in{bytes.substr(4, bytes.size() - 12)};
  const std::uint32_t n = in.u32();
  const std::uint32_t t_wi = in.u32();
  const std::uint32_t t_wo = in.u32();
  const std::uint32_t d = in.u32();
  const std::uint32_t set_id = in.u32();
  const std::uint32_t stride = in.u32();
  if (set_id < 1 || set_id > 5) throw CorruptFile("dataset set_id out of range");
  const std::size_t window_floats =
      static_cast<std::size_t>(t_wi) * d +
      static_cast<std::size_t>(t_wo) * static_cast<std::size_t>(kNumManoeuvres);
  const std::size_t expected = static_cast<std::size_t>(n) * 4 +
                               static_cast<std::size_t>(n) * window_floats * 4;
  if (in.bytes.size() - in.pos != expected) {
    throw CorruptFile("dataset size does not match its dimensions");
  }

  WindowedDataset ds;
  ds.t_wi = static_cast<int>(t_wi);
  ds.t_wo = static_cast<int>(t_wo);
  ds.stride = static_cast<int>(stride);
  ds.set_id = feature_set_from_id(static_cast<int>(set_id));
  ds.subject_ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.subject_ids.push_back(std::bit_cast<std::int32_t>(in.u32()));
  }
  ds.X.reserve(n);
  ds.Y.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Eigen::MatrixXd x(t_wi, d);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = in.f32();
    }
    Eigen::MatrixXd y(t_wo, kNumManoeuvres);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      for (Eigen::Index c = 0; c < y.cols(); ++c) y(r, c) = in.f32();
    }
    ds.X.push_back(std::move(x));
    ds.Y.push_back(std::move(y));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Model checkpoints

std::string checkpoint_to_json(const TrainedFamily& model) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["t_wi"] = model.t_wi;
  j["t_wo"] = model.t_wo;
  j["set_id"] = static_cast<int>(model.set_id);
  j["n_pre"] = model.n_pre;
  j["training_seed"] = model.training_seed;
  j["scaler"] = scaler_to_json(model.scaler);
  switch (model.family) {
    case ModelFamily::BiLstm: {
      j["kind"] = "bilstm";
      j["H"] = model.seq.hidden();
      j["d"] = model.seq.input();
      j["dropout_rate"] = model.seq.dropout_rate;
      json w;
      w["forward"] = cell_to_json(model.seq.forward_cell);
      w["backward"] = cell_to_json(model.seq.backward_cell);
      w["dense_w"] = matrix_to_json(model.seq.dense_w);
      w["dense_b"] = vector_to_json(model.seq.dense_b.col(0));
      j["weights"] = std::move(w);
      break;
    }
    case ModelFamily::Mlp: {
      j["kind"] = "mlp";
      j["H"] = static_cast<int>(model.mlp_id.W.front().rows());
      j["d"] = model.mlp_id.input();
      j["dropout_rate"] = 0.0;
      json w;
      w["identification"] = mlp_to_json(model.mlp_id);
      w["prediction"] = mlp_to_json(model.mlp_pred);
      j["weights"] = std::move(w);
      break;
    }
    case ModelFamily::ExtraTrees: {
      j["kind"] = "extra_trees";
      j["H"] = static_cast<int>(model.trees_id.trees.size());
      j["d"] = model.trees_id.n_features;
      j["dropout_rate"] = 0.0;
      json w;
      w["identification"] = forest_to_json(model.trees_id);
      w["prediction"] = forest_to_json(model.trees_pred);
      j["weights"] = std::move(w);
      break;
    }
  }
  return j.dump(2) + "\n";
}

TrainedFamily checkpoint_from_json(const std::string& text) {
  const json j = parse_json(text);
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatVersionMismatch("unsupported checkpoint format_version " +
                                  std::to_string(version));
    }
    TrainedFamily out;
    out.t_wi = j.at("t_wi").get<int>();
    out.t_wo = j.at("t_wo").get<int>();
    const int set_id = j.at("set_id").get<int>();
    if (set_id < 1 || set_id > 5) {
      throw CorruptFile("checkpoint set_id out of range");
    }
    out.set_id = feature_set_from_id(set_id);
    out.n_pre = j.at("n_pre").get<int>();
    out.training_seed = j.at("training_seed").get<std::uint64_t>();
    out.scaler = scaler_from_json(j.at("scaler"));
    const json& w = j.at("weights");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "bilstm") {
      out.family = ModelFamily::BiLstm;
      SequenceModel& seq = out.seq;
      seq.forward_cell = cell_from_json(w.at("forward"));
      seq.backward_cell = cell_from_json(w.at("backward"));
      seq.dense_w = matrix_from_json(w.at("dense_w"));
      seq.dense_b = vector_from_json(w.at("dense_b"));
      seq.dropout_rate = j.at("dropout_rate").get<double>();
      seq.scaler = out.scaler;
      seq.set_id = out.set_id;
      seq.t_wi = out.t_wi;
      seq.t_wo = out.t_wo;
      seq.training_seed = out.training_seed;
      const auto h = static_cast<Eigen::Index>(seq.hidden());
      if (seq.backward_cell.hidden != seq.forward_cell.hidden ||
          seq.backward_cell.input != seq.forward_cell.input ||
          seq.dense_w.rows() != 2 * h ||
          seq.dense_b.rows() != seq.dense_w.cols() ||
          j.at("H").get<int>() != seq.hidden() ||
          j.at("d").get<int>() != seq.input() || out.t_wi != out.t_wo) {
        throw CorruptFile("checkpoint shapes are inconsistent");
      }
    } else if (kind == "mlp") {
      out.family = ModelFamily::Mlp;
      out.mlp_id = mlp_from_json(w.at("identification"));
      out.mlp_pred = mlp_from_json(w.at("prediction"));
    } else if (kind == "extra_trees") {
      out.family = ModelFamily::ExtraTrees;
      out.trees_id = forest_from_json(w.at("identification"));
      out.trees_pred = forest_from_json(w.at("prediction"));
    } else {
      throw CorruptFile("unknown model kind '" + kind + "'");
    }
    return out;
  } catch (const json::exception& e) {
    throw CorruptFile(e.what());
  }
}

// ---------------------------------------------------------------------------
// Evaluation reports

std::string report_to_csv(const EvalReport& report) {
  std::string out{kReportHeader};
  out += '\n';
  for (const EvalCell& cell : report.cells) {
    out += cell.model_id;
    out += ',';
    out += std::to_string(cell.subject_id);
    out += ',';
    out += std::to_string(cell.two);
    out += ',';
    out += std::to_string(cell.manoeuvre);
    out += ',';
    out += format_double(cell.f1);
    out += ',';
    out += cell.known ? '1' : '0';
    out += '\n';
  }
  return out;
}

EvalReport report_from_csv(const std::string& text) {
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front() != kReportHeader) {
    throw CorruptFile("report CSV header mismatch");
  }
  EvalReport report;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string_view> fields = split(lines[i], ',');
    if (fields.size() != 6) {
      throw CorruptFile("report CSV row has " + std::to_string(fields.size()) +
                        " fields, wanted 6");
    }
    EvalCell cell;
    cell.model_id = std::string(fields[0]);
    cell.subject_id = static_cast<int>(parse_long(fields[1]));
    cell.two = static_cast<int>(parse_long(fields[2]));
    cell.manoeuvre = static_cast<int>(parse_long(fields[3]));
    cell.f1 = parse_double(fields[4]);
    if (fields[5] != "0" && fields[5] != "1") {
      throw CorruptFile("known flag must be 0 or 1");
    }
    cell.known = fields[5] == "1";
    report.cells.push_back(std::move(cell));
  }
  if (!report.cells.empty()) report.aggregates = aggregate_per_two(report);
  return report;
}

std::string aggregates_to_json(const EvalReport& report) {
  json j;
  j["test_id"] = report.test_id;
  json arr = json::array();
  for (const TwoAggregate& agg : report.aggregates) {
    json e;
    e["two"] = agg.two;
    e["mean"] = agg.mean;
    e["stddev"] = agg.stddev;
    e["lo"] = agg.lo;
    e["hi"] = agg.hi;
    arr.push_back(std::move(e));
  }
  j["per_two"] = std::move(arr);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Output manifest

std::string manifest_to_json(
    const std::map<std::string, std::string>& entries) {
  json j = json::object();
  for (const auto& [name, digest] : entries) j[name] = digest;
  return j.dump(2) + "\n";
}

std::map<std::string, std::string> manifest_from_json(const std::string& text) {
  const json j = parse_json(text);
  if (!j.is_object()) throw CorruptFile("manifest is not a JSON object");
  std::map<std::string, std::string> entries;
  try {
    for (const auto& [name, digest] : j.items()) {
      entries[name] = digest.get<std::string>();
    }
  } catch (const json::exception& e) {
    throw CorruptFile(e.what());
  }
  return entries;
}

}  // namespace mf
