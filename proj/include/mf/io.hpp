#ifndef MF_IO_HPP
#define MF_IO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mf/eval.hpp"
#include "mf/features.hpp"
#include "mf/sim.hpp"
#include "mf/track.hpp"

namespace mf {

// ---------------------------------------------------------------------------
// Raw file helpers

// Whole-file read. Throws IoError when the file cannot be opened or read.
std::string read_file(const std::filesystem::path& path);

// Writes a sibling temp file and renames it over the target, so a crash can
// never leave a half-written artifact behind. Throws IoError.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

// FNV-1a over raw bytes; hex form is 16 lowercase digits.
std::uint64_t fnv1a(std::string_view bytes);
std::string digest_hex(std::uint64_t digest);

// Shortest decimal form with 9 significant digits.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Session CSV and driver profile sidecar

// One row per timestep under the fixed header; floating point at 9
// significant digits, the label as its integer index.
std::string session_to_csv(const Session& session);

// Rebuilds rows from CSV text; profile and dt come from the sidecar.
// Throws CorruptFile on a header or field mismatch.
Session session_from_csv(const std::string& text, const DriverProfile& profile,
                         double dt);

std::string profile_to_json(const DriverProfile& profile, double dt);
std::pair<DriverProfile, double> profile_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Track JSON

// JSON array of segments: straights carry a length, turns a radius and an
// unsigned sweep angle, the direction implied by the kind string.
std::string track_to_json(std::span<const RoadSegment> segments);
std::vector<RoadSegment> track_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Windowed dataset binary

// Little-endian binary image: magic "MFW1", u32 dims (N, t_wi, t_wo, d),
// set_id, stride, per-window i32 subject ids, per-window f32 feature and
// one-hot label blocks, and a trailing u64 content digest.
std::string windows_to_bytes(const WindowedDataset& ds);

// Throws CorruptFile on bad magic, truncation, or a digest mismatch.
WindowedDataset windows_from_bytes(std::string_view bytes);

// ---------------------------------------------------------------------------
// Model checkpoints

// JSON envelope {format_version, kind, H, d, t_wi, t_wo, set_id, n_pre,
// dropout_rate, scaler, weights, training_seed}. The weights member holds
// named nested arrays; shallow families store their identification and
// prediction sub-models under one envelope with a model-kind tag.
std::string checkpoint_to_json(const TrainedFamily& model);

// Throws FormatVersionMismatch for an unknown format_version and CorruptFile
// for malformed JSON or inconsistent shapes.
TrainedFamily checkpoint_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Evaluation reports

// Cell-per-row CSV under the header model_id,subject_id,two,manoeuvre,f1,known.
std::string report_to_csv(const EvalReport& report);

// Rebuilds cells (test_id is carried by the file name, not the CSV) and
// recomputes aggregates. Throws CorruptFile on malformed text.
EvalReport report_from_csv(const std::string& text);

// Per-step aggregate summary {test_id, per_two: [{two, mean, stddev, lo, hi}]}.
std::string aggregates_to_json(const EvalReport& report);

// ---------------------------------------------------------------------------
// Output manifest

// Flat JSON object mapping output file names to hex content digests.
std::string manifest_to_json(const std::map<std::string, std::string>& entries);
std::map<std::string, std::string> manifest_from_json(const std::string& text);

}  // namespace mf

#endif  // MF_IO_HPP
