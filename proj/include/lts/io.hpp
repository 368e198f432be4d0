#pragma once

#include "lts/config.hpp"
#include "lts/labelling.hpp"
#include "lts/metrics.hpp"
#include "lts/registration.hpp"
#include "lts/tiling.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lts::io {

/// Raised for malformed input files; the message carries path and line.
class ParseError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// PLY (ASCII). Vertex properties x y z [nx ny nz] [label] [dmax] [gt] [ground].
// Doubles are written in shortest round-trip form, so re-reading is exact.

struct PlyData {
  PointCloud cloud;
  std::vector<double> labels;
  std::vector<double> d_max;
  std::vector<std::uint8_t> ground_mask;
  std::vector<std::pair<std::string, std::string>> comments;  // key, value

  std::optional<std::string> comment(const std::string& key) const;
};

PlyData read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const PlyData& data);

void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
void write_ply(const std::filesystem::path& path, const LabelledCloud& cloud);

/// Registered maps carry their transform as a `to_reference` comment.
void write_registered_ply(const std::filesystem::path& path, const RegisteredMap& map);
RegisteredMap read_registered_ply(const std::filesystem::path& path);

LabelledCloud to_labelled(PlyData data);

std::string format_transform(const RigidTransform& t);
RigidTransform parse_transform(const std::string& text);

// ---------------------------------------------------------------------------
// Submap batch file consumed by the trainer.
//
//   lts_batch 1
//   <key> <value>            (tiling, lambda, alpha, epsilon, density, seed)
//   layout x y z nx ny nz label
//   submaps <M>
//   end_header
//   submap <i> <origin_x> <origin_y> <center_x> <center_y>
//   indices <s_0> ... <s_{P-1}>
//   <x> <y> <z> <nx> <ny> <nz> <label>      (P rows)

struct BatchFile {
  TilingParams tiling;
  double lambda = 0.5;
  WeightParams weights;
  std::size_t source_points = 0;
  std::vector<Submap> submaps;
};

void write_batch(const std::filesystem::path& path, const BatchFile& batch);
BatchFile read_batch(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Per-submap predictions returned by the trainer.
//
//   lts_predictions 1
//   submaps <M>
//   points_per_submap <P>
//   end_header
//   submap <i>
//   <source_index> <prediction>             (P rows)

struct SubmapPredictions {
  std::vector<std::size_t> source_indices;
  std::vector<double> predictions;
};

void write_predictions(const std::filesystem::path& path, const std::vector<SubmapPredictions>& preds);
std::vector<SubmapPredictions> read_predictions(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifest (JSON). Relative cloud paths resolve against the manifest folder.

SessionManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const SessionManifest& manifest);

// ---------------------------------------------------------------------------
// Evaluation reports: aligned text table and JSON.

using NamedReport = std::pair<std::string, EvaluationReport>;

std::string format_report_table(const std::vector<NamedReport>& reports);
void write_report_table(const std::filesystem::path& path, const std::vector<NamedReport>& reports);
void write_report_json(const std::filesystem::path& path, const std::vector<NamedReport>& reports);
std::vector<NamedReport> read_report_json(const std::filesystem::path& path);

}  // namespace lts::io
