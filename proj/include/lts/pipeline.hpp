#pragma once

#include "lts/config.hpp"
#include "lts/io.hpp"
#include "lts/metrics.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lts {

// Individual stages. The `pipeline` CLI command and the per-stage commands
// both go through these, so running the stages by hand reproduces the
// pipeline output exactly.

/// Ground removal, outlier removal and normal estimation of one raw session.
PointCloud preprocess_session(const PointCloud& raw, const PipelineConfig& config);

/// ICP of a filtered session onto the filtered reference session.
IcpResult register_session(const PointCloud& filtered, const PointCloud& reference, const PipelineConfig& config);

/// Labels map k of the registered set against all other maps.
LabelledCloud label_session(std::span<const RegisteredMap> maps, std::size_t k, const PipelineConfig& config);

io::BatchFile make_batch(const LabelledCloud& map, const PipelineConfig& config);

/// Mean-of-votes scores for every point of a map from per-submap predictions.
ResolvedScores aggregate_predictions(const std::vector<io::SubmapPredictions>& preds, std::size_t map_size);

/// True when the map's ground truth holds both classes, so a ROC exists.
bool evaluable(const LabelledCloud& map);

/// Label quality of a map against its ground truth.
EvaluationReport evaluate_labels(const LabelledCloud& map, const PipelineConfig& config);

/// Prediction quality of every map, thresholded at `fixed_threshold` or else
/// at the optimal threshold of map `reference`. Reports are named by frame id;
/// maps other than the reference with a single ground-truth class are left out.
std::vector<io::NamedReport> evaluate_predictions(std::span<const LabelledCloud> maps,
                                                  std::span<const ResolvedScores> scores, std::size_t reference,
                                                  const PipelineConfig& config,
                                                  std::optional<double> fixed_threshold = std::nullopt);

struct SessionOutcome {
  std::string id;
  PointCloud filtered;
  IcpResult registration;  // identity with zero iterations for the reference
  LabelledCloud labelled;
};

struct PipelineResult {
  std::size_t reference = 0;
  std::vector<SessionOutcome> sessions;
  std::vector<io::NamedReport> label_reports;       // when ground truth exists
  std::vector<io::NamedReport> prediction_reports;  // when predictions given
};

struct PipelineOptions {
  std::filesystem::path out_dir;
  /// Folder holding `<session id>.txt` prediction files, optional.
  std::optional<std::filesystem::path> predictions_dir;
  /// Progress messages, e.g. for the CLI. May be empty.
  std::function<void(const std::string&)> log;
};

/**
 * Runs every stage for all sessions of the manifest and writes:
 *
 *   filtered/<id>.ply      off-ground, outlier-free, with normals
 *   registered/<id>.ply    in the reference frame, transform in header
 *   labelled/<id>.ply      stability labels and d_max
 *   batches/<id>.txt       submap batch for the trainer
 *   registration.json      transforms and ICP diagnostics
 *   label_report.{txt,json}       label quality, if ground truth exists
 *   prediction_report.{txt,json}  thresholded predictions, if provided
 *
 * Errors are rethrown with the stage and session id.
 */
PipelineResult run_pipeline(const SessionManifest& manifest, const PipelineOptions& options);

}  // namespace lts
