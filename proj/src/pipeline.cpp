#include "lts/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace lts {

namespace fs = std::filesystem;

PointCloud preprocess_session(const PointCloud& raw, const PipelineConfig& config) {
  const GroundSplit split = remove_ground_csf(raw, config.csf);
  const SorResult sor = remove_outliers_sor(split.offground, config.sor);
  return estimate_normals(sor.cloud, config.normals).cloud;
}

IcpResult register_session(const PointCloud& filtered, const PointCloud& reference, const PipelineConfig& config) {
  return icp_align_multistart(filtered, reference, config.icp, config.icp_starts);
}

LabelledCloud label_session(std::span<const RegisteredMap> maps, std::size_t k, const PipelineConfig& config) {
  return label_map(maps, LabellingParams{config.lambda, k});
}

io::BatchFile make_batch(const LabelledCloud& map, const PipelineConfig& config) {
  io::BatchFile batch;
  batch.tiling = config.tiling;
  batch.tiling.seed = config.seed;
  batch.lambda = config.lambda;
  batch.weights = config.weights;
  batch.source_points = map.size();
  batch.submaps = tile_submaps(map, batch.tiling);
  return batch;
}

ResolvedScores aggregate_predictions(const std::vector<io::SubmapPredictions>& preds, std::size_t map_size) {
  VoteAccumulator acc(map_size);
  for (const auto& p : preds) acc.add(p.source_indices, p.predictions);
  return resolve_votes(acc, map_size);
}

bool evaluable(const LabelledCloud& map) {
  const auto& gt = map.cloud.ground_truth;
  return std::find(gt.begin(), gt.end(), StabilityClass::kStable) != gt.end() &&
         std::find(gt.begin(), gt.end(), StabilityClass::kDynamic) != gt.end();
}

EvaluationReport evaluate_labels(const LabelledCloud& map, const PipelineConfig& config) {
  if (!map.cloud.has_ground_truth()) throw Error("map has no ground truth");
  return evaluate(map.labels, map.cloud.ground_truth, config.lambda);
}

std::vector<io::NamedReport> evaluate_predictions(std::span<const LabelledCloud> maps,
                                                  std::span<const ResolvedScores> scores, std::size_t reference,
                                                  const PipelineConfig& config,
                                                  std::optional<double> fixed_threshold) {
  if (maps.size() != scores.size()) throw Error("one score set per map required");
  if (reference >= maps.size()) throw Error("reference map out of range");
  for (const auto& m : maps)
    if (!m.cloud.has_ground_truth()) throw Error("map '" + m.cloud.frame_id + "' has no ground truth");
  if (!fixed_threshold) {
    const auto& ref = maps[reference];
    fixed_threshold = evaluate(scores[reference].scores, ref.cloud.ground_truth, config.lambda, std::nullopt,
                               ref.labels)
                          .optimal_threshold;
  }
  std::vector<io::NamedReport> reports;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const auto& m = maps[k];
    if (k != reference && !evaluable(m)) continue;
    reports.emplace_back(m.cloud.frame_id,
                         evaluate(scores[k].scores, m.cloud.ground_truth, config.lambda, fixed_threshold, m.labels));
  }
  return reports;
}

namespace {

template <typename F>
auto stage(const char* name, const std::string& session, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(std::string("stage ") + name + ", session " + session + ": " + e.what());
  }
}

}  // namespace

PipelineResult run_pipeline(const SessionManifest& manifest, const PipelineOptions& options) {
  manifest.validate();
  const PipelineConfig& config = manifest.config;
  const fs::path& out = options.out_dir;
  const auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  PipelineResult result;
  result.reference = manifest.reference_index();
  const std::size_t n = manifest.sessions.size();
  result.sessions.resize(n);

  for (std::size_t k = 0; k < n; ++k) {
    const auto& entry = manifest.sessions[k];
    auto& s = result.sessions[k];
    s.id = entry.id;
    log("preprocess " + entry.id);
    s.filtered = stage("preprocess", entry.id, [&] {
      PointCloud raw = io::read_ply(entry.cloud_path).cloud;
      raw.frame_id = entry.id;
      return preprocess_session(raw, config);
    });
    io::write_ply(out / "filtered" / (entry.id + ".ply"), s.filtered);
  }

  std::vector<RegisteredMap> registered;
  registered.reserve(n);
  const PointCloud& reference = result.sessions[result.reference].filtered;
  for (std::size_t k = 0; k < n; ++k) {
    auto& s = result.sessions[k];
    if (k == result.reference) {
      registered.push_back(RegisteredMap::reference(s.filtered));
    } else {
      log("register " + s.id);
      s.registration = stage("register", s.id, [&] { return register_session(s.filtered, reference, config); });
      registered.push_back(RegisteredMap::register_cloud(s.filtered, s.registration.transform));
    }
    io::write_registered_ply(out / "registered" / (s.id + ".ply"), registered.back());
  }

  nlohmann::json reg = nlohmann::json::array();
  for (const auto& s : result.sessions)
    reg.push_back({{"session", s.id},
                   {"to_reference", io::format_transform(s.registration.transform)},
                   {"residual_rmse", s.registration.residual_rmse},
                   {"iterations", s.registration.iterations},
                   {"stalled", s.registration.stalled}});
  {
    std::ofstream f(out / "registration.json", std::ios::binary);
    f << reg.dump(2) << '\n';
  }

  for (std::size_t k = 0; k < n; ++k) {
    auto& s = result.sessions[k];
    log("label " + s.id);
    s.labelled = stage("label", s.id, [&] { return label_session(registered, k, config); });
    io::write_ply(out / "labelled" / (s.id + ".ply"), s.labelled);
    const auto batch = stage("tile", s.id, [&] { return make_batch(s.labelled, config); });
    io::write_batch(out / "batches" / (s.id + ".txt"), batch);
    if (s.labelled.cloud.has_ground_truth() && !evaluable(s.labelled)) {
      log("skip evaluation of " + s.id + ": single ground-truth class");
    } else if (s.labelled.cloud.has_ground_truth()) {
      result.label_reports.emplace_back(s.id, stage("evaluate", s.id, [&] { return evaluate_labels(s.labelled, config); }));
    }
  }
  if (!result.label_reports.empty()) {
    io::write_report_table(out / "label_report.txt", result.label_reports);
    io::write_report_json(out / "label_report.json", result.label_reports);
  }

  if (options.predictions_dir) {
    std::vector<ResolvedScores> scores(n);
    std::vector<LabelledCloud> maps;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& s = result.sessions[k];
      scores[k] = stage("evaluate", s.id, [&] {
        return aggregate_predictions(io::read_predictions(*options.predictions_dir / (s.id + ".txt")),
                                     s.labelled.size());
      });
      maps.push_back(s.labelled);
    }
    result.prediction_reports = stage("evaluate", result.sessions[result.reference].id,
                                      [&] { return evaluate_predictions(maps, scores, result.reference, config); });
    io::write_report_table(out / "prediction_report.txt", result.prediction_reports);
    io::write_report_json(out / "prediction_report.json", result.prediction_reports);
  }
  return result;
}

}  // namespace lts
