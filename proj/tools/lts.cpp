// lts: command-line driver for the long-term stability labelling pipeline.

#include "lts/io.hpp"
#include "lts/pipeline.hpp"
#include "lts/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lts;

namespace {

// Values of --config are loaded before the other flags are parsed, so
// explicit flags override the manifest.
std::optional<std::string> find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return argv[i + 1];
    if (std::strncmp(argv[i], "--config=", 9) == 0) return std::string(argv[i] + 9);
  }
  return std::nullopt;
}

void add_config_flag(CLI::App* cmd) {
  cmd->add_option("--config", "manifest whose parameters are used as defaults")->check(CLI::ExistingFile);
}

void add_csf_flags(CLI::App* cmd, CsfParams& p) {
  cmd->add_option("--csf-resolution", p.cloth_resolution, "cloth grid spacing (m)")->capture_default_str();
  cmd->add_option("--csf-rigidness", p.rigidness, "cloth rigidness 1..3")->capture_default_str();
  cmd->add_option("--csf-iterations", p.iterations, "maximum cloth iterations")->capture_default_str();
  cmd->add_option("--csf-threshold", p.class_threshold, "ground distance to cloth (m)")->capture_default_str();
  cmd->add_option("--csf-time-step", p.time_step, "cloth time step")->capture_default_str();
}

void add_sor_flags(CLI::App* cmd, SorParams& p) {
  cmd->add_option("--sor-k", p.k, "neighbours per point")->capture_default_str();
  cmd->add_option("--sor-std", p.std_multiplier, "standard deviation multiplier")->capture_default_str();
}

void add_normal_flags(CLI::App* cmd, NormalParams& p) {
  cmd->add_option("--normals-k", p.k, "neighbours per normal")->capture_default_str();
}

void add_icp_flags(CLI::App* cmd, PipelineConfig& c) {
  cmd->add_option("--icp-iterations", c.icp.max_iterations)->capture_default_str();
  cmd->add_option("--icp-max-dist", c.icp.max_correspondence_dist, "correspondence gate (m)")->capture_default_str();
  cmd->add_option("--icp-refine-dist", c.icp.refine_correspondence_dist, "second pass gate, 0 disables (m)")
      ->capture_default_str();
  cmd->add_option("--icp-eps", c.icp.convergence_eps, "convergence threshold (m)")->capture_default_str();
  cmd->add_option("--icp-align-centroids", c.icp.align_centroids)->capture_default_str();
  cmd->add_option("--icp-yaw-offsets", c.icp_starts.yaw_offsets_deg, "start yaw offsets (deg)")
      ->capture_default_str();
  cmd->add_option("--icp-shift-offsets", c.icp_starts.shift_offsets, "start x/y shifts (m)")->capture_default_str();
  cmd->add_option("--icp-accept", c.icp_starts.accept_fraction, "inlier fraction that ends the search")
      ->capture_default_str();
}

void add_lambda_flag(CLI::App* cmd, PipelineConfig& c) {
  cmd->add_option("--lambda", c.lambda, "label decay rate (1/m)")->capture_default_str();
}

void add_tiling_flags(CLI::App* cmd, TilingParams& p) {
  cmd->add_option("--submap-size", p.submap_size_xy, "submap edge (m)")->capture_default_str();
  cmd->add_option("--stride-fraction", p.stride_fraction)->capture_default_str();
  cmd->add_option("--points-per-submap", p.points_per_submap)->capture_default_str();
  cmd->add_option("--min-points", p.min_points, "tiles with fewer points are skipped")->capture_default_str();
}

struct DensityFlags {
  std::string kind;
  std::size_t bins = HistogramDensity{}.bins;
  double bandwidth = KernelDensity{}.bandwidth;
};

void add_weight_flags(CLI::App* cmd, WeightParams& p, DensityFlags& d) {
  cmd->add_option("--alpha", p.alpha, "weight exponent")->capture_default_str();
  cmd->add_option("--weight-epsilon", p.epsilon)->capture_default_str();
  cmd->add_option("--density", d.kind, "histogram or kde")->check(CLI::IsMember({"histogram", "kde"}));
  cmd->add_option("--bins", d.bins, "histogram bins")->capture_default_str();
  cmd->add_option("--bandwidth", d.bandwidth, "kde bandwidth")->capture_default_str();
}

void apply_density(WeightParams& p, const DensityFlags& d) {
  if (d.kind == "histogram") p.density = HistogramDensity{d.bins};
  if (d.kind == "kde") p.density = KernelDensity{d.bandwidth};
}

void add_seed_flag(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "random seed")->capture_default_str();
}

std::string session_id(const fs::path& path, const std::string& given) {
  return given.empty() ? path.stem().string() : given;
}

template <typename F>
void stage(const char* name, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    throw Error(std::string("stage ") + name + ": " + e.what());
  }
}

void print_reports(const std::vector<io::NamedReport>& reports) { std::cout << io::format_report_table(reports); }

}  // namespace

int main(int argc, char** argv) {
  PipelineConfig config;
  try {
    if (auto path = find_config(argc, argv)) config = io::read_manifest(*path).config;
  } catch (const std::exception& e) {
    std::cerr << "lts: " << e.what() << '\n';
    return 1;
  }

  CLI::App app{"Long-term stability labelling of multi-session point cloud maps"};
  app.require_subcommand(1);
  app.fallthrough();
  DensityFlags density;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-session scene");
  SceneSpec scene;
  fs::path synth_out;
  synth->add_option("--out", synth_out, "output folder")->required();
  synth->add_option("--sessions", scene.sessions)->capture_default_str();
  synth->add_option("--poles", scene.poles)->capture_default_str();
  synth->add_option("--trees", scene.trees)->capture_default_str();
  synth->add_option("--walls", scene.walls)->capture_default_str();
  synth->add_option("--cars", scene.cars)->capture_default_str();
  synth->add_option("--ghosts", scene.ghost_trails)->capture_default_str();
  synth->add_option("--noise", scene.sensor_noise_sigma, "sensor noise sigma (m)")->capture_default_str();
  synth->add_option("--density", scene.point_density, "points per m^2")->capture_default_str();
  synth->add_option("--max-rotation", scene.max_rotation_deg, "session frame rotation (deg)")->capture_default_str();
  synth->add_option("--max-translation", scene.max_translation, "session frame offset (m)")->capture_default_str();
  add_seed_flag(synth, scene.seed);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "ground removal, outlier removal and normals");
  fs::path pre_in, pre_out;
  std::string pre_id;
  pre->add_option("input", pre_in, "raw session PLY")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "filtered PLY")->required();
  pre->add_option("--id", pre_id, "session id (default: file stem)");
  add_config_flag(pre);
  add_csf_flags(pre, config.csf);
  add_sor_flags(pre, config.sor);
  add_normal_flags(pre, config.normals);

  // register
  auto* reg = app.add_subcommand("register", "align a filtered session to the reference session");
  fs::path reg_in, reg_target, reg_out;
  reg->add_option("input", reg_in, "filtered session PLY")->required()->check(CLI::ExistingFile);
  reg->add_option("--target", reg_target, "filtered reference PLY (omit for the reference itself)")
      ->check(CLI::ExistingFile);
  reg->add_option("--out", reg_out, "registered PLY")->required();
  add_config_flag(reg);
  add_icp_flags(reg, config);

  // label
  auto* lab = app.add_subcommand("label", "stability labels for every registered map");
  std::vector<fs::path> lab_in;
  fs::path lab_out;
  lab->add_option("maps", lab_in, "registered PLYs")->required()->check(CLI::ExistingFile);
  lab->add_option("--out-dir", lab_out, "folder for labelled PLYs")->required();
  add_config_flag(lab);
  add_lambda_flag(lab, config);

  // tile
  auto* tile = app.add_subcommand("tile", "cut a labelled map into fixed-size submaps");
  fs::path tile_in, tile_out;
  tile->add_option("input", tile_in, "labelled PLY")->required()->check(CLI::ExistingFile);
  tile->add_option("--out", tile_out, "batch file")->required();
  add_config_flag(tile);
  add_tiling_flags(tile, config.tiling);
  add_weight_flags(tile, config.weights, density);
  add_lambda_flag(tile, config);
  add_seed_flag(tile, config.seed);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score labels or predictions against ground truth");
  std::vector<fs::path> ev_in;
  fs::path ev_out;
  std::optional<fs::path> ev_pred;
  std::optional<double> ev_threshold;
  std::string ev_reference;
  ev->add_option("maps", ev_in, "labelled PLYs with ground truth")->required()->check(CLI::ExistingFile);
  ev->add_option("--out-dir", ev_out, "folder for the report table and JSON");
  ev->add_option("--predictions", ev_pred, "folder of <id>.txt prediction files")->check(CLI::ExistingDirectory);
  ev->add_option("--threshold", ev_threshold, "fixed decision threshold for predictions");
  ev->add_option("--reference", ev_reference, "id of the map that picks the threshold (default: first)");
  add_config_flag(ev);
  add_lambda_flag(ev, config);

  // threshold
  auto* thr = app.add_subcommand("threshold", "G-mean optimal threshold of a labelled map");
  fs::path thr_in;
  std::optional<fs::path> thr_pred;
  thr->add_option("input", thr_in, "labelled PLY with ground truth")->required()->check(CLI::ExistingFile);
  thr->add_option("--predictions", thr_pred, "prediction file to score instead of the labels")
      ->check(CLI::ExistingFile);
  add_config_flag(thr);
  add_lambda_flag(thr, config);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "run every stage from a session manifest");
  fs::path pipe_manifest, pipe_out;
  std::optional<fs::path> pipe_pred;
  std::optional<std::uint64_t> pipe_seed;
  pipe->add_option("manifest", pipe_manifest, "session manifest (JSON)")->required()->check(CLI::ExistingFile);
  pipe->add_option("--out-dir", pipe_out, "output folder")->required();
  pipe->add_option("--predictions", pipe_pred, "folder of <id>.txt prediction files")
      ->check(CLI::ExistingDirectory);
  pipe->add_option("--seed", pipe_seed, "override the manifest seed");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no progress messages");

  CLI11_PARSE(app, argc, argv);
  apply_density(config.weights, density);

  try {
    if (*synth) {
      stage("synth", [&] {
        const SessionBundle bundle = generate_scene(scene);
        fs::create_directories(synth_out / "sessions");
        SessionManifest manifest;
        manifest.config.seed = scene.seed;
        nlohmann::json truth = nlohmann::json::object();
        for (std::size_t k = 0; k < bundle.sessions.size(); ++k) {
          const std::string id = "s" + std::to_string(k);
          io::PlyData data;
          data.cloud = bundle.sessions[k];
          data.cloud.frame_id = id;
          data.ground_mask = bundle.ground_mask[k];
          data.comments.emplace_back("seed", std::to_string(scene.seed));
          io::write_ply(synth_out / "sessions" / (id + ".ply"), data);
          manifest.sessions.push_back({id, "sessions/" + id + ".ply", k == 0 ? SessionRole::kReference
                                                                                : SessionRole::kOther});
          truth[id] = io::format_transform(bundle.to_reference(k));
        }
        io::write_manifest(synth_out / "manifest.json", manifest);
        std::ofstream(synth_out / "truth.json") << truth.dump(2) << '\n';
        if (!quiet) std::cerr << "wrote " << bundle.sessions.size() << " sessions to " << synth_out << '\n';
      });
    } else if (*pre) {
      stage("preprocess", [&] {
        config.validate();
        PointCloud raw = io::read_ply(pre_in).cloud;
        raw.frame_id = session_id(pre_in, pre_id);
        io::write_ply(pre_out, preprocess_session(raw, config));
      });
    } else if (*reg) {
      stage("register", [&] {
        config.validate();
        const PointCloud source = io::read_ply(reg_in).cloud;
        if (reg_target.empty()) {
          io::write_registered_ply(reg_out, RegisteredMap::reference(source));
          return;
        }
        const IcpResult r = register_session(source, io::read_ply(reg_target).cloud, config);
        io::write_registered_ply(reg_out, RegisteredMap::register_cloud(source, r.transform));
        if (!quiet)
          std::cerr << "rmse " << r.residual_rmse << " iterations " << r.iterations << (r.stalled ? " stalled" : "")
                    << '\n';
      });
    } else if (*lab) {
      stage("label", [&] {
        config.validate();
        std::vector<RegisteredMap> maps;
        for (const auto& p : lab_in) maps.push_back(io::read_registered_ply(p));
        fs::create_directories(lab_out);
        for (std::size_t k = 0; k < maps.size(); ++k)
          io::write_ply(lab_out / lab_in[k].filename(), label_session(maps, k, config));
      });
    } else if (*tile) {
      stage("tile", [&] {
        config.validate();
        const LabelledCloud map = io::to_labelled(io::read_ply(tile_in));
        io::write_batch(tile_out, make_batch(map, config));
      });
    } else if (*ev) {
      stage("evaluate", [&] {
        config.validate();
        std::vector<LabelledCloud> maps;
        for (const auto& p : ev_in) {
          maps.push_back(io::to_labelled(io::read_ply(p)));
          if (maps.back().cloud.frame_id.empty()) maps.back().cloud.frame_id = p.stem().string();
        }
        std::vector<io::NamedReport> reports;
        if (ev_pred) {
          std::size_t reference = 0;
          if (!ev_reference.empty()) {
            while (reference < maps.size() && maps[reference].cloud.frame_id != ev_reference) ++reference;
            if (reference == maps.size()) throw Error("unknown reference map '" + ev_reference + "'");
          }
          std::vector<ResolvedScores> scores;
          for (const auto& m : maps)
            scores.push_back(aggregate_predictions(io::read_predictions(*ev_pred / (m.cloud.frame_id + ".txt")),
                                                   m.size()));
          reports = evaluate_predictions(maps, scores, reference, config, ev_threshold);
        } else {
          for (const auto& m : maps) {
            if (m.cloud.has_ground_truth() && !evaluable(m)) {
              if (!quiet) std::cerr << "skip " << m.cloud.frame_id << ": single ground-truth class\n";
              continue;
            }
            reports.emplace_back(m.cloud.frame_id, evaluate_labels(m, config));
          }
        }
        print_reports(reports);
        if (!ev_out.empty()) {
          const std::string stem = ev_pred ? "prediction_report" : "label_report";
          fs::create_directories(ev_out);
          io::write_report_table(ev_out / (stem + ".txt"), reports);
          io::write_report_json(ev_out / (stem + ".json"), reports);
        }
      });
    } else if (*thr) {
      stage("threshold", [&] {
        config.validate();
        const LabelledCloud map = io::to_labelled(io::read_ply(thr_in));
        if (!map.cloud.has_ground_truth()) throw Error("map has no ground truth");
        std::vector<double> scores = map.labels;
        if (thr_pred) scores = aggregate_predictions(io::read_predictions(*thr_pred), map.size()).scores;
        const EvaluationReport r = evaluate(scores, map.cloud.ground_truth, config.lambda);
        std::printf("threshold %.6f\nthreshold_m %.6f\ngmean %.6f\nauc %.6f\n", r.optimal_threshold,
                    r.optimal_threshold_meters, r.gmean, r.auc);
      });
    } else if (*pipe) {
      SessionManifest manifest = io::read_manifest(pipe_manifest);
      if (pipe_seed) manifest.config.seed = *pipe_seed;
      PipelineOptions options;
      options.out_dir = pipe_out;
      options.predictions_dir = pipe_pred;
      if (!quiet) options.log = [](const std::string& m) { std::cerr << m << '\n'; };
      const PipelineResult result = run_pipeline(manifest, options);
      if (!result.label_reports.empty()) print_reports(result.label_reports);
      if (!result.prediction_reports.empty()) print_reports(result.prediction_reports);
    }
  } catch (const std::exception& e) {
    std::cerr << "lts: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
