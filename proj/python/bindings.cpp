#include "lts/pipeline.hpp"
#include "lts/synthetic.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace lts;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IndexArray = py::array_t<std::int64_t>;

std::vector<Vec3> to_points(const Array& a, const char* name = "points") {
  if (a.ndim() != 2 || a.shape(1) != 3) throw Error(std::string(name) + " must have shape (N, 3)");
  const auto r = a.unchecked<2>();
  std::vector<Vec3> out;
  out.reserve(r.shape(0));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out.emplace_back(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw Error("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

PointCloud to_cloud(const Array& points, const std::optional<Array>& normals = std::nullopt) {
  PointCloud c;
  c.positions = to_points(points);
  if (normals) c.normals = to_points(*normals, "normals");
  return c;
}

std::vector<StabilityClass> to_classes(const py::array_t<std::int64_t, py::array::forcecast>& a) {
  std::vector<StabilityClass> out;
  out.reserve(a.size());
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    const auto v = a.data()[i];
    if (v != 0 && v != 1) throw Error("classes must be 0 (stable) or 1 (dynamic)");
    out.push_back(static_cast<StabilityClass>(v));
  }
  return out;
}

Array from_points(const std::vector<Vec3>& pts) {
  Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int j = 0; j < 3; ++j) w(i, j) = pts[i][j];
  return out;
}

template <typename T>
py::array_t<T> from_vector(const std::vector<T>& v) {
  return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

IndexArray from_indices(const std::vector<std::size_t>& v) {
  std::vector<std::int64_t> w(v.begin(), v.end());
  return from_vector(w);
}

py::array_t<std::uint8_t> from_classes(const std::vector<StabilityClass>& v) {
  std::vector<std::uint8_t> w;
  for (auto c : v) w.push_back(static_cast<std::uint8_t>(c));
  return from_vector(w);
}

Array from_transform(const RigidTransform& t) {
  Array out({py::ssize_t{4}, py::ssize_t{4}});
  auto w = out.mutable_unchecked<2>();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) w(i, j) = i == 3 ? (j == 3 ? 1.0 : 0.0) : j == 3 ? t.translation[i] : t.rotation(i, j);
  return out;
}

RigidTransform to_transform(const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != 4 || a.shape(1) != 4) throw Error("transform must have shape (4, 4)");
  const auto r = a.unchecked<2>();
  RigidTransform t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) t.rotation(i, j) = r(i, j);
    t.translation[i] = r(i, 3);
  }
  t.validate(1e-6);
  return t;
}

WeightParams weight_params(double alpha, double epsilon, const std::string& density, std::size_t bins,
                           double bandwidth) {
  WeightParams p;
  p.alpha = alpha;
  p.epsilon = epsilon;
  if (density == "histogram") p.density = HistogramDensity{bins};
  else if (density == "kde") p.density = KernelDensity{bandwidth};
  else throw Error("density must be 'histogram' or 'kde'");
  return p;
}

py::dict report_dict(const EvaluationReport& r) {
  py::dict d;
  d["points"] = r.points;
  d["skipped"] = r.skipped;
  d["auc"] = r.auc;
  d["optimal_threshold"] = r.optimal_threshold;
  d["optimal_threshold_meters"] = r.optimal_threshold_meters;
  d["gmean"] = r.gmean;
  d["applied_threshold"] = r.applied_threshold;
  d["miou"] = r.miou;
  d["iou_stable"] = r.per_class_iou[0];
  d["iou_dynamic"] = r.per_class_iou[1];
  d["rmse"] = r.rmse ? py::cast(*r.rmse) : py::none();
  return d;
}

py::dict reports_dict(const std::vector<io::NamedReport>& reports) {
  py::dict d;
  for (const auto& [id, r] : reports) d[py::str(id)] = report_dict(r);
  return d;
}

}  // namespace

PYBIND11_MODULE(_lts, m) {
  m.doc() = "Long-term stability labelling of multi-session point clouds.";
  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def("stability_label", [](const Array& d, double lam) { return stability_label(to_vector(d), lam); },
        py::arg("distances"), py::arg("lam") = 0.5);
  m.def("label_to_distance", &label_to_distance, py::arg("label"), py::arg("lam") = 0.5);

  m.def(
      "remove_ground_csf",
      [](const Array& points, double cloth_resolution, int rigidness, int iterations, double class_threshold,
         double time_step) {
        CsfParams p{cloth_resolution, rigidness, iterations, class_threshold, time_step};
        const auto split = remove_ground_csf(to_cloud(points), p);
        return py::make_tuple(from_indices(split.offground_indices), from_indices(split.ground_indices));
      },
      py::arg("points"), py::arg("cloth_resolution") = 0.5, py::arg("rigidness") = 2, py::arg("iterations") = 500,
      py::arg("class_threshold") = 0.5, py::arg("time_step") = 0.65,
      "Returns (offground_indices, ground_indices).");

  m.def(
      "remove_outliers_sor",
      [](const Array& points, std::size_t k, double std_multiplier) {
        return from_indices(remove_outliers_sor(to_cloud(points), {k, std_multiplier}).kept_indices);
      },
      py::arg("points"), py::arg("k") = 12, py::arg("std_multiplier") = 1.0, "Indices of the kept points.");

  m.def(
      "estimate_normals",
      [](const Array& points, std::size_t k) { return from_points(estimate_normals(to_cloud(points), {k, {}}).cloud.normals); },
      py::arg("points"), py::arg("k") = 16);

  m.def(
      "icp_align",
      [](const Array& source, const Array& target, int max_iterations, double max_correspondence_dist,
         double convergence_eps, std::optional<Array> initial_guess, bool align_centroids,
         double refine_correspondence_dist, bool multistart) {
        IcpParams p;
        p.max_iterations = max_iterations;
        p.max_correspondence_dist = max_correspondence_dist;
        p.convergence_eps = convergence_eps;
        if (initial_guess) p.initial_guess = to_transform(*initial_guess);
        p.align_centroids = align_centroids;
        p.refine_correspondence_dist = refine_correspondence_dist;
        const auto src = to_cloud(source), dst = to_cloud(target);
        const IcpResult r = multistart ? icp_align_multistart(src, dst, p) : icp_align(src, dst, p);
        py::dict d;
        d["transform"] = from_transform(r.transform);
        d["residual_rmse"] = r.residual_rmse;
        d["iterations"] = r.iterations;
        d["stalled"] = r.stalled;
        d["accepted_residuals"] = from_vector(r.accepted_residuals);
        return d;
      },
      py::arg("source"), py::arg("target"), py::arg("max_iterations") = 50, py::arg("max_correspondence_dist") = 2.0,
      py::arg("convergence_eps") = 1e-5, py::arg("initial_guess") = py::none(), py::arg("align_centroids") = false,
      py::arg("refine_correspondence_dist") = 0.0, py::arg("multistart") = false);

  m.def(
      "label_maps",
      [](const std::vector<Array>& maps, double lam, std::size_t reference) {
        std::vector<RegisteredMap> reg;
        for (const auto& a : maps) reg.push_back(RegisteredMap::reference(to_cloud(a)));
        const auto l = label_map(reg, {lam, reference});
        return py::make_tuple(from_vector(l.labels), from_vector(l.d_max));
      },
      py::arg("maps"), py::arg("lam") = 0.5, py::arg("reference") = 0,
      "Labels maps[reference] against the others; all maps in one frame. Returns (labels, d_max).");

  m.def(
      "tile_submaps",
      [](const Array& points, const Array& labels, std::optional<Array> normals, double submap_size,
         double stride_fraction, std::size_t points_per_submap, std::size_t min_points, std::uint64_t seed) {
        LabelledCloud map;
        map.cloud = to_cloud(points, normals);
        map.labels = to_vector(labels);
        for (double l : map.labels) map.d_max.push_back(l < 1.0 ? label_to_distance(std::max(l, 0.0), 0.5) : 0.0);
        const TilingParams p{submap_size, stride_fraction, points_per_submap, min_points, seed};
        py::list out;
        for (const auto& sm : tile_submaps(map, p)) {
          py::dict d;
          d["positions"] = from_points(sm.positions);
          d["normals"] = sm.normals.empty() ? py::object(py::none()) : py::object(from_points(sm.normals));
          d["labels"] = from_vector(sm.labels);
          d["source_indices"] = from_indices(sm.source_indices);
          d["tile_origin"] = py::make_tuple(sm.tile_origin.x(), sm.tile_origin.y());
          d["center"] = py::make_tuple(sm.center.x(), sm.center.y());
          out.append(d);
        }
        return out;
      },
      py::arg("points"), py::arg("labels"), py::arg("normals") = py::none(), py::arg("submap_size") = 10.0,
      py::arg("stride_fraction") = 0.5, py::arg("points_per_submap") = 4096, py::arg("min_points") = 64,
      py::arg("seed") = 0);

  m.def(
      "resolve_votes",
      [](std::size_t map_size, const std::vector<std::vector<std::size_t>>& source_indices,
         const std::vector<std::vector<double>>& predictions) {
        if (source_indices.size() != predictions.size()) throw Error("one prediction list per submap required");
        VoteAccumulator acc(map_size);
        for (std::size_t s = 0; s < predictions.size(); ++s) acc.add(source_indices[s], predictions[s]);
        return from_vector(resolve_votes(acc, map_size).scores);
      },
      py::arg("map_size"), py::arg("source_indices"), py::arg("predictions"),
      "Mean vote per point, NaN where no submap covered it.");

  m.def(
      "dense_weights",
      [](const Array& labels, double alpha, double epsilon, const std::string& density, std::size_t bins,
         double bandwidth) {
        return from_vector(dense_weights(to_vector(labels), weight_params(alpha, epsilon, density, bins, bandwidth)));
      },
      py::arg("labels"), py::arg("alpha") = 1.0, py::arg("epsilon") = 1e-6, py::arg("density") = "histogram",
      py::arg("bins") = 100, py::arg("bandwidth") = 0.05);

  m.def(
      "weighted_rmse",
      [](const Array& pred, const Array& truth, const Array& w) {
        return weighted_rmse(to_vector(pred), to_vector(truth), to_vector(w));
      },
      py::arg("pred"), py::arg("truth"), py::arg("weights"));

  using Classes = py::array_t<std::int64_t, py::array::forcecast>;
  m.def(
      "roc_curve",
      [](const Array& scores, const Classes& truth) {
        const auto c = roc_curve(to_vector(scores), to_classes(truth));
        std::vector<double> th, tpr, fpr;
        for (const auto& p : c.points) {
          th.push_back(p.threshold);
          tpr.push_back(p.tpr);
          fpr.push_back(p.fpr);
        }
        return py::make_tuple(from_vector(th), from_vector(tpr), from_vector(fpr));
      },
      py::arg("scores"), py::arg("truth"), "Returns (thresholds, tpr, fpr); truth is 1 for dynamic.");
  m.def(
      "auc", [](const Array& scores, const Classes& truth) { return auc(roc_curve(to_vector(scores), to_classes(truth))); },
      py::arg("scores"), py::arg("truth"));
  m.def(
      "optimal_threshold",
      [](const Array& scores, const Classes& truth) {
        const auto g = optimal_threshold_gmean(roc_curve(to_vector(scores), to_classes(truth)));
        return py::make_tuple(g.threshold, g.gmean);
      },
      py::arg("scores"), py::arg("truth"), "G-mean optimal (threshold, gmean).");
  m.def(
      "miou",
      [](const Classes& pred, const Classes& truth) {
        const auto r = miou(to_classes(pred), to_classes(truth));
        return py::make_tuple(r.miou, py::make_tuple(r.per_class[0], r.per_class[1]));
      },
      py::arg("pred"), py::arg("truth"), "Returns (miou, (iou_stable, iou_dynamic)).");
  m.def(
      "evaluate",
      [](const Array& scores, const Classes& truth, double lam, std::optional<double> threshold) {
        return report_dict(evaluate(to_vector(scores), to_classes(truth), lam, threshold));
      },
      py::arg("scores"), py::arg("truth"), py::arg("lam") = 0.5, py::arg("threshold") = py::none());

  m.def(
      "generate_scene",
      [](std::size_t sessions, std::size_t poles, std::size_t trees, std::size_t walls, std::size_t cars,
         std::size_t ghost_trails, double noise, double density, std::pair<double, double> extent,
         std::uint64_t seed) {
        SceneSpec spec;
        spec.sessions = sessions;
        spec.poles = poles;
        spec.trees = trees;
        spec.walls = walls;
        spec.cars = cars;
        spec.ghost_trails = ghost_trails;
        spec.sensor_noise_sigma = noise;
        spec.point_density = density;
        spec.extent = {extent.first, extent.second};
        spec.seed = seed;
        const auto b = generate_scene(spec);
        py::list out;
        for (std::size_t k = 0; k < b.sessions.size(); ++k) {
          py::dict d;
          d["positions"] = from_points(b.sessions[k].positions);
          d["ground_truth"] = from_classes(b.sessions[k].ground_truth);
          d["ground_mask"] = from_vector(b.ground_mask[k]);
          d["to_reference"] = from_transform(b.to_reference(k));
          out.append(d);
        }
        return out;
      },
      py::arg("sessions") = 5, py::arg("poles") = 4, py::arg("trees") = 2, py::arg("walls") = 2, py::arg("cars") = 6,
      py::arg("ghost_trails") = 2, py::arg("noise") = 0.01, py::arg("density") = 30.0,
      py::arg("extent") = std::pair{40.0, 30.0}, py::arg("seed") = 0,
      "One dict per session: positions, ground_truth, ground_mask and the true to_reference transform.");

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
         std::optional<std::filesystem::path> predictions_dir) {
        PipelineOptions opts;
        opts.out_dir = out_dir;
        opts.predictions_dir = std::move(predictions_dir);
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(io::read_manifest(manifest), opts);
        }
        py::dict d;
        d["label_reports"] = reports_dict(r.label_reports);
        d["prediction_reports"] = reports_dict(r.prediction_reports);
        py::dict reg;
        for (const auto& s : r.sessions) reg[py::str(s.id)] = from_transform(s.registration.transform);
        d["to_reference"] = reg;
        return d;
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("predictions_dir") = py::none());
}
