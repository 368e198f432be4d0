#include "lts/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lts::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string num(std::uint64_t v) { return std::to_string(v); }

std::vector<std::string_view> split(std::string&&) = delete;

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

// Line-aware reader that prefixes every error with path:line.
class LineReader {
public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw ParseError(path.string() + ": cannot open file");
  }

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::string expect_line(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("unexpected end of file, expected ") + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path_.string() + ":" + std::to_string(line_no_) + ": " + msg);
  }

  double to_double(std::string_view tok) const {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      fail("malformed number '" + std::string(tok) + "'");
    if (std::isnan(v)) fail("NaN value");
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }

  std::uint64_t to_uint(std::string_view tok) const {
    std::uint64_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      fail("malformed integer '" + std::string(tok) + "'");
    return v;
  }

private:
  fs::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// PLY

std::optional<std::string> PlyData::comment(const std::string& key) const {
  for (const auto& [k, v] : comments)
    if (k == key) return v;
  return std::nullopt;
}

PlyData read_ply(const fs::path& path) {
  LineReader r(path);
  if (r.expect_line("ply magic") != "ply") r.fail("missing 'ply' magic");

  PlyData data;
  std::vector<std::string> props;
  std::size_t vertex_count = 0;
  bool in_vertex = false, seen_vertex = false;
  for (;;) {
    const std::string line = r.expect_line("end_header");
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") r.fail("only ascii PLY is supported");
    } else if (tok[0] == "comment") {
      if (tok.size() >= 2) {
        const auto rest = std::string_view(line).substr(static_cast<std::size_t>(tok[1].data() - line.data()) + tok[1].size());
        const auto value = split(rest);
        std::string joined;
        for (std::size_t i = 0; i < value.size(); ++i) joined += (i ? " " : "") + std::string(value[i]);
        data.comments.emplace_back(std::string(tok[1]), joined);
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) r.fail("malformed element line");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (seen_vertex) r.fail("duplicate vertex element");
        seen_vertex = true;
        vertex_count = r.to_uint(tok[2]);
      } else if (!seen_vertex) {
        r.fail("vertex element must come first");
      }
    } else if (tok[0] == "property") {
      if (tok.size() < 3) r.fail("malformed property line");
      if (tok[1] == "list") {
        if (in_vertex) r.fail("list properties on vertices are not supported");
      } else if (in_vertex) {
        props.emplace_back(tok[2]);
      }
    } else if (tok[0] != "obj_info") {
      r.fail("unknown header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!seen_vertex) r.fail("missing vertex element");

  const auto find = [&](const char* name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  for (auto [idx, name] : {std::pair{ix, "x"}, std::pair{iy, "y"}, std::pair{iz, "z"}})
    if (idx < 0) r.fail(std::string("missing required property '") + name + "'");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
  if (!has_normals && (inx >= 0 || iny >= 0 || inz >= 0)) r.fail("incomplete normal properties");
  const int ilabel = find("label"), idmax = find("dmax"), igt = find("gt"), iground = find("ground");

  if (auto id = data.comment("frame_id")) data.cloud.frame_id = *id;
  data.cloud.positions.reserve(vertex_count);
  std::string line;
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!r.next(line)) r.fail("expected " + std::to_string(vertex_count) + " vertices, got " + std::to_string(v));
    const auto tok = split(line);
    if (tok.size() < props.size()) r.fail("vertex row has too few values");
    data.cloud.positions.emplace_back(r.to_double(tok[ix]), r.to_double(tok[iy]), r.to_double(tok[iz]));
    if (has_normals) data.cloud.normals.emplace_back(r.to_double(tok[inx]), r.to_double(tok[iny]), r.to_double(tok[inz]));
    if (ilabel >= 0) data.labels.push_back(r.to_double(tok[ilabel]));
    if (idmax >= 0) data.d_max.push_back(r.to_double(tok[idmax]));
    if (igt >= 0) {
      const auto c = r.to_uint(tok[igt]);
      if (c > 1) r.fail("ground truth class must be 0 or 1");
      data.cloud.ground_truth.push_back(static_cast<StabilityClass>(c));
    }
    if (iground >= 0) data.ground_mask.push_back(static_cast<std::uint8_t>(r.to_uint(tok[iground]) != 0));
  }
  return data;
}

void write_ply(const fs::path& path, const PlyData& data) {
  const PointCloud& c = data.cloud;
  const std::size_t n = c.size();
  if ((!data.labels.empty() && data.labels.size() != n) || (!data.d_max.empty() && data.d_max.size() != n) ||
      (!data.ground_mask.empty() && data.ground_mask.size() != n))
    throw Error("PLY channel sizes do not match point count");
  c.validate();

  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n";
  if (!c.frame_id.empty()) out << "comment frame_id " << c.frame_id << '\n';
  for (const auto& [k, v] : data.comments)
    if (k != "frame_id") out << "comment " << k << ' ' << v << '\n';
  out << "element vertex " << n << '\n';
  out << "property double x\nproperty double y\nproperty double z\n";
  if (c.has_normals()) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (!data.labels.empty()) out << "property double label\n";
  if (!data.d_max.empty()) out << "property double dmax\n";
  if (c.has_ground_truth()) out << "property uchar gt\n";
  if (!data.ground_mask.empty()) out << "property uchar ground\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = c.positions[i];
    out << num(p.x()) << ' ' << num(p.y()) << ' ' << num(p.z());
    if (c.has_normals()) {
      const Vec3& nn = c.normals[i];
      out << ' ' << num(nn.x()) << ' ' << num(nn.y()) << ' ' << num(nn.z());
    }
    if (!data.labels.empty()) out << ' ' << num(data.labels[i]);
    if (!data.d_max.empty()) out << ' ' << num(data.d_max[i]);
    if (c.has_ground_truth()) out << ' ' << static_cast<int>(c.ground_truth[i]);
    if (!data.ground_mask.empty()) out << ' ' << static_cast<int>(data.ground_mask[i]);
    out << '\n';
  }
  auto file = open_out(path);
  file << out.str();
}

void write_ply(const fs::path& path, const PointCloud& cloud) {
  PlyData data;
  data.cloud = cloud;
  write_ply(path, data);
}

void write_ply(const fs::path& path, const LabelledCloud& cloud) {
  PlyData data;
  data.cloud = cloud.cloud;
  data.labels = cloud.labels;
  data.d_max = cloud.d_max;
  write_ply(path, data);
}

std::string format_transform(const RigidTransform& t) {
  std::string s;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s += num(t.rotation(r, c)) + ' ';
  s += num(t.translation.x()) + ' ' + num(t.translation.y()) + ' ' + num(t.translation.z());
  return s;
}

RigidTransform parse_transform(const std::string& text) {
  const auto tok = split(text);
  if (tok.size() != 12) throw ParseError("transform needs 12 numbers, got " + std::to_string(tok.size()));
  double v[12];
  for (std::size_t i = 0; i < 12; ++i) {
    const auto res = std::from_chars(tok[i].data(), tok[i].data() + tok[i].size(), v[i]);
    if (res.ec != std::errc() || !std::isfinite(v[i])) throw ParseError("malformed transform value");
  }
  RigidTransform t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = v[r * 3 + c];
  t.translation = Vec3(v[9], v[10], v[11]);
  return t;
}

void write_registered_ply(const fs::path& path, const RegisteredMap& map) {
  PlyData data;
  data.cloud = map.cloud();
  data.comments.emplace_back("to_reference", format_transform(map.to_reference()));
  write_ply(path, data);
}

RegisteredMap read_registered_ply(const fs::path& path) {
  PlyData data = read_ply(path);
  const auto t = data.comment("to_reference");
  if (!t) throw Error(path.string() + ": map is not registered (no to_reference transform)");
  return RegisteredMap::already_registered(std::move(data.cloud), parse_transform(*t));
}

LabelledCloud to_labelled(PlyData data) {
  if (data.labels.empty()) throw Error("cloud has no label property");
  LabelledCloud out{std::move(data.cloud), std::move(data.labels), std::move(data.d_max)};
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Batch

void write_batch(const fs::path& path, const BatchFile& batch) {
  const TilingParams& t = batch.tiling;
  std::ostringstream out;
  out << "lts_batch 1\n";
  out << "seed " << num(t.seed) << '\n';
  out << "submap_size_xy " << num(t.submap_size_xy) << '\n';
  out << "stride_fraction " << num(t.stride_fraction) << '\n';
  out << "points_per_submap " << t.points_per_submap << '\n';
  out << "min_points " << t.min_points << '\n';
  out << "lambda " << num(batch.lambda) << '\n';
  out << "alpha " << num(batch.weights.alpha) << '\n';
  out << "epsilon " << num(batch.weights.epsilon) << '\n';
  if (const auto* h = std::get_if<HistogramDensity>(&batch.weights.density))
    out << "density histogram " << h->bins << '\n';
  else
    out << "density kernel " << num(std::get<KernelDensity>(batch.weights.density).bandwidth) << '\n';
  out << "source_points " << batch.source_points << '\n';
  out << "layout x y z nx ny nz label\n";
  out << "submaps " << batch.submaps.size() << '\n';
  out << "end_header\n";
  for (std::size_t s = 0; s < batch.submaps.size(); ++s) {
    const Submap& sm = batch.submaps[s];
    if (sm.size() != t.points_per_submap || sm.source_indices.size() != sm.size() || sm.labels.size() != sm.size())
      throw Error("submap " + std::to_string(s) + " does not match points_per_submap");
    out << "submap " << s << ' ' << num(sm.tile_origin.x()) << ' ' << num(sm.tile_origin.y()) << ' '
        << num(sm.center.x()) << ' ' << num(sm.center.y()) << '\n';
    out << "indices";
    for (auto i : sm.source_indices) out << ' ' << i;
    out << '\n';
    for (std::size_t i = 0; i < sm.size(); ++i) {
      const Vec3& p = sm.positions[i];
      const Vec3 n = sm.normals.empty() ? Vec3::Zero() : sm.normals[i];
      out << num(p.x()) << ' ' << num(p.y()) << ' ' << num(p.z()) << ' ' << num(n.x()) << ' ' << num(n.y())
          << ' ' << num(n.z()) << ' ' << num(sm.labels[i]) << '\n';
    }
  }
  auto file = open_out(path);
  file << out.str();
}

BatchFile read_batch(const fs::path& path) {
  LineReader r(path);
  const std::string magic_line = r.expect_line("magic");
  const auto magic = split(magic_line);
  if (magic.size() != 2 || magic[0] != "lts_batch") r.fail("not a batch file");
  if (magic[1] != "1") r.fail("unsupported batch version");

  BatchFile batch;
  std::size_t submaps = 0;
  bool layout_ok = false;
  for (;;) {
    const std::string line = r.expect_line("end_header");
    const auto tok = split(line);
    if (tok.empty()) continue;
    const auto key = tok[0];
    if (key == "end_header") break;
    if (key == "layout") {
      layout_ok = line == "layout x y z nx ny nz label";
      if (!layout_ok) r.fail("unsupported layout");
      continue;
    }
    if (tok.size() < 2) r.fail("header entry without value");
    if (key == "seed") batch.tiling.seed = r.to_uint(tok[1]);
    else if (key == "submap_size_xy") batch.tiling.submap_size_xy = r.to_double(tok[1]);
    else if (key == "stride_fraction") batch.tiling.stride_fraction = r.to_double(tok[1]);
    else if (key == "points_per_submap") batch.tiling.points_per_submap = r.to_uint(tok[1]);
    else if (key == "min_points") batch.tiling.min_points = r.to_uint(tok[1]);
    else if (key == "lambda") batch.lambda = r.to_double(tok[1]);
    else if (key == "alpha") batch.weights.alpha = r.to_double(tok[1]);
    else if (key == "epsilon") batch.weights.epsilon = r.to_double(tok[1]);
    else if (key == "source_points") batch.source_points = r.to_uint(tok[1]);
    else if (key == "submaps") submaps = r.to_uint(tok[1]);
    else if (key == "density") {
      if (tok.size() != 3) r.fail("density needs kind and value");
      if (tok[1] == "histogram") batch.weights.density = HistogramDensity{r.to_uint(tok[2])};
      else if (tok[1] == "kernel") batch.weights.density = KernelDensity{r.to_double(tok[2])};
      else r.fail("unknown density estimator");
    } else {
      r.fail("unknown header key '" + std::string(key) + "'");
    }
  }
  if (!layout_ok) r.fail("missing layout line");
  const std::size_t p = batch.tiling.points_per_submap;
  batch.submaps.reserve(submaps);
  for (std::size_t s = 0; s < submaps; ++s) {
    const std::string head_line = r.expect_line("submap record");
    const auto head = split(head_line);
    if (head.size() != 6 || head[0] != "submap" || r.to_uint(head[1]) != s) r.fail("malformed submap record");
    Submap sm;
    sm.tile_origin = {r.to_double(head[2]), r.to_double(head[3])};
    sm.center = {r.to_double(head[4]), r.to_double(head[5])};
    const std::string idx_line = r.expect_line("indices");
    const auto idx = split(idx_line);
    if (idx.size() != p + 1 || idx[0] != "indices") r.fail("index table length does not match header");
    for (std::size_t i = 1; i < idx.size(); ++i) {
      sm.source_indices.push_back(r.to_uint(idx[i]));
      if (batch.source_points && sm.source_indices.back() >= batch.source_points) r.fail("source index out of range");
    }
    bool any_normal = false;
    for (std::size_t i = 0; i < p; ++i) {
      const std::string row_line = r.expect_line("point row");
      const auto row = split(row_line);
      if (row.size() != 7) r.fail("point row must have 7 values");
      sm.positions.emplace_back(r.to_double(row[0]), r.to_double(row[1]), r.to_double(row[2]));
      sm.normals.emplace_back(r.to_double(row[3]), r.to_double(row[4]), r.to_double(row[5]));
      any_normal = any_normal || !sm.normals.back().isZero();
      sm.labels.push_back(r.to_double(row[6]));
    }
    if (!any_normal) sm.normals.clear();
    batch.submaps.push_back(std::move(sm));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Predictions

void write_predictions(const fs::path& path, const std::vector<SubmapPredictions>& preds) {
  const std::size_t p = preds.empty() ? 0 : preds.front().predictions.size();
  std::ostringstream out;
  out << "lts_predictions 1\nsubmaps " << preds.size() << "\npoints_per_submap " << p << "\nend_header\n";
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& sp = preds[s];
    if (sp.predictions.size() != p || sp.source_indices.size() != p)
      throw Error("prediction records must all have points_per_submap entries");
    out << "submap " << s << '\n';
    for (std::size_t i = 0; i < p; ++i) out << sp.source_indices[i] << ' ' << num(sp.predictions[i]) << '\n';
  }
  auto file = open_out(path);
  file << out.str();
}

std::vector<SubmapPredictions> read_predictions(const fs::path& path) {
  LineReader r(path);
  const std::string magic_line = r.expect_line("magic");
  const auto magic = split(magic_line);
  if (magic.size() != 2 || magic[0] != "lts_predictions" || magic[1] != "1") r.fail("not a predictions file");
  std::size_t submaps = 0, p = 0;
  for (;;) {
    const std::string tok_line = r.expect_line("end_header");
    const auto tok = split(tok_line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok.size() != 2) r.fail("malformed header entry");
    if (tok[0] == "submaps") submaps = r.to_uint(tok[1]);
    else if (tok[0] == "points_per_submap") p = r.to_uint(tok[1]);
    else r.fail("unknown header key");
  }
  std::vector<SubmapPredictions> out(submaps);
  for (std::size_t s = 0; s < submaps; ++s) {
    const std::string head_line = r.expect_line("submap record");
    const auto head = split(head_line);
    if (head.size() != 2 || head[0] != "submap" || r.to_uint(head[1]) != s) r.fail("malformed submap record");
    for (std::size_t i = 0; i < p; ++i) {
      const std::string row_line = r.expect_line("prediction row");
      const auto row = split(row_line);
      if (row.size() != 2) r.fail("prediction row must have 2 values");
      out[s].source_indices.push_back(r.to_uint(row[0]));
      out[s].predictions.push_back(r.to_double(row[1]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

template <typename T>
void get_to(const json& j, const char* key, T& value) {
  if (j.contains(key)) j.at(key).get_to(value);
}

json transform_to_json(const RigidTransform& t) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(t.rotation(r, c));
  for (int i = 0; i < 3; ++i) a.push_back(t.translation[i]);
  return a;
}

RigidTransform transform_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 12) throw ParseError("initial_guess needs 12 numbers");
  RigidTransform t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = v[static_cast<std::size_t>(r * 3 + c)];
  t.translation = Vec3(v[9], v[10], v[11]);
  return t;
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["csf"] = {{"cloth_resolution", c.csf.cloth_resolution}, {"rigidness", c.csf.rigidness},
              {"iterations", c.csf.iterations}, {"class_threshold", c.csf.class_threshold},
              {"time_step", c.csf.time_step}};
  j["sor"] = {{"k", c.sor.k}, {"std_multiplier", c.sor.std_multiplier}};
  j["normals"] = {{"k", c.normals.k}};
  j["icp"] = {{"max_iterations", c.icp.max_iterations},
              {"max_correspondence_dist", c.icp.max_correspondence_dist},
              {"convergence_eps", c.icp.convergence_eps},
              {"align_centroids", c.icp.align_centroids},
              {"refine_correspondence_dist", c.icp.refine_correspondence_dist},
              {"yaw_offsets_deg", c.icp_starts.yaw_offsets_deg},
              {"shift_offsets", c.icp_starts.shift_offsets},
              {"accept_fraction", c.icp_starts.accept_fraction},
              {"initial_guess", transform_to_json(c.icp.initial_guess)}};
  j["labelling"] = {{"lambda", c.lambda}};
  j["tiling"] = {{"submap_size_xy", c.tiling.submap_size_xy}, {"stride_fraction", c.tiling.stride_fraction},
                 {"points_per_submap", c.tiling.points_per_submap}, {"min_points", c.tiling.min_points}};
  json w = {{"alpha", c.weights.alpha}, {"epsilon", c.weights.epsilon}};
  if (const auto* h = std::get_if<HistogramDensity>(&c.weights.density)) {
    w["density"] = "histogram";
    w["bins"] = h->bins;
  } else {
    w["density"] = "kernel";
    w["bandwidth"] = std::get<KernelDensity>(c.weights.density).bandwidth;
  }
  j["weights"] = w;
  return j;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  get_to(j, "seed", c.seed);
  if (j.contains("csf")) {
    const auto& s = j["csf"];
    get_to(s, "cloth_resolution", c.csf.cloth_resolution);
    get_to(s, "rigidness", c.csf.rigidness);
    get_to(s, "iterations", c.csf.iterations);
    get_to(s, "class_threshold", c.csf.class_threshold);
    get_to(s, "time_step", c.csf.time_step);
  }
  if (j.contains("sor")) {
    get_to(j["sor"], "k", c.sor.k);
    get_to(j["sor"], "std_multiplier", c.sor.std_multiplier);
  }
  if (j.contains("normals")) get_to(j["normals"], "k", c.normals.k);
  if (j.contains("icp")) {
    const auto& s = j["icp"];
    get_to(s, "max_iterations", c.icp.max_iterations);
    get_to(s, "max_correspondence_dist", c.icp.max_correspondence_dist);
    get_to(s, "convergence_eps", c.icp.convergence_eps);
    get_to(s, "align_centroids", c.icp.align_centroids);
    get_to(s, "refine_correspondence_dist", c.icp.refine_correspondence_dist);
    get_to(s, "yaw_offsets_deg", c.icp_starts.yaw_offsets_deg);
    get_to(s, "shift_offsets", c.icp_starts.shift_offsets);
    get_to(s, "accept_fraction", c.icp_starts.accept_fraction);
    if (s.contains("initial_guess")) c.icp.initial_guess = transform_from_json(s["initial_guess"]);
  }
  if (j.contains("labelling")) get_to(j["labelling"], "lambda", c.lambda);
  if (j.contains("tiling")) {
    const auto& s = j["tiling"];
    get_to(s, "submap_size_xy", c.tiling.submap_size_xy);
    get_to(s, "stride_fraction", c.tiling.stride_fraction);
    get_to(s, "points_per_submap", c.tiling.points_per_submap);
    get_to(s, "min_points", c.tiling.min_points);
  }
  c.tiling.seed = c.seed;
  if (j.contains("weights")) {
    const auto& s = j["weights"];
    get_to(s, "alpha", c.weights.alpha);
    get_to(s, "epsilon", c.weights.epsilon);
    const std::string kind = s.value("density", std::string("histogram"));
    if (kind == "histogram") c.weights.density = HistogramDensity{s.value("bins", std::size_t{100})};
    else if (kind == "kernel") c.weights.density = KernelDensity{s.value("bandwidth", 0.05)};
    else throw ParseError("unknown density estimator '" + kind + "'");
  }
  return c;
}

}  // namespace

SessionManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open manifest");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  SessionManifest m;
  try {
    for (const auto& s : j.at("sessions")) {
      SessionEntry e;
      e.id = s.at("id").get<std::string>();
      fs::path cloud = s.at("cloud").get<std::string>();
      if (cloud.is_relative()) cloud = path.parent_path() / cloud;
      e.cloud_path = cloud.string();
      const std::string role = s.value("role", std::string("other"));
      if (role == "reference") e.role = SessionRole::kReference;
      else if (role == "other") e.role = SessionRole::kOther;
      else throw ParseError("unknown session role '" + role + "'");
      m.sessions.push_back(std::move(e));
    }
    if (j.contains("params")) m.config = config_from_json(j["params"]);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  m.validate();
  for (const auto& s : m.sessions)
    if (!fs::exists(s.cloud_path)) throw Error("session " + s.id + ": cloud not found: " + s.cloud_path);
  return m;
}

void write_manifest(const fs::path& path, const SessionManifest& manifest) {
  json j;
  j["sessions"] = json::array();
  const fs::path base = path.parent_path();
  for (const auto& s : manifest.sessions) {
    fs::path cloud = s.cloud_path;
    if (!base.empty() && cloud.is_absolute()) cloud = fs::relative(cloud, fs::absolute(base));
    j["sessions"].push_back({{"id", s.id},
                             {"cloud", cloud.generic_string()},
                             {"role", s.role == SessionRole::kReference ? "reference" : "other"}});
  }
  j["params"] = config_to_json(manifest.config);
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json report_to_json(const std::string& name, const EvaluationReport& r) {
  const auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j = {{"map", name},
            {"points", r.points},
            {"skipped", r.skipped},
            {"lambda", r.lambda},
            {"auc", r.auc},
            {"optimal_threshold", r.optimal_threshold},
            {"optimal_threshold_meters", finite_or_null(r.optimal_threshold_meters)},
            {"gmean", r.gmean},
            {"applied_threshold", r.applied_threshold},
            {"miou", r.miou},
            {"iou_stable", r.per_class_iou[0]},
            {"iou_dynamic", r.per_class_iou[1]}};
  j["rmse"] = r.rmse ? json(*r.rmse) : json(nullptr);
  return j;
}

std::string fixed(double v, int precision) {
  if (!std::isfinite(v)) return "inf";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

std::string format_report_table(const std::vector<NamedReport>& reports) {
  const std::vector<std::string> head{"map", "points", "auc", "threshold", "thr_m", "gmean",
                                      "applied", "miou", "iou_stable", "iou_dyn", "rmse"};
  std::vector<std::vector<std::string>> rows{head};
  for (const auto& [name, r] : reports) {
    rows.push_back({name, std::to_string(r.points), fixed(r.auc, 4), fixed(r.optimal_threshold, 4),
                    fixed(r.optimal_threshold_meters, 3), fixed(r.gmean, 4), fixed(r.applied_threshold, 4),
                    fixed(r.miou, 4), fixed(r.per_class_iou[0], 4), fixed(r.per_class_iou[1], 4),
                    r.rmse ? fixed(*r.rmse, 4) : "-"});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      if (c == 0) out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      else out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
    }
    out << '\n';
  }
  return out.str();
}

void write_report_table(const fs::path& path, const std::vector<NamedReport>& reports) {
  auto out = open_out(path);
  out << format_report_table(reports);
}

void write_report_json(const fs::path& path, const std::vector<NamedReport>& reports) {
  json j = json::array();
  for (const auto& [name, r] : reports) j.push_back(report_to_json(name, r));
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::vector<NamedReport> read_report_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open report");
  json j;
  in >> j;
  std::vector<NamedReport> out;
  for (const auto& e : j) {
    EvaluationReport r;
    r.points = e.at("points").get<std::size_t>();
    r.skipped = e.at("skipped").get<std::size_t>();
    r.lambda = e.at("lambda").get<double>();
    r.auc = e.at("auc").get<double>();
    r.optimal_threshold = e.at("optimal_threshold").get<double>();
    r.optimal_threshold_meters = e.at("optimal_threshold_meters").is_null()
                                     ? std::numeric_limits<double>::infinity()
                                     : e.at("optimal_threshold_meters").get<double>();
    r.gmean = e.at("gmean").get<double>();
    r.applied_threshold = e.at("applied_threshold").get<double>();
    r.miou = e.at("miou").get<double>();
    r.per_class_iou = {e.at("iou_stable").get<double>(), e.at("iou_dynamic").get<double>()};
    if (!e.at("rmse").is_null()) r.rmse = e.at("rmse").get<double>();
    out.emplace_back(e.at("map").get<std::string>(), r);
  }
  return out;
}

}  // namespace lts::io
