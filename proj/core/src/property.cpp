#include "lim/property.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lim/error.hpp"
#include "lim/parallel.hpp"

namespace lim {

LatentImplicitMap build_property_lim(const Frame& frame, const std::string& channel,
                                     const PositionalEncoder& enc, const PropertyConfig& cfg) {
  frame.validate();
  cfg.encoding.validate();
  require(cfg.voxel_size > 0.0, "voxel size must be positive");
  require(cfg.kind != FieldKind::kSdf, "property maps cannot have kind sdf");
  const auto it = frame.properties.find(channel);
  if (it == frame.properties.end()) {
    fail(ErrorKind::kData, "frame has no property channel '" + channel + "'");
  }
  const Matrix& values = it->second;
  const int c = static_cast<int>(values.cols());
  require(c >= 1, "property channel must have at least one column");
  LatentImplicitMap map(MapConfig{cfg.kind, c, enc.rank(), cfg.voxel_size, 0}, enc);
  if (frame.size() == 0) return map;

  std::vector<VoxelAssignment> assigned = assign_points_overlapped(frame.points, cfg.voxel_size);
  std::erase_if(assigned, [&](const VoxelAssignment& a) {
    return static_cast<int>(a.rows.size()) < cfg.encoding.min_points;
  });

  std::vector<LatentFeature> latents(assigned.size());
  parallel_for(assigned.size(), [&](std::size_t i) {
    const VoxelAssignment& a = assigned[i];
    Matrix y(static_cast<Eigen::Index>(a.rows.size()), c);
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
      y.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(a.rows[r]));
    }
    latents[i] = encode(enc, a.coords, y, cfg.encoding, cfg.kind);
  });
  for (std::size_t i = 0; i < assigned.size(); ++i) {
    Voxel v;
    v.center = voxel_center(assigned[i].key, cfg.voxel_size);
    v.feature = std::move(latents[i]);
    v.weight = static_cast<std::uint32_t>(assigned[i].rows.size());
    map.fuse(assigned[i].key, v);
  }
  return map;
}

Mesh colorize_mesh(const LatentImplicitMap& map, const PositionalEncoder& enc, Mesh mesh,
                   const std::string& name) {
  mesh.validate();
  const QueryResult q = query(map, enc, mesh.vertices);
  Matrix valid(mesh.vertex_count(), 1);
  for (Eigen::Index v = 0; v < mesh.vertex_count(); ++v) {
    valid(v, 0) = q.valid[static_cast<std::size_t>(v)] ? 1.0 : 0.0;
  }
  mesh.attributes[name] = q.values;
  mesh.attributes[name + "_valid"] = std::move(valid);
  return mesh;
}

ScoreResult similarity_query(const LatentImplicitMap& map, const PositionalEncoder& enc,
                             const Points& points, const Vector& query_vec) {
  require(map.config().kind == FieldKind::kFeature, "similarity queries need a feature map");
  if (query_vec.size() != map.config().channels) {
    fail(ErrorKind::kData, "query vector has " + std::to_string(query_vec.size()) +
                               " channels, map has " + std::to_string(map.config().channels));
  }
  const double qn = query_vec.norm();
  require(qn > 0.0 && std::isfinite(qn), "query vector must be nonzero and finite");
  const Vector q = query_vec / qn;

  const QueryResult decoded = query(map, enc, points);
  ScoreResult out;
  out.valid = decoded.valid;
  out.scores = Vector::Constant(points.rows(), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (!decoded.valid[static_cast<std::size_t>(i)]) continue;
    const double n = decoded.values.row(i).norm();
    out.scores[i] = n > 0.0 ? decoded.values.row(i).dot(q) / n : 0.0;
  }
  return out;
}

Classification classify_points(const LatentImplicitMap& map, const PositionalEncoder& enc,
                               const Points& points, const Matrix& label_vecs,
                               std::optional<double> threshold) {
  require(map.config().kind == FieldKind::kFeature, "classification needs a feature map");
  require(label_vecs.rows() >= 2, "classification needs at least two labels");
  if (label_vecs.cols() != map.config().channels) {
    fail(ErrorKind::kData, "label vectors have " + std::to_string(label_vecs.cols()) +
                               " channels, map has " + std::to_string(map.config().channels));
  }
  Matrix labels = label_vecs;
  for (Eigen::Index k = 0; k < labels.rows(); ++k) {
    const double n = labels.row(k).norm();
    require(n > 0.0 && std::isfinite(n), "label vectors must be nonzero and finite");
    labels.row(k) /= n;
  }

  const QueryResult decoded = query(map, enc, points);
  Classification out;
  out.labels.assign(static_cast<std::size_t>(points.rows()), -1);
  out.best_scores = Vector::Constant(points.rows(), std::numeric_limits<double>::quiet_NaN());
  const Matrix dots = decoded.values * labels.transpose();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (!decoded.valid[static_cast<std::size_t>(i)]) continue;
    const double n = decoded.values.row(i).norm();
    int best = 0;
    for (Eigen::Index k = 1; k < labels.rows(); ++k) {
      if (dots(i, k) > dots(i, best)) best = static_cast<int>(k);
    }
    const double score = n > 0.0 ? dots(i, best) / n : 0.0;
    out.best_scores[i] = score;
    if (!threshold || score >= *threshold) out.labels[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

LabelSet read_label_vectors(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kIo, "cannot open " + path);
  LabelSet out;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string name;
    if (!(ss >> name) || name[0] == '#') continue;
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
    }
    if (v.empty() || (!rows.empty() && v.size() != rows.front().size())) {
      fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) +
                                  ": label '" + name + "' has the wrong channel count");
    }
    out.names.push_back(name);
    rows.push_back(std::move(v));
  }
  if (rows.empty()) fail(ErrorKind::kParse, path + ": no label records");
  out.vectors.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t c = 0; c < rows[k].size(); ++c) {
      out.vectors(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = rows[k][c];
    }
  }
  return out;
}

}  // namespace lim
