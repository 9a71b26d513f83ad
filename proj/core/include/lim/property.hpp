#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lim/geometry.hpp"
#include "lim/voxel_map.hpp"

namespace lim {

struct PropertyConfig {
  double voxel_size = 0.02;  // meters
  FieldKind kind = FieldKind::kProperty;
  EncodingConfig encoding = EncodingConfig::defaults_for(FieldKind::kProperty);
};

/// Encodes the frame channel `channel` into a local map, one latent per
/// overlapped voxel with weight = point count. Throws kData for an unknown
/// channel.
LatentImplicitMap build_property_lim(const Frame& frame, const std::string& channel,
                                     const PositionalEncoder& enc, const PropertyConfig& cfg);

/// Decodes the map at every vertex into attribute `name` (V × c). Attribute
/// `name + "_valid"` holds 1 where a voxel covered the vertex, else 0.
Mesh colorize_mesh(const LatentImplicitMap& map, const PositionalEncoder& enc, Mesh mesh,
                   const std::string& name = "color");

struct ScoreResult {
  Vector scores;            // NaN where !valid
  std::vector<bool> valid;
};

/// Cosine similarity between the decoded feature at each point and `query_vec`.
ScoreResult similarity_query(const LatentImplicitMap& map, const PositionalEncoder& enc,
                             const Points& points, const Vector& query_vec);

struct Classification {
  std::vector<int> labels;  // -1 where unmapped or below threshold
  Vector best_scores;       // NaN where unmapped
};

/// Argmax cosine label per point; ties go to the lowest label index.
/// Each row of `label_vecs` is one label.
Classification classify_points(const LatentImplicitMap& map, const PositionalEncoder& enc,
                               const Points& points, const Matrix& label_vecs,
                               std::optional<double> threshold = std::nullopt);

struct LabelSet {
  std::vector<std::string> names;
  Matrix vectors;  // K × c
};

/// Text records "name v1 v2 ... vc", whitespace separated; '#' starts a
/// comment line. All records must have the same c.
LabelSet read_label_vectors(const std::string& path);

}  // namespace lim
