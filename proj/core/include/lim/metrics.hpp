#pragma once

#include <cstdint>

#include "lim/geometry.hpp"
#include "lim/image.hpp"

namespace lim {

/// Area-weighted uniform samples on the mesh triangles.
Points sample_mesh_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

struct SurfaceMetrics {
  double accuracy = 0.0;      // mean distance reconstruction -> reference
  double completeness = 0.0;  // mean distance reference -> reconstruction
  double precision = 0.0;     // fraction of reconstruction within threshold
  double recall = 0.0;        // fraction of reference within threshold
  double f1 = 0.0;
};

/// Nearest-neighbor distances between two surface sample sets.
SurfaceMetrics compare_surfaces(const Points& reconstruction, const Points& reference,
                                double threshold = 0.025);

struct RenderMetrics {
  double depth_l1 = 0.0;  // meters, over pixels where both depths are positive
  double psnr = 0.0;      // dB with peak 1, over pixels valid in both
  std::size_t depth_pixels = 0;
  std::size_t color_pixels = 0;
};

RenderMetrics compare_renders(const Image<float>& depth, const Image<float>& color,
                              const Image<std::uint8_t>& color_valid,
                              const Image<float>& ref_depth, const Image<float>& ref_color,
                              const Image<std::uint8_t>& ref_valid);

}  // namespace lim
