#pragma once

// Analytic terrains with known critical structure, and meshes sampling them.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "tinscale/core.hpp"
#include "tinscale/eval.hpp"
#include "tinscale/pointcloud.hpp"
#include "tinscale/tin.hpp"

namespace tinscale {

struct Bump {
  double x = 0.0;
  double y = 0.0;
  double height = 1.0;
  double sigma = 1.0;
};

inline double bump_value(const Bump& b, double x, double y) {
  const double dx = x - b.x, dy = y - b.y;
  return b.height * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
}

inline double bumps_value(std::span<const Bump> bumps, double x, double y) {
  double z = 0.0;
  for (const auto& b : bumps) z += bump_value(b, x, y);
  return z;
}

// The same bump convolved with an isotropic Gaussian of the given variance.
inline Bump blurred(const Bump& b, double variance) {
  const double s2 = b.sigma * b.sigma;
  return {b.x, b.y, b.height * s2 / (s2 + variance), std::sqrt(s2 + variance)};
}

using HeightField = std::function<double(double x, double y)>;

// Regular nx-by-ny lattice split along alternating diagonals.
inline Tin grid_tin(std::size_t nx, std::size_t ny, double spacing, const HeightField& height, double x0 = 0.0,
                    double y0 = 0.0) {
  if (nx < 2 || ny < 2) throw UsageError("grid needs at least 2x2 vertices");
  std::vector<Point3> v;
  v.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = x0 + spacing * static_cast<double>(i);
      const double y = y0 + spacing * static_cast<double>(j);
      v.push_back({x, y, height(x, y)});
    }
  }
  std::vector<Triangle> t;
  t.reserve(2 * (nx - 1) * (ny - 1));
  auto id = [nx](std::size_t i, std::size_t j) { return static_cast<Index>(j * nx + i); };
  for (std::size_t j = 0; j + 1 < ny; ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const Index a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2 == 0) {
        t.push_back({a, b, c});
        t.push_back({a, c, d});
      } else {
        t.push_back({a, b, d});
        t.push_back({b, c, d});
      }
    }
  }
  return Tin::from_triangles(std::move(v), std::move(t));
}

// Uniform random samples of a height field over a rectangle.
inline RawPointCloud sample_height_field(const HeightField& height, double x0, double y0, double x1, double y1,
                                         std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  RawPointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double x = rng.uniform(x0, x1);
    const double y = rng.uniform(y0, y1);
    cloud.points.push_back({x, y, height(x, y)});
  }
  return cloud;
}

// Two well separated bumps, 10 m and 3 m high, on a 400 m x 300 m tile.
struct TwoBumpScene {
  std::vector<Bump> bumps;
  double x0 = 0.0, y0 = 0.0, x1 = 400.0, y1 = 300.0;

  TwoBumpScene() : bumps{{130.0, 150.0, 10.0, 40.0}, {280.0, 150.0, 3.0, 25.0}} {}

  HeightField field() const {
    return [b = bumps](double x, double y) { return bumps_value(b, x, y); };
  }

  RawPointCloud cloud(std::size_t count, std::uint64_t seed) const {
    return sample_height_field(field(), x0, y0, x1, y1, count, seed);
  }

  GroundTruth truth() const {
    GroundTruth gt;
    gt.spots.push_back({bumps[0].x, bumps[0].y, "high", true});
    gt.spots.push_back({bumps[1].x, bumps[1].y, "low", false});
    return gt;
  }
};

}  // namespace tinscale
