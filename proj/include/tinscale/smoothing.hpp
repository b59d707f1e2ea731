#pragma once

// Iterated small-kernel Gaussian smoothing on a TIN and the discrete scale
// space built from it.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tinscale/core.hpp"
#include "tinscale/tin.hpp"

namespace tinscale {

// How many smoothing steps a variance increment needs.
enum class StepVariance {
  Nominal,     // sigma_small^2 per step
  Calibrated,  // measured second moment of the operator per step
};

struct SmoothingConfig {
  double sigma_small = 0.0;  // meters; <= 0 selects the median edge length
  double tau = 0.0;          // meters; <= 0 selects twice the median edge length
  bool angle_reweight = true;
  bool virtual_neighbors = true;
  int num_layers = 8;
  double base_variance = 1.0;  // m^2; layer i >= 1 has cumulative variance base * 2^i
  StepVariance step_variance = StepVariance::Calibrated;

  void validate() const {
    if (num_layers < 1) throw UsageError("num_layers must be >= 1");
    if (!(base_variance > 0.0)) throw UsageError("base_variance must be > 0");
    if (!std::isfinite(sigma_small) || !std::isfinite(tau)) throw UsageError("sigma_small and tau must be finite");
  }

  // Replaces automatic values with concrete ones for this mesh.
  SmoothingConfig resolved(const Tin& tin) const {
    validate();
    SmoothingConfig out = *this;
    const double h = tin.median_edge_length();
    if (out.sigma_small <= 0.0) out.sigma_small = h;
    if (out.tau <= 0.0) out.tau = 2.0 * h;
    if (!(out.sigma_small > 0.0) || !(out.tau > 0.0)) throw DataError("mesh has no edges to derive smoothing scale from");
    return out;
  }
};

// Row-stochastic sparse operator in CSR form (diagonal included).
struct WeightMatrix {
  std::vector<std::size_t> row_offsets;
  std::vector<Index> cols;
  std::vector<double> vals;

  std::size_t size() const { return row_offsets.empty() ? 0 : row_offsets.size() - 1; }

  double at(Index i, Index j) const {
    for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
      if (cols[k] == j) return vals[k];
    }
    return 0.0;
  }
};

namespace detail {

inline double angle_between(const Point3& c, const Point3& a, const Point3& b) {
  const double ax = a.x - c.x, ay = a.y - c.y;
  const double bx = b.x - c.x, by = b.y - c.y;
  return std::atan2(std::abs(ax * by - ay * bx), ax * bx + ay * by);
}

}  // namespace detail

// Angular coverage of each ring neighbour: the mean of the two wedge angles
// on either side of it. Open (boundary) chains use the single wedge at each
// end.
inline std::vector<double> neighbor_angles(const Tin& tin, Index i) {
  const auto nb = tin.neighbors(i);
  const std::size_t m = nb.size();
  std::vector<double> theta(m, 0.0);
  if (m < 2) return theta;
  const auto& c = tin.vertex(i);
  const bool open = tin.is_boundary(i);
  const std::size_t wedges = open ? m - 1 : m;
  std::vector<double> wedge(wedges);
  for (std::size_t k = 0; k < wedges; ++k) {
    wedge[k] = detail::angle_between(c, tin.vertex(nb[k]), tin.vertex(nb[(k + 1) % m]));
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (open) {
      if (k == 0) theta[k] = wedge[0];
      else if (k == m - 1) theta[k] = wedge[m - 2];
      else theta[k] = 0.5 * (wedge[k - 1] + wedge[k]);
    } else {
      theta[k] = 0.5 * (wedge[(k + m - 1) % m] + wedge[k]);
    }
  }
  return theta;
}

// Gaussian weights exp(-d^2 / (2 sigma^2)) over each ring plus a unit self
// weight. Neighbours further than tau are replaced by a virtual point at
// distance tau on the edge; its weight is split between the neighbour (t =
// tau / d) and the centre (1 - t), i.e. it smooths against the linearly
// interpolated elevation. Optional angular coverage factors scale every
// neighbour term. Rows are normalised last.
inline WeightMatrix build_weight_matrix(const Tin& tin, const SmoothingConfig& raw_cfg) {
  const auto cfg = raw_cfg.resolved(tin);
  const std::size_t n = tin.num_vertices();
  WeightMatrix w;
  w.row_offsets.assign(n + 1, 0);
  for (Index i = 0; i < n; ++i) w.row_offsets[i + 1] = w.row_offsets[i] + tin.neighbors(i).size() + 1;
  w.cols.resize(w.row_offsets.back());
  w.vals.resize(w.row_offsets.back());

  const double inv_two_sigma2 = 1.0 / (2.0 * cfg.sigma_small * cfg.sigma_small);
  parallel_for(n, [&](std::size_t row) {
    const auto i = static_cast<Index>(row);
    const auto nb = tin.neighbors(i);
    const auto theta = cfg.angle_reweight ? neighbor_angles(tin, i) : std::vector<double>(nb.size(), 1.0);
    auto pos = w.row_offsets[i];
    double diag = 1.0;
    double total = 1.0;
    // Diagonal slot first, then ring order.
    const auto diag_pos = pos++;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const double d = distance_xy(tin.vertex(i), tin.vertex(nb[k]));
      double to_nbr;
      double to_self = 0.0;
      if (cfg.virtual_neighbors && d > cfg.tau) {
        const double wv = theta[k] * std::exp(-cfg.tau * cfg.tau * inv_two_sigma2);
        const double t = cfg.tau / d;
        to_nbr = t * wv;
        to_self = (1.0 - t) * wv;
      } else {
        to_nbr = theta[k] * std::exp(-d * d * inv_two_sigma2);
      }
      w.cols[pos] = nb[k];
      w.vals[pos] = to_nbr;
      ++pos;
      diag += to_self;
      total += to_nbr + to_self;
    }
    w.cols[diag_pos] = i;
    w.vals[diag_pos] = diag;
    for (auto k = w.row_offsets[i]; k < w.row_offsets[i + 1]; ++k) w.vals[k] /= total;
  });
  return w;
}

// One sparse matrix-vector product.
inline std::vector<double> smooth_step(const WeightMatrix& w, std::span<const double> values) {
  if (values.size() != w.size()) {
    throw UsageError("smooth_step: got " + std::to_string(values.size()) + " values for " +
                     std::to_string(w.size()) + " vertices");
  }
  std::vector<double> out(values.size());
  parallel_for(out.size(), [&](std::size_t i) {
    double acc = 0.0;
    for (auto k = w.row_offsets[i]; k < w.row_offsets[i + 1]; ++k) acc += w.vals[k] * values[w.cols[k]];
    out[i] = acc;
  });
  return out;
}

// Mean per-axis second moment of one step, sum_j W_ij |x_j - x_i|^2 / 2,
// over interior rows (all rows when the mesh has no interior vertex).
inline double operator_step_variance(const Tin& tin, const WeightMatrix& w) {
  double acc = 0.0;
  std::size_t rows = 0;
  for (int pass = 0; pass < 2 && rows == 0; ++pass) {
    for (Index i = 0; i < tin.num_vertices(); ++i) {
      if (pass == 0 && tin.is_boundary(i)) continue;
      if (tin.neighbors(i).empty()) continue;
      double m2 = 0.0;
      for (auto k = w.row_offsets[i]; k < w.row_offsets[i + 1]; ++k) {
        m2 += w.vals[k] * distance_xy_sq(tin.vertex(i), tin.vertex(w.cols[k]));
      }
      acc += 0.5 * m2;
      ++rows;
    }
  }
  return rows ? acc / static_cast<double>(rows) : 0.0;
}

// Number of steps of per-step variance `step_variance` covering `delta`.
inline int iterations_for_variance(double delta, double step_variance) {
  if (!(step_variance > 0.0)) throw UsageError("step variance must be > 0");
  if (delta <= 0.0) return 0;
  return static_cast<int>(std::ceil(delta / step_variance * (1.0 - 1e-12)));
}

// Cumulative variance of layer i (0 for the input layer).
inline double layer_variance(int i, double base_variance = 1.0) {
  return i == 0 ? 0.0 : base_variance * std::ldexp(1.0, i);
}

struct ScaleSpace {
  std::vector<std::vector<double>> layers;  // layers[0] is the input
  std::vector<double> layer_variances;      // cumulative, m^2
  std::vector<int> iterations;              // smoothing steps that produced each layer
  double step_variance = 0.0;               // per-step variance used for the schedule

  int num_layers() const { return static_cast<int>(layers.size()) - 1; }  // L
  std::size_t num_vertices() const { return layers.empty() ? 0 : layers.front().size(); }
  const std::vector<double>& layer(int i) const { return layers[static_cast<std::size_t>(i)]; }
};

using StepObserver = std::function<void(std::span<const double> before, std::span<const double> after)>;

// Applies `steps` smoothing steps, reporting each to `observer`.
inline std::vector<double> smooth_repeat(const WeightMatrix& w, std::vector<double> values, int steps,
                                         const StepObserver& observer = {}) {
  for (int s = 0; s < steps; ++s) {
    auto next = smooth_step(w, values);
    if (observer) observer(values, next);
    values = std::move(next);
  }
  return values;
}

inline double schedule_step_variance(const Tin& tin, const WeightMatrix& w, const SmoothingConfig& cfg) {
  if (cfg.step_variance == StepVariance::Nominal) return cfg.sigma_small * cfg.sigma_small;
  const double v = operator_step_variance(tin, w);
  if (!(v > 0.0)) throw DataError("smoothing operator has zero spread");
  return v;
}

inline ScaleSpace build_scale_space(const Tin& tin, std::vector<double> input, const SmoothingConfig& raw_cfg,
                                    const StepObserver& observer = {}) {
  const auto cfg = raw_cfg.resolved(tin);
  if (input.size() != tin.num_vertices()) throw DataError("scale space input does not match the mesh");
  const auto w = build_weight_matrix(tin, cfg);
  ScaleSpace ss;
  ss.step_variance = schedule_step_variance(tin, w, cfg);
  ss.layers.push_back(std::move(input));
  ss.layer_variances.push_back(0.0);
  ss.iterations.push_back(0);
  for (int i = 1; i <= cfg.num_layers; ++i) {
    const double delta = layer_variance(i, cfg.base_variance) - layer_variance(i - 1, cfg.base_variance);
    const int n = iterations_for_variance(delta, ss.step_variance);
    ss.layers.push_back(smooth_repeat(w, ss.layers.back(), n, observer));
    ss.layer_variances.push_back(layer_variance(i, cfg.base_variance));
    ss.iterations.push_back(n);
  }
  return ss;
}

inline ScaleSpace build_scale_space(const Tin& tin, const SmoothingConfig& cfg, const StepObserver& observer = {}) {
  return build_scale_space(tin, tin.elevations(), cfg, observer);
}

// Linear interpolation between consecutive layers at timestamp t in [0, L].
inline std::vector<double> interpolate_layer(const ScaleSpace& ss, double t) {
  const int L = ss.num_layers();
  if (!(t >= 0.0 && t <= static_cast<double>(L))) {
    throw UsageError("interpolate_layer: t = " + std::to_string(t) + " outside [0, " + std::to_string(L) + "]");
  }
  if (t == static_cast<double>(L)) return ss.layers.back();
  const int i = static_cast<int>(std::floor(t));
  const double delta = t - i;
  const auto& a = ss.layer(i);
  const auto& b = ss.layer(i + 1);
  std::vector<double> out(a.size());
  for (std::size_t v = 0; v < a.size(); ++v) out[v] = delta * b[v] + (1.0 - delta) * a[v];
  return out;
}

}  // namespace tinscale
