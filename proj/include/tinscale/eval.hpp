#pragma once

// Scoring selected maxima against ground-truth spot heights.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tinscale/core.hpp"

namespace tinscale {

struct Spot {
  double x = 0.0;
  double y = 0.0;
  std::string name;
  bool is_named_peak = false;
};

struct GroundTruth {
  std::vector<Spot> spots;

  void validate() const {
    std::set<std::pair<double, double>> seen;
    for (const auto& s : spots) {
      if (!std::isfinite(s.x) || !std::isfinite(s.y)) throw DataError("ground truth spot has non-finite coordinates");
      if (!seen.insert({s.x, s.y}).second) {
        throw DataError("duplicate ground truth spot at (" + std::to_string(s.x) + ", " + std::to_string(s.y) + ")");
      }
    }
  }
};

// A maximum as seen by the evaluator.
struct RankedMaximum {
  Index id = 0;
  double x = 0.0;
  double y = 0.0;
  double life_span = 0.0;
};

struct EvalConfig {
  double radius = 50.0;  // meters
  double beta = 0.5;

  void validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw UsageError("match radius must be a positive number");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw UsageError("beta must be a positive number");
  }
};

struct MatchPair {
  Index maximum = 0;
  std::size_t spot = 0;
  double distance = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<Index> unmatched_maxima;
  std::vector<std::size_t> unmatched_spots;
  double precision = 0.0;
  double recall = 0.0;
  double dist_avg = 0.0;
};

inline double f_beta(double precision, double recall, double beta = 0.5) {
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (den == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / den;
}

// Greedy one-to-one matching: maxima in order of descending life span (ties
// by id) each take the nearest unclaimed spot within the radius.
inline MatchResult match_maxima(std::span<const RankedMaximum> maxima, const GroundTruth& gt, double radius = 50.0) {
  if (gt.spots.empty()) throw DataError("ground truth is empty");
  if (!(radius > 0.0)) throw UsageError("match radius must be > 0");
  std::vector<const RankedMaximum*> order;
  order.reserve(maxima.size());
  for (const auto& m : maxima) order.push_back(&m);
  std::sort(order.begin(), order.end(), [](const RankedMaximum* a, const RankedMaximum* b) {
    if (a->life_span != b->life_span) return a->life_span > b->life_span;
    return a->id < b->id;
  });

  MatchResult r;
  std::vector<std::uint8_t> claimed(gt.spots.size(), 0);
  const double r2 = radius * radius;
  for (const auto* m : order) {
    std::size_t best = gt.spots.size();
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < gt.spots.size(); ++s) {
      if (claimed[s]) continue;
      const double dx = gt.spots[s].x - m->x, dy = gt.spots[s].y - m->y;
      const double d2 = dx * dx + dy * dy;
      if (d2 <= r2 && d2 < best_d2) {
        best_d2 = d2;
        best = s;
      }
    }
    if (best == gt.spots.size()) {
      r.unmatched_maxima.push_back(m->id);
    } else {
      claimed[best] = 1;
      r.pairs.push_back({m->id, best, std::sqrt(best_d2)});
    }
  }
  for (std::size_t s = 0; s < gt.spots.size(); ++s) {
    if (!claimed[s]) r.unmatched_spots.push_back(s);
  }
  const double matched = static_cast<double>(r.pairs.size());
  r.precision = maxima.empty() ? 0.0 : matched / static_cast<double>(maxima.size());
  r.recall = matched / static_cast<double>(gt.spots.size());
  if (!r.pairs.empty()) {
    double acc = 0.0;
    for (const auto& p : r.pairs) acc += p.distance;
    r.dist_avg = acc / matched;
  }
  return r;
}

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
  double dist_avg = 0.0;
  std::size_t kept = 0;
};

struct PrCurve {
  std::vector<PrPoint> points;
  std::size_t best = 0;   // index of the best f_beta (first on ties)
  double dist_avg_all = 0.0;  // dist_avg with no filtration

  const PrPoint& best_point() const { return points.at(best); }
};

inline std::vector<RankedMaximum> filter_by_life_span(std::span<const RankedMaximum> maxima, double threshold) {
  std::vector<RankedMaximum> kept;
  for (const auto& m : maxima) {
    if (m.life_span >= threshold) kept.push_back(m);
  }
  return kept;
}

// One point per distinct life span, keeping maxima with life span >= the
// threshold.
inline PrCurve pr_sweep(std::span<const RankedMaximum> maxima, const GroundTruth& gt, const EvalConfig& cfg = {}) {
  cfg.validate();
  if (maxima.empty()) throw DataError("no maxima to evaluate");
  std::vector<double> thresholds;
  for (const auto& m : maxima) thresholds.push_back(m.life_span);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  PrCurve curve;
  curve.points.resize(thresholds.size());
  parallel_for(thresholds.size(), [&](std::size_t k) {
    const auto kept = filter_by_life_span(maxima, thresholds[k]);
    const auto m = match_maxima(kept, gt, cfg.radius);
    curve.points[k] = {thresholds[k], m.precision, m.recall, f_beta(m.precision, m.recall, cfg.beta), m.dist_avg,
                       kept.size()};
  });
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    if (curve.points[k].f_beta > curve.points[curve.best].f_beta) curve.best = k;
  }
  curve.dist_avg_all = match_maxima(maxima, gt, cfg.radius).dist_avg;
  return curve;
}

}  // namespace tinscale
