#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "uav/errors.hpp"
#include "uav/metrics.hpp"

namespace uav {

// Reference implementations for cross-checking compute_eer / compute_min_dcf.
// Operating points are recomputed the slow way: every candidate threshold
// (each distinct score +/- epsilon, plus the two extremes) is evaluated by
// counting over the full score list. Only the interpolation rule is shared
// with the fast path, since the rule itself is part of the metric definition.

struct OraclePoint {
  double threshold;
  double p_fa;
  double p_miss;
};

inline std::vector<OraclePoint> bruteforce_operating_points(const ScoreSet& s) {
  int n_target = 0, n_nontarget = 0;
  for (const ScoredTrial& it : s.items) (it.label == 1 ? n_target : n_nontarget)++;
  if (n_target == 0 || n_nontarget == 0)
    throw DegenerateSetError("bruteforce_operating_points: need both classes");

  std::set<double> distinct;
  for (const ScoredTrial& it : s.items) distinct.insert(it.score);
  std::vector<double> uniq(distinct.begin(), distinct.end());
  double min_gap = 2.0;
  for (std::size_t i = 1; i < uniq.size(); ++i) min_gap = std::min(min_gap, uniq[i] - uniq[i - 1]);
  const double eps = uniq.size() > 1 ? min_gap / 4.0 : 0.5;

  std::vector<double> candidates;
  candidates.push_back(uniq.front() - 1.0);
  for (double u : uniq) {
    candidates.push_back(u - eps);
    candidates.push_back(u + eps);
  }
  candidates.push_back(uniq.back() + 1.0);
  std::sort(candidates.begin(), candidates.end());

  std::vector<OraclePoint> points;
  for (double t : candidates) {
    int fa = 0, miss = 0;
    for (const ScoredTrial& it : s.items) {
      if (it.label == 0 && it.score >= t) ++fa;
      if (it.label == 1 && it.score < t) ++miss;
    }
    OraclePoint p{t, static_cast<double>(fa) / n_nontarget, static_cast<double>(miss) / n_target};
    if (points.empty() || points.back().p_fa != p.p_fa || points.back().p_miss != p.p_miss)
      points.push_back(p);
  }
  return points;
}

inline double bruteforce_eer(const ScoreSet& s) {
  const std::vector<OraclePoint> pts = bruteforce_operating_points(s);
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double g = pts[j].p_miss - pts[j].p_fa;
    if (g < 0.0) continue;
    if (g == 0.0 || j == 0) return pts[j].p_fa;
    const double g0 = pts[j - 1].p_miss - pts[j - 1].p_fa;
    const double alpha = g0 / (g0 - g);
    return pts[j - 1].p_fa + alpha * (pts[j].p_fa - pts[j - 1].p_fa);
  }
  throw NumericError("bruteforce_eer: no crossing found");
}

inline double bruteforce_min_dcf(const ScoreSet& s, double p_target, double c_miss, double c_fa) {
  const std::vector<OraclePoint> pts = bruteforce_operating_points(s);
  double best = std::numeric_limits<double>::infinity();
  for (const OraclePoint& p : pts)
    best = std::min(best, c_miss * p_target * p.p_miss + c_fa * (1.0 - p_target) * p.p_fa);
  return best / std::min(c_miss * p_target, c_fa * (1.0 - p_target));
}

}  // namespace uav
