#include "uav/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "uav/errors.hpp"

namespace uav {

TrialSet parse_trials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("parse_trials: cannot open " + path);
  TrialSet set;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string label, id1, id2, extra;
    if (!(ss >> label >> id1 >> id2) || (ss >> extra))
      throw ParseError("parse_trials: malformed line " + std::to_string(lineno) + " in " + path);
    if (label != "0" && label != "1")
      throw ParseError("parse_trials: label must be 0 or 1 at line " + std::to_string(lineno) +
                       " in " + path);
    set.trials.push_back({label == "1" ? 1 : 0, id1, id2});
  }
  return set;
}

namespace {

void check_two_classes(const ScoreSet& s, const char* what) {
  int nt = 0, nn = 0;
  for (const ScoredTrial& it : s.items) (it.label == 1 ? nt : nn)++;
  if (nt == 0 || nn == 0)
    throw DegenerateSetError(std::string(what) + ": need at least one target and one nontarget");
}

}  // namespace

std::vector<RocVertex> roc_vertices(const ScoreSet& s) {
  check_two_classes(s, "roc_vertices");
  std::vector<ScoredTrial> sorted = s.items;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredTrial& a, const ScoredTrial& b) { return a.score < b.score; });
  int n_target = 0, n_nontarget = 0;
  for (const ScoredTrial& it : sorted) (it.label == 1 ? n_target : n_nontarget)++;

  std::vector<RocVertex> v;
  v.push_back({sorted.front().score - 1.0, 1.0, 0.0});
  // walk runs of equal scores; after run j the rule "accept iff >= t" with
  // t just above that score rejects everything seen so far
  int cum_target = 0, cum_nontarget = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double u = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == u) {
      (sorted[i].label == 1 ? cum_target : cum_nontarget)++;
      ++i;
    }
    const double thr = i < sorted.size() ? 0.5 * (u + sorted[i].score) : u + 1.0;
    v.push_back({thr, static_cast<double>(n_nontarget - cum_nontarget) / n_nontarget,
                 static_cast<double>(cum_target) / n_target});
  }
  return v;
}

EerResult compute_eer(const ScoreSet& s) {
  const std::vector<RocVertex> v = roc_vertices(s);
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double g = v[j].p_miss - v[j].p_fa;
    if (g < 0.0) continue;
    if (g == 0.0 || j == 0) return {v[j].p_fa, v[j].threshold};
    const double g0 = v[j - 1].p_miss - v[j - 1].p_fa;
    const double alpha = g0 / (g0 - g);
    const double eer = v[j - 1].p_fa + alpha * (v[j].p_fa - v[j - 1].p_fa);
    const double thr = v[j - 1].threshold + alpha * (v[j].threshold - v[j - 1].threshold);
    return {eer, thr};
  }
  // unreachable: the last vertex has p_miss=1 >= p_fa=0
  throw NumericError("compute_eer: no crossing found");
}

DcfResult compute_min_dcf(const ScoreSet& s, double p_target, double c_miss, double c_fa) {
  if (!(p_target > 0.0 && p_target < 1.0))
    throw ConfigError("eval.p_target: must lie strictly between 0 and 1");
  if (!(c_miss > 0.0) || !(c_fa > 0.0))
    throw ConfigError("eval.c_miss/c_fa: costs must be positive");
  const std::vector<RocVertex> v = roc_vertices(s);
  double best = std::numeric_limits<double>::infinity();
  double best_thr = v.front().threshold;
  for (const RocVertex& x : v) {
    const double dcf = c_miss * p_target * x.p_miss + c_fa * (1.0 - p_target) * x.p_fa;
    if (dcf < best) {
      best = dcf;
      best_thr = x.threshold;
    }
  }
  const double norm = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  return {best / norm, best_thr};
}

void save_scores(const std::string& path, const std::vector<ScoreLine>& lines) {
  std::ofstream out(path);
  if (!out) throw IoError("save_scores: cannot open " + path);
  out.precision(17);
  for (const ScoreLine& l : lines)
    out << std::get<0>(l) << " " << std::get<1>(l) << " " << std::get<2>(l) << "\n";
  if (!out) throw IoError("save_scores: write failed for " + path);
}

std::vector<ScoreLine> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_scores: cannot open " + path);
  std::vector<ScoreLine> lines;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id1, id2;
    double score;
    std::string extra;
    if (!(ss >> id1 >> id2 >> score) || (ss >> extra))
      throw ParseError("load_scores: malformed line " + std::to_string(lineno) + " in " + path);
    lines.emplace_back(id1, id2, score);
  }
  return lines;
}

ScoreSet join_scores(const TrialSet& trials, const std::vector<ScoreLine>& lines) {
  std::map<std::pair<std::string, std::string>, double> by_pair;
  for (const ScoreLine& l : lines) by_pair[{std::get<0>(l), std::get<1>(l)}] = std::get<2>(l);
  ScoreSet set;
  set.items.reserve(trials.trials.size());
  for (const Trial& t : trials.trials) {
    auto it = by_pair.find({t.enroll, t.test});
    if (it == by_pair.end()) it = by_pair.find({t.test, t.enroll});
    if (it == by_pair.end())
      throw ParseError("join_scores: no score for trial pair " + t.enroll + " " + t.test);
    set.items.push_back({it->second, t.label});
  }
  return set;
}

}  // namespace uav
