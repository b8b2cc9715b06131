#pragma once

#include <string>
#include <tuple>
#include <vector>

namespace uav {

struct Trial {
  int label = 0;  // 1 = target (same speaker), 0 = nontarget
  std::string enroll;
  std::string test;
};

struct TrialSet {
  std::vector<Trial> trials;
};

struct ScoredTrial {
  double score = 0.0;
  int label = 0;
};

struct ScoreSet {
  std::vector<ScoredTrial> items;
};

// Plain-text trial list, one "label id1 id2" per line (VoxCeleb convention).
// CRLF and LF both parse; labels must be literally "0" or "1".
TrialSet parse_trials(const std::string& path);

// One ROC operating point for the decision rule "accept iff score >= t".
// Vertices are ordered by increasing threshold, from (p_fa=1, p_miss=0)
// below all scores to (p_fa=0, p_miss=1) above them. Representative
// thresholds are midpoints between adjacent distinct scores.
struct RocVertex {
  double threshold = 0.0;
  double p_fa = 0.0;
  double p_miss = 0.0;
};

std::vector<RocVertex> roc_vertices(const ScoreSet& s);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Equal error rate by linear interpolation on (p_fa, p_miss) between the
// adjacent ROC vertices where miss - fa changes sign.
EerResult compute_eer(const ScoreSet& s);

struct DcfResult {
  double dcf = 0.0;
  double threshold = 0.0;
};

// Minimum of c_miss*p_target*P_miss + c_fa*(1-p_target)*P_fa over all
// operating points, normalized by min(c_miss*p_target, c_fa*(1-p_target)).
DcfResult compute_min_dcf(const ScoreSet& s, double p_target, double c_miss, double c_fa);

// Scores file: "id1 id2 score" per line.
using ScoreLine = std::tuple<std::string, std::string, double>;
void save_scores(const std::string& path, const std::vector<ScoreLine>& lines);
std::vector<ScoreLine> load_scores(const std::string& path);

// Joins trial labels against a scores file; every trial must find its pair
// (either orientation, cosine scoring is symmetric).
ScoreSet join_scores(const TrialSet& trials, const std::vector<ScoreLine>& lines);

}  // namespace uav
