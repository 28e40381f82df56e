#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "symbin/object_model.hpp"
#include "symbin/so3.hpp"

namespace symbin {

struct EvalConfig {
  double t_e = 5.0;   // mm
  double t_v = 0.4;   // fraction of the best-visible instance

  void validate() const;
};

struct VisibleGt {
  std::size_t n_gt = 0;
  std::vector<std::size_t> visible;  // instance ids, ascending
};

/// Instance i counts iff n_i / max_k n_k > t_v.
VisibleGt count_visible_gt(std::span<const std::size_t> visible_counts, double t_v);

struct Match {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double distance = 0.0;  // mean symmetry-aware distance, mm
  bool tp = false;
};

struct MatchResult {
  std::vector<Match> matches;  // in the order they were made
  std::size_t tp = 0;
};

/// Greedy one-to-one matching in ascending mean symmetric distance (ties by
/// pred then gt index). A pair is a true positive iff its distance < t_e.
/// Match::gt indexes into `gts`.
MatchResult match_predictions(std::span<const Pose> preds, std::span<const Pose> gts,
                              const ObjectModel& model, double t_e);

/// 2 tp / (n_pred + n_gt), 0 for an empty denominator.
double f1_inst(std::size_t tp, std::size_t n_pred, std::size_t n_gt);

/// Fraction of gt model points whose symmetry-corrected distance under the
/// matched prediction is below t_e. Unmatched gts contribute only to the
/// denominator.
double pointwise_recall(const MatchResult& matches, std::span<const Pose> preds,
                        std::span<const Pose> gts, const ObjectModel& model, double t_e);

struct RecallCounts {
  std::size_t hits = 0;
  std::size_t points = 0;
};

RecallCounts pointwise_recall_counts(const MatchResult& matches, std::span<const Pose> preds,
                                     std::span<const Pose> gts, const ObjectModel& model,
                                     double t_e);

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
  std::size_t tp = 0;
  double f1_inst = 0.0;
  double recall = 0.0;
  RecallCounts recall_counts;
  std::vector<Match> per_instance;  // Match::gt is the scene instance id
};

/// Pools counts over scenes and recomputes f1_inst and recall.
EvalReport aggregate_reports(std::span<const EvalReport> reports);

/// Full evaluation of one scene: visibility filter, matching, F1 and recall.
EvalReport evaluate(std::span<const Pose> gt_poses, std::span<const std::size_t> visible_counts,
                    std::span<const Pose> preds, const ObjectModel& model, const EvalConfig& cfg);

}  // namespace symbin
