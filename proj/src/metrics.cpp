#include "symbin/metrics.hpp"

#include <algorithm>
#include <tuple>

namespace symbin {

void EvalConfig::validate() const {
  if (!(t_e > 0.0)) throw InvalidArgument("tolerance threshold t_e must be positive");
  if (!(t_v > 0.0 && t_v < 1.0)) throw InvalidArgument("visibility threshold t_v must lie in (0, 1)");
}

VisibleGt count_visible_gt(std::span<const std::size_t> visible_counts, double t_v) {
  VisibleGt out;
  if (visible_counts.empty()) return out;
  const std::size_t best = *std::max_element(visible_counts.begin(), visible_counts.end());
  if (best == 0) return out;
  for (std::size_t i = 0; i < visible_counts.size(); ++i) {
    if (static_cast<double>(visible_counts[i]) / static_cast<double>(best) > t_v) {
      out.visible.push_back(i);
    }
  }
  out.n_gt = out.visible.size();
  return out;
}

MatchResult match_predictions(std::span<const Pose> preds, std::span<const Pose> gts,
                              const ObjectModel& model, double t_e) {
  struct Pair {
    double d;
    std::size_t p;
    std::size_t g;
  };
  std::vector<Pair> pairs;
  pairs.reserve(preds.size() * gts.size());
  std::vector<Mat3> gt_rot;
  for (const auto& g : gts) gt_rot.push_back(g.matrix());
  for (std::size_t p = 0; p < preds.size(); ++p) {
    const Mat3 rp = preds[p].matrix();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      pairs.push_back({symmetric_mean_distance(model.cloud, gt_rot[g], gts[g].translation, rp,
                                               preds[p].translation, model.group, model.mask),
                       p, g});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.d, a.p, a.g) < std::tie(b.d, b.p, b.g);
  });

  MatchResult out;
  std::vector<bool> pred_used(preds.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  for (const auto& pr : pairs) {
    if (pred_used[pr.p] || gt_used[pr.g]) continue;
    pred_used[pr.p] = true;
    gt_used[pr.g] = true;
    const bool tp = pr.d < t_e;
    out.matches.push_back({pr.p, pr.g, pr.d, tp});
    if (tp) ++out.tp;
  }
  return out;
}

double f1_inst(std::size_t tp, std::size_t n_pred, std::size_t n_gt) {
  const std::size_t denom = n_pred + n_gt;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

RecallCounts pointwise_recall_counts(const MatchResult& matches, std::span<const Pose> preds,
                                     std::span<const Pose> gts, const ObjectModel& model,
                                     double t_e) {
  RecallCounts out;
  out.points = gts.size() * model.cloud.size();
  for (const auto& m : matches.matches) {
    const auto d = symmetric_pose_distance(model.cloud, gts[m.gt], preds[m.pred], model.group,
                                           model.mask);
    out.hits += static_cast<std::size_t>(
        std::count_if(d.per_point.begin(), d.per_point.end(), [&](double v) { return v < t_e; }));
  }
  return out;
}

namespace {

double ratio(const RecallCounts& c) {
  return c.points == 0 ? 0.0 : static_cast<double>(c.hits) / static_cast<double>(c.points);
}

}  // namespace

double pointwise_recall(const MatchResult& matches, std::span<const Pose> preds,
                        std::span<const Pose> gts, const ObjectModel& model, double t_e) {
  return ratio(pointwise_recall_counts(matches, preds, gts, model, t_e));
}

EvalReport aggregate_reports(std::span<const EvalReport> reports) {
  EvalReport out;
  for (const auto& r : reports) {
    out.n_gt += r.n_gt;
    out.n_pred += r.n_pred;
    out.tp += r.tp;
    out.recall_counts.hits += r.recall_counts.hits;
    out.recall_counts.points += r.recall_counts.points;
  }
  out.f1_inst = f1_inst(out.tp, out.n_pred, out.n_gt);
  out.recall = ratio(out.recall_counts);
  return out;
}

EvalReport evaluate(std::span<const Pose> gt_poses, std::span<const std::size_t> visible_counts,
                    std::span<const Pose> preds, const ObjectModel& model, const EvalConfig& cfg) {
  cfg.validate();
  if (gt_poses.size() != visible_counts.size()) {
    throw InvalidArgument("one visible count per gt instance is required");
  }
  const VisibleGt vis = count_visible_gt(visible_counts, cfg.t_v);
  std::vector<Pose> gts;
  for (auto i : vis.visible) gts.push_back(gt_poses[i]);

  const MatchResult matches = match_predictions(preds, gts, model, cfg.t_e);
  EvalReport report;
  report.n_gt = vis.n_gt;
  report.n_pred = preds.size();
  report.tp = matches.tp;
  report.f1_inst = f1_inst(report.tp, report.n_pred, report.n_gt);
  report.recall_counts = pointwise_recall_counts(matches, preds, gts, model, cfg.t_e);
  report.recall = ratio(report.recall_counts);
  for (auto m : matches.matches) {
    m.gt = vis.visible[m.gt];
    report.per_instance.push_back(m);
  }
  return report;
}

}  // namespace symbin
