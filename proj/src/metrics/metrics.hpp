#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anno/annotation.hpp"
#include "tgtrack/prediction.hpp"

namespace tgpt::metrics {

inline constexpr std::array<double, 5> kThresholds = {2, 4, 8, 16, 32};

anno::Vec2 rescale(anno::Vec2 c, int from_w, int from_h, int to_w, int to_h);

// One annotated (track, frame) observation with its prediction, coordinates
// already in the evaluation frame.
struct Sample {
  std::size_t track = 0;
  int frame = 0;
  bool final_frame = false;  // last annotated frame of the clip
  std::optional<anno::Vec2> gt;
  anno::PointStatus gt_status = anno::PointStatus::kClearView;
  anno::Vec2 pred;
  bool pred_visible = true;
  anno::PointStatus pred_status = anno::PointStatus::kClearView;
};

// Ground truth and prediction of one clip, matched on annotated frames.
// Throws kShapeMismatch on differing track counts and kFrameCoverageGap when
// the prediction lacks an annotated frame.
class EvalPair {
 public:
  EvalPair(const anno::ClipAnnotation& gt, const track::TrackPrediction& pred, int eval_w = 256,
           int eval_h = 256);
  // Keeps only the tracks for which `keep(track_index)` holds.
  template <class Pred>
  EvalPair filtered(Pred keep) const {
    EvalPair out = *this;
    out.samples_.clear();
    for (const Sample& s : samples_)
      if (keep(s.track)) out.samples_.push_back(s);
    return out;
  }

  std::span<const Sample> samples() const { return samples_; }
  const std::string& clip_id() const { return clip_id_; }
  anno::Scenario scenario() const { return scenario_; }

 private:
  std::string clip_id_;
  anno::Scenario scenario_ = anno::Scenario::kClean;
  std::vector<Sample> samples_;
};

double delta_accuracy(const EvalPair& p, double k);  // kNoVisiblePoints
double delta_avg(const EvalPair& p);
double average_jaccard(const EvalPair& p);     // kEmptyEval, kNoVisiblePoints
double occlusion_accuracy(const EvalPair& p);  // kEmptyEval
double endpoint_error(const EvalPair& p);      // kNoEndpointGT
double text_accuracy(const EvalPair& p);       // kEmptyEval
// Recall per ground-truth status present in the pair.
std::map<anno::PointStatus, double> text_recall(const EvalPair& p);

struct MetricReport {
  std::string clip_id;
  std::string group;  // scenario name, "Tissue", or an instrument type
  std::size_t n_points = 0;
  bool skipped = false;  // no GT-visible points: delta/AJ/EPE undefined
  std::array<double, kThresholds.size()> delta_at{};
  double delta_avg = 0, aj = 0, oa = 0, text_acc = 0;
  std::optional<double> epe;
  // Per-status counts for pooled recall: status -> (correct, total).
  std::map<anno::PointStatus, std::pair<std::size_t, std::size_t>> status_counts;
};

MetricReport evaluate(const EvalPair& p, std::string group);

enum class Grouping { kScenario, kInstrumentType };

// kScenario: one report labelled with the clip's scenario. kInstrumentType:
// one report per point group present in the clip ("Tissue" or an instrument
// type name), restricted to that group's tracks.
std::vector<MetricReport> evaluate_groups(const EvalPair& p, const anno::ClipAnnotation& gt,
                                          Grouping grouping);

struct TableRow {
  std::string group;
  std::size_t clips = 0;
  std::size_t skipped = 0;
  double aj = 0, delta_avg = 0, oa = 0, text_acc = 0;
  std::optional<double> epe;
  std::array<double, kThresholds.size()> delta_at{};
};

inline constexpr const char* kMeanRow = "Mean Results";

// Unweighted per-group means over reports, in first-appearance order of a
// canonical group ordering, then the mean over every report. Skipped reports
// count toward OA and text accuracy only.
std::vector<TableRow> aggregate(std::span<const MetricReport> reports);

std::string report_csv(std::span<const MetricReport> reports);
std::string report_markdown(std::span<const TableRow> scenario_rows,
                            std::span<const TableRow> group_rows,
                            std::span<const MetricReport> reports);

}  // namespace tgpt::metrics
