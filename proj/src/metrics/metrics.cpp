#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "common/error.hpp"

namespace tgpt::metrics {

using anno::PointStatus;
using anno::Vec2;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::size_t count_visible(const EvalPair& p) {
  std::size_t n = 0;
  for (const Sample& s : p.samples()) n += s.gt.has_value();
  return n;
}

void require_samples(const EvalPair& p, const char* what) {
  if (p.samples().empty()) fail(ErrorCode::kEmptyEval, std::string(what) + ": nothing to evaluate");
}

void require_visible(const EvalPair& p, const char* what) {
  if (count_visible(p) == 0) {
    fail(ErrorCode::kNoVisiblePoints, std::string(what) + ": no ground-truth visible points in " +
                                          p.clip_id());
  }
}

}  // namespace

Vec2 rescale(Vec2 c, int from_w, int from_h, int to_w, int to_h) {
  if (from_w <= 0 || from_h <= 0 || to_w <= 0 || to_h <= 0) {
    fail(ErrorCode::kZeroExtent, "rescale: extents must be positive");
  }
  return {c.x * to_w / from_w, c.y * to_h / from_h};
}

EvalPair::EvalPair(const anno::ClipAnnotation& gt, const track::TrackPrediction& pred, int eval_w,
                   int eval_h)
    : clip_id_(gt.clip_id), scenario_(gt.scenario) {
  if (pred.points.empty() ? !gt.tracks.empty() : pred.points[0].size() != gt.tracks.size()) {
    fail(ErrorCode::kShapeMismatch, gt.clip_id + ": prediction has a different number of tracks");
  }
  const int pw = pred.width > 0 ? pred.width : gt.width;
  const int ph = pred.height > 0 ? pred.height : gt.height;
  for (std::size_t j = 0; j < gt.frame_indices.size(); ++j) {
    const int frame = gt.frame_indices[j];
    const int row = pred.row_of(frame);
    if (row < 0) {
      fail(ErrorCode::kFrameCoverageGap, gt.clip_id + ": prediction has no frame " +
                                             std::to_string(frame));
    }
    for (std::size_t i = 0; i < gt.tracks.size(); ++i) {
      const anno::PointObservation& o = gt.tracks[i].observations.at(j);
      const track::PredictedPoint& pp = pred.points[row][i];
      Sample s;
      s.track = i;
      s.frame = frame;
      s.final_frame = j + 1 == gt.frame_indices.size();
      if (o.coord) s.gt = rescale(*o.coord, gt.width, gt.height, eval_w, eval_h);
      s.gt_status = o.status;
      s.pred = rescale(pp.coord, pw, ph, eval_w, eval_h);
      s.pred_visible = pp.visible;
      s.pred_status = pp.status;
      samples_.push_back(s);
    }
  }
}

double delta_accuracy(const EvalPair& p, double k) {
  if (!(k > 0)) fail(ErrorCode::kInvalidArgument, "delta threshold must be positive");
  require_visible(p, "delta_accuracy");
  std::size_t hit = 0, total = 0;
  for (const Sample& s : p.samples()) {
    if (!s.gt) continue;
    ++total;
    hit += dist(*s.gt, s.pred) <= k;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

double delta_avg(const EvalPair& p) {
  double acc = 0.0;
  for (double k : kThresholds) acc += delta_accuracy(p, k);
  return acc / static_cast<double>(kThresholds.size());
}

double average_jaccard(const EvalPair& p) {
  require_samples(p, "average_jaccard");
  require_visible(p, "average_jaccard");
  double acc = 0.0;
  for (double k : kThresholds) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const Sample& s : p.samples()) {
      if (s.gt) {
        if (s.pred_visible && dist(*s.gt, s.pred) <= k) ++tp;
        else ++fn;
      } else if (s.pred_visible) {
        ++fp;
      }
    }
    acc += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
  }
  return acc / static_cast<double>(kThresholds.size());
}

double occlusion_accuracy(const EvalPair& p) {
  require_samples(p, "occlusion_accuracy");
  std::size_t ok = 0;
  for (const Sample& s : p.samples()) ok += s.gt.has_value() == s.pred_visible;
  return static_cast<double>(ok) / static_cast<double>(p.samples().size());
}

double endpoint_error(const EvalPair& p) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const Sample& s : p.samples()) {
    if (!s.final_frame || !s.gt) continue;
    acc += dist(*s.gt, s.pred);
    ++n;
  }
  if (n == 0) {
    fail(ErrorCode::kNoEndpointGT, p.clip_id() + ": no visible point at the final annotated frame");
  }
  return acc / static_cast<double>(n);
}

double text_accuracy(const EvalPair& p) {
  require_samples(p, "text_accuracy");
  std::size_t ok = 0;
  for (const Sample& s : p.samples()) ok += s.gt_status == s.pred_status;
  return static_cast<double>(ok) / static_cast<double>(p.samples().size());
}

std::map<PointStatus, double> text_recall(const EvalPair& p) {
  require_samples(p, "text_recall");
  std::map<PointStatus, std::pair<std::size_t, std::size_t>> counts;
  for (const Sample& s : p.samples()) {
    auto& c = counts[s.gt_status];
    c.first += s.gt_status == s.pred_status;
    ++c.second;
  }
  std::map<PointStatus, double> out;
  for (const auto& [status, c] : counts) {
    out[status] = static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  return out;
}

MetricReport evaluate(const EvalPair& p, std::string group) {
  MetricReport r;
  r.clip_id = p.clip_id();
  r.group = std::move(group);
  std::vector<bool> seen;
  for (const Sample& s : p.samples()) {
    if (s.track >= seen.size()) seen.resize(s.track + 1, false);
    if (!seen[s.track]) ++r.n_points;
    seen[s.track] = true;
    auto& c = r.status_counts[s.gt_status];
    c.first += s.gt_status == s.pred_status;
    ++c.second;
  }
  r.oa = occlusion_accuracy(p);
  r.text_acc = text_accuracy(p);
  r.skipped = count_visible(p) == 0;
  if (r.skipped) {
    r.delta_at.fill(kNaN);
    r.delta_avg = r.aj = kNaN;
    return r;
  }
  for (std::size_t i = 0; i < kThresholds.size(); ++i) r.delta_at[i] = delta_accuracy(p, kThresholds[i]);
  r.delta_avg = delta_avg(p);
  r.aj = average_jaccard(p);
  try {
    r.epe = endpoint_error(p);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoEndpointGT) throw;
  }
  return r;
}

std::vector<MetricReport> evaluate_groups(const EvalPair& p, const anno::ClipAnnotation& gt,
                                          Grouping grouping) {
  if (grouping == Grouping::kScenario) {
    return {evaluate(p, std::string(anno::to_string(gt.scenario)))};
  }
  std::vector<MetricReport> out;
  auto group_of = [&](std::size_t i) -> std::string {
    const anno::Track& t = gt.tracks.at(i);
    if (t.type == anno::PointType::kTissue || !t.instrument) return "Tissue";
    return std::string(anno::to_string(t.instrument->type));
  };
  std::vector<std::string> groups = {"Tissue"};
  for (std::size_t k = 0; k < anno::kInstrumentTypeCount; ++k) {
    groups.emplace_back(anno::to_string(static_cast<anno::InstrumentType>(k)));
  }
  for (const std::string& g : groups) {
    EvalPair sub = p.filtered([&](std::size_t i) { return group_of(i) == g; });
    if (!sub.samples().empty()) out.push_back(evaluate(sub, g));
  }
  return out;
}

namespace {

std::vector<std::string> canonical_groups() {
  std::vector<std::string> g;
  for (int s = 0; s <= static_cast<int>(anno::Scenario::kClean); ++s) {
    g.emplace_back(anno::to_string(static_cast<anno::Scenario>(s)));
  }
  g.emplace_back("Tissue");
  for (std::size_t k = 0; k < anno::kInstrumentTypeCount; ++k) {
    g.emplace_back(anno::to_string(static_cast<anno::InstrumentType>(k)));
  }
  return g;
}

TableRow summarise(std::string name, const std::vector<const MetricReport*>& rs) {
  TableRow row;
  row.group = std::move(name);
  row.clips = rs.size();
  std::size_t scored = 0, with_epe = 0;
  double epe = 0.0;
  for (const MetricReport* r : rs) {
    row.oa += r->oa;
    row.text_acc += r->text_acc;
    if (r->skipped) {
      ++row.skipped;
      continue;
    }
    ++scored;
    row.aj += r->aj;
    row.delta_avg += r->delta_avg;
    for (std::size_t i = 0; i < kThresholds.size(); ++i) row.delta_at[i] += r->delta_at[i];
    if (r->epe) {
      epe += *r->epe;
      ++with_epe;
    }
  }
  const double n = static_cast<double>(rs.size());
  row.oa /= n;
  row.text_acc /= n;
  if (scored == 0) {
    row.aj = row.delta_avg = kNaN;
    row.delta_at.fill(kNaN);
  } else {
    row.aj /= static_cast<double>(scored);
    row.delta_avg /= static_cast<double>(scored);
    for (double& d : row.delta_at) d /= static_cast<double>(scored);
  }
  if (with_epe) row.epe = epe / static_cast<double>(with_epe);
  return row;
}

std::string fmt(const char* f, double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pct(double v) { return std::isnan(v) ? "n/a" : fmt("%.2f", 100.0 * v); }

}  // namespace

std::vector<TableRow> aggregate(std::span<const MetricReport> reports) {
  std::vector<std::string> order = canonical_groups();
  for (const MetricReport& r : reports) {
    if (std::find(order.begin(), order.end(), r.group) == order.end()) order.push_back(r.group);
  }
  std::vector<TableRow> rows;
  for (const std::string& g : order) {
    std::vector<const MetricReport*> members;
    for (const MetricReport& r : reports)
      if (r.group == g) members.push_back(&r);
    if (!members.empty()) rows.push_back(summarise(g, members));
  }
  if (!reports.empty()) {
    std::vector<const MetricReport*> all;
    for (const MetricReport& r : reports) all.push_back(&r);
    rows.push_back(summarise(kMeanRow, all));
  }
  return rows;
}

std::string report_csv(std::span<const MetricReport> reports) {
  std::string out = "clip_id,group,n_points,skipped";
  for (double k : kThresholds) out += ",delta_" + std::to_string(static_cast<int>(k));
  out += ",delta_avg,aj,oa,epe,text_acc\n";
  for (const MetricReport& r : reports) {
    out += r.clip_id + "," + r.group + "," + std::to_string(r.n_points) + "," +
           (r.skipped ? "1" : "0");
    for (double d : r.delta_at) out += "," + fmt("%.6f", d);
    out += "," + fmt("%.6f", r.delta_avg) + "," + fmt("%.6f", r.aj) + "," + fmt("%.6f", r.oa) + "," +
           (r.epe ? fmt("%.6f", *r.epe) : "") + "," + fmt("%.6f", r.text_acc) + "\n";
  }
  return out;
}

namespace {

void table(std::string& out, const char* first, std::span<const TableRow> rows) {
  out += std::string("| ") + first + " | Clips | Skipped | AJ | <δ_avg | OA | EPE | Text Acc |\n";
  out += "|---|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const TableRow& r : rows) {
    const bool mean = r.group == kMeanRow;
    const std::string name = mean ? "**" + r.group + "**" : r.group;
    out += "| " + name + " | " + std::to_string(r.clips) + " | " + std::to_string(r.skipped) +
           " | " + pct(r.aj) + " | " + pct(r.delta_avg) + " | " + pct(r.oa) + " | " +
           (r.epe ? fmt("%.2f", *r.epe) : "n/a") + " | " + pct(r.text_acc) + " |\n";
  }
}

}  // namespace

std::string report_markdown(std::span<const TableRow> scenario_rows,
                            std::span<const TableRow> group_rows,
                            std::span<const MetricReport> reports) {
  std::string out = "# Tracking report\n\n";
  out += "Fractions in percent; EPE in pixels at 256x256.\n\n";
  out += "## By scenario\n\n";
  table(out, "Scenario", scenario_rows);
  if (!group_rows.empty()) {
    out += "\n## By point group\n\n";
    table(out, "Group", group_rows);
  }
  std::map<PointStatus, std::pair<std::size_t, std::size_t>> pooled;
  for (const MetricReport& r : reports)
    for (const auto& [s, c] : r.status_counts) {
      pooled[s].first += c.first;
      pooled[s].second += c.second;
    }
  if (!pooled.empty()) {
    out += "\n## Status recall\n\n| Status | Samples | Recall |\n|---|---:|---:|\n";
    for (const auto& [s, c] : pooled) {
      out += "| " + std::string(anno::to_string(s)) + " | " + std::to_string(c.second) + " | " +
             pct(static_cast<double>(c.first) / static_cast<double>(c.second)) + " |\n";
    }
  }
  return out;
}

}  // namespace tgpt::metrics
