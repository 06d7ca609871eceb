#pragma once

#include <string>
#include <vector>

#include "anno/annotation.hpp"

namespace tgpt::track {

struct PredictedPoint {
  anno::Vec2 coord;   // refined = coarse + offset
  anno::Vec2 coarse;
  anno::Vec2 offset;
  anno::PointStatus status = anno::PointStatus::kClearView;  // argmax of the status head
  bool visible = true;
  friend bool operator==(const PredictedPoint&, const PredictedPoint&) = default;
};

struct TrackPrediction {
  std::string clip_id;
  int width = 0;
  int height = 0;
  std::vector<anno::Vec2> queries;
  std::vector<anno::PointType> types;
  std::vector<int> frames;                         // frame index of each row of `points`
  std::vector<std::vector<PredictedPoint>> points;  // [frame][track]

  // Row of frame index `frame`, or -1.
  int row_of(int frame) const;
  friend bool operator==(const TrackPrediction&, const TrackPrediction&) = default;
};

// `.pred.json`. Numbers are written in shortest round-trip form, so parsing a
// serialised prediction gives back the same values.
std::string serialize_prediction(const TrackPrediction& p);
TrackPrediction parse_prediction(std::string_view text);

TrackPrediction read_prediction(const std::string& path);
void write_prediction(const std::string& path, const TrackPrediction& p);

}  // namespace tgpt::track
