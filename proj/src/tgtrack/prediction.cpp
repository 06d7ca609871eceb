#include "tgtrack/prediction.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "common/error.hpp"

namespace tgpt::track {

using nlohmann::json;

int TrackPrediction::row_of(int frame) const {
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i] == frame) return static_cast<int>(i);
  return -1;
}

namespace {

void put_num(std::string& out, double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void put_xy(std::string& out, anno::Vec2 p) {
  out += '[';
  put_num(out, p.x);
  out += ", ";
  put_num(out, p.y);
  out += ']';
}

anno::Vec2 get_xy(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    fail(ErrorCode::kMalformedDocument, std::string("prediction: ") + what + " must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::kMalformedDocument, std::string("prediction: missing ") + key);
  return *it;
}

}  // namespace

std::string serialize_prediction(const TrackPrediction& p) {
  std::string out = "{\n";
  out += "  \"clip_id\": " + json(p.clip_id).dump() + ",\n";
  out += "  \"width\": " + std::to_string(p.width) + ",\n";
  out += "  \"height\": " + std::to_string(p.height) + ",\n";
  out += "  \"tracks\": [";
  for (std::size_t i = 0; i < p.queries.size(); ++i) {
    out += i ? ",\n    {\n" : "\n    {\n";
    out += "      \"point_type\": " + json(std::string(anno::to_string(p.types[i]))).dump() + ",\n";
    out += "      \"queries\": ";
    put_xy(out, p.queries[i]);
    out += ",\n      \"frames\": [";
    for (std::size_t r = 0; r < p.frames.size(); ++r) {
      const PredictedPoint& pt = p.points[r][i];
      out += r ? ",\n        " : "\n        ";
      out += "{\"frame\": " + std::to_string(p.frames[r]) + ", \"coord\": ";
      put_xy(out, pt.coord);
      out += ", \"status\": " + json(std::string(anno::to_string(pt.status))).dump();
      out += pt.visible ? ", \"visible\": true" : ", \"visible\": false";
      out += ", \"coarse\": ";
      put_xy(out, pt.coarse);
      out += ", \"offset\": ";
      put_xy(out, pt.offset);
      out += '}';
    }
    out += p.frames.empty() ? "]\n    }" : "\n      ]\n    }";
  }
  out += p.queries.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

TrackPrediction parse_prediction(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformedDocument, std::string("prediction: ") + e.what());
  }
  TrackPrediction p;
  try {
    p.clip_id = field(doc, "clip_id").get<std::string>();
    p.width = field(doc, "width").get<int>();
    p.height = field(doc, "height").get<int>();
    const json& tracks = field(doc, "tracks");
    if (!tracks.is_array()) fail(ErrorCode::kMalformedDocument, "prediction: tracks must be a list");
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const json& t = tracks[i];
      auto type = anno::parse_point_type(field(t, "point_type").get<std::string>());
      if (!type) fail(ErrorCode::kMalformedDocument, "prediction: unknown point_type");
      p.types.push_back(*type);
      p.queries.push_back(get_xy(field(t, "queries"), "queries"));
      const json& frames = field(t, "frames");
      if (i == 0) {
        for (const json& f : frames) p.frames.push_back(field(f, "frame").get<int>());
        p.points.resize(p.frames.size());
      }
      if (frames.size() != p.frames.size()) {
        fail(ErrorCode::kMalformedDocument, "prediction: tracks cover different frames");
      }
      for (std::size_t r = 0; r < frames.size(); ++r) {
        const json& f = frames[r];
        if (field(f, "frame").get<int>() != p.frames[r]) {
          fail(ErrorCode::kMalformedDocument, "prediction: tracks cover different frames");
        }
        PredictedPoint pt;
        pt.coord = get_xy(field(f, "coord"), "coord");
        pt.coarse = get_xy(field(f, "coarse"), "coarse");
        pt.offset = get_xy(field(f, "offset"), "offset");
        auto status = anno::parse_status(field(f, "status").get<std::string>());
        if (!status) fail(ErrorCode::kMalformedDocument, "prediction: unknown status");
        pt.status = *status;
        pt.visible = field(f, "visible").get<bool>();
        p.points[r].push_back(pt);
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedDocument, std::string("prediction: ") + e.what());
  }
  return p;
}

TrackPrediction read_prediction(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_prediction(ss.str());
}

void write_prediction(const std::string& path, const TrackPrediction& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out << serialize_prediction(p);
  if (!out) fail(ErrorCode::kIo, "write failed: " + path);
}

}  // namespace tgpt::track
