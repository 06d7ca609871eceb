#include <cinttypes>
#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "anno/annotation.hpp"

namespace tgpt::anno {
namespace {

using nlohmann::json;

struct Ctx {
  std::string clip_id;
  int track = -1;
  int frame = -1;

  [[noreturn]] void raise(ViolationCode code, const std::string& detail) const {
    throw SchemaError(code, clip_id, track, frame, detail);
  }
};

const json& field(const json& obj, const char* key, const Ctx& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) ctx.raise(ViolationCode::kMissingField, key);
  return *it;
}

std::string get_string(const json& obj, const char* key, const Ctx& ctx) {
  const json& v = field(obj, key, ctx);
  if (!v.is_string()) ctx.raise(ViolationCode::kWrongType, std::string(key) + " must be a string");
  return v.get<std::string>();
}

std::int64_t get_int(const json& v, const char* key, const Ctx& ctx) {
  if (!v.is_number_integer()) ctx.raise(ViolationCode::kWrongType, std::string(key) + " must be an integer");
  return v.get<std::int64_t>();
}

double get_number(const json& v, const char* key, const Ctx& ctx) {
  if (!v.is_number()) ctx.raise(ViolationCode::kWrongType, std::string(key) + " must be a number");
  return v.get<double>();
}

int narrow_int(std::int64_t v, const char* key, const Ctx& ctx) {
  if (v < INT32_MIN || v > INT32_MAX) ctx.raise(ViolationCode::kWrongType, std::string(key) + " out of range");
  return static_cast<int>(v);
}

void append_fixed3(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // "-0.000" carries no information and would break canonical equality
  if (buf[0] == '-' && std::string_view(buf + 1) == std::string_view("0.000")) {
    out += "0.000";
  } else {
    out += buf;
  }
}

}  // namespace

ClipAnnotation parse_clip_unchecked(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformedDocument, e.what());
  }
  Ctx ctx;
  if (!doc.is_object()) ctx.raise(ViolationCode::kWrongType, "top level must be an object");

  ClipAnnotation clip;
  clip.clip_id = get_string(doc, "clip_id", ctx);
  ctx.clip_id = clip.clip_id;
  clip.width = narrow_int(get_int(field(doc, "width", ctx), "width", ctx), "width", ctx);
  clip.height = narrow_int(get_int(field(doc, "height", ctx), "height", ctx), "height", ctx);
  clip.annotation_fps = quantize(get_number(field(doc, "annotation_fps", ctx), "annotation_fps", ctx));
  const std::string scenario = get_string(doc, "scenario", ctx);
  auto sc = parse_scenario(scenario);
  if (!sc) ctx.raise(ViolationCode::kUnknownValue, "scenario \"" + scenario + "\"");
  clip.scenario = *sc;

  const json& frames = field(doc, "frame_indices", ctx);
  if (!frames.is_array()) ctx.raise(ViolationCode::kWrongType, "frame_indices must be an array");
  for (const json& f : frames) {
    clip.frame_indices.push_back(narrow_int(get_int(f, "frame_indices[]", ctx), "frame", ctx));
  }

  const json& tracks = field(doc, "tracks", ctx);
  if (!tracks.is_array()) ctx.raise(ViolationCode::kWrongType, "tracks must be an array");
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    ctx.track = static_cast<int>(ti);
    ctx.frame = -1;
    const json& jt = tracks[ti];
    if (!jt.is_object()) ctx.raise(ViolationCode::kWrongType, "track must be an object");
    Track tr;
    const std::string type = get_string(jt, "point_type", ctx);
    auto pt = parse_point_type(type);
    if (!pt) ctx.raise(ViolationCode::kUnknownValue, "point_type \"" + type + "\"");
    tr.type = *pt;

    const bool has_itype = jt.contains("instrument_type");
    const bool has_iid = jt.contains("instance_id");
    if (has_itype || has_iid) {
      if (!(has_itype && has_iid)) {
        ctx.raise(ViolationCode::kMissingField,
                  has_itype ? "instance_id" : "instrument_type");
      }
      InstrumentMeta meta;
      const std::string itype = get_string(jt, "instrument_type", ctx);
      auto it = parse_instrument_type(itype);
      if (!it) ctx.raise(ViolationCode::kUnknownValue, "instrument_type \"" + itype + "\"");
      meta.type = *it;
      meta.instance_id = get_int(jt.at("instance_id"), "instance_id", ctx);
      tr.instrument = meta;
    }

    const json& obs = field(jt, "observations", ctx);
    if (!obs.is_array()) ctx.raise(ViolationCode::kWrongType, "observations must be an array");
    for (std::size_t j = 0; j < obs.size(); ++j) {
      const json& jo = obs[j];
      ctx.frame = -1;
      if (!jo.is_object()) ctx.raise(ViolationCode::kWrongType, "observation must be an object");
      const int frame = narrow_int(get_int(field(jo, "frame", ctx), "frame", ctx), "frame", ctx);
      ctx.frame = frame;
      if (j >= clip.frame_indices.size() || clip.frame_indices[j] != frame) {
        ctx.raise(ViolationCode::kFrameMismatch,
                  "observation " + std::to_string(j) + " does not match frame_indices");
      }
      PointObservation ob;
      const json& jc = field(jo, "coord", ctx);
      if (!jc.is_null()) {
        if (!jc.is_array() || jc.size() != 2) {
          ctx.raise(ViolationCode::kWrongType, "coord must be [x, y] or null");
        }
        ob.coord = Vec2{quantize(get_number(jc[0], "coord[0]", ctx)),
                        quantize(get_number(jc[1], "coord[1]", ctx))};
      }
      const std::string status = get_string(jo, "status", ctx);
      auto st = parse_status(status);
      if (!st) ctx.raise(ViolationCode::kUnknownValue, "status \"" + status + "\"");
      ob.status = *st;
      tr.observations.push_back(ob);
    }
    clip.tracks.push_back(std::move(tr));
  }
  return clip;
}

ClipAnnotation parse_clip(std::string_view document) {
  ClipAnnotation clip = parse_clip_unchecked(document);
  auto violations = validate_clip(clip);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    throw SchemaError(v.code, clip.clip_id, v.track, v.frame, v.detail);
  }
  return clip;
}

std::string serialize_clip(const ClipAnnotation& clip) {
  std::string out;
  out.reserve(256 + clip.tracks.size() * clip.frame_indices.size() * 64);
  out += "{\n  \"clip_id\": ";
  out += json(clip.clip_id).dump();
  out += ",\n  \"width\": " + std::to_string(clip.width);
  out += ",\n  \"height\": " + std::to_string(clip.height);
  out += ",\n  \"annotation_fps\": ";
  append_fixed3(out, clip.annotation_fps);
  out += ",\n  \"scenario\": ";
  out += json(std::string(to_string(clip.scenario))).dump();
  out += ",\n  \"frame_indices\": [";
  for (std::size_t i = 0; i < clip.frame_indices.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(clip.frame_indices[i]);
  }
  out += "],\n  \"tracks\": [";
  for (std::size_t ti = 0; ti < clip.tracks.size(); ++ti) {
    const Track& tr = clip.tracks[ti];
    out += ti ? ",\n    {\n" : "\n    {\n";
    out += "      \"point_type\": ";
    out += json(std::string(to_string(tr.type))).dump();
    if (tr.instrument) {
      out += ",\n      \"instrument_type\": ";
      out += json(std::string(to_string(tr.instrument->type))).dump();
      out += ",\n      \"instance_id\": " + std::to_string(tr.instrument->instance_id);
    }
    out += ",\n      \"observations\": [";
    for (std::size_t j = 0; j < tr.observations.size(); ++j) {
      const PointObservation& ob = tr.observations[j];
      out += j ? ",\n        " : "\n        ";
      out += "{\"frame\": ";
      out += j < clip.frame_indices.size() ? std::to_string(clip.frame_indices[j]) : "-1";
      out += ", \"coord\": ";
      if (ob.coord) {
        out += "[";
        append_fixed3(out, ob.coord->x);
        out += ", ";
        append_fixed3(out, ob.coord->y);
        out += "]";
      } else {
        out += "null";
      }
      out += ", \"status\": ";
      out += json(std::string(to_string(ob.status))).dump();
      out += "}";
    }
    out += tr.observations.empty() ? "]\n    }" : "\n      ]\n    }";
  }
  out += clip.tracks.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

}  // namespace tgpt::anno
