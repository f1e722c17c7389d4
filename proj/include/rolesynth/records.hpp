#pragma once

// Record types that flow between pipeline stages, and their line encoding.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <string>

#include "rolesynth/captions.hpp"
#include "rolesynth/error.hpp"

namespace rolesynth {

enum class ScoreStatus { ok, parse_failed };

inline const char* to_string(ScoreStatus s) {
  return s == ScoreStatus::ok ? "ok" : "parse_failed";
}

struct ScoredRecord {
  CaptionRecord record;
  std::optional<int> score;  // present iff status == ok
  std::string rationale;
  ScoreStatus status = ScoreStatus::parse_failed;

  bool operator==(const ScoredRecord&) const = default;
};

struct NormalizedRecord {
  ScoredRecord scored;
  double z = 0.0;

  bool operator==(const NormalizedRecord&) const = default;
};

inline constexpr const char* kCaptionSchema = "rolesynth.caption/1";
inline constexpr const char* kScoredSchema = "rolesynth.scored/1";
inline constexpr const char* kFilteredSchema = "rolesynth.filtered/1";

using ojson = nlohmann::ordered_json;

inline ojson caption_fields(const CaptionRecord& r) {
  ojson j;
  j["image_id"] = r.image_id;
  j["image_ref"] = r.image_ref;
  j["role_name"] = r.role_name;
  j["granularity"] = to_string(r.granularity);
  j["caption"] = r.caption;
  j["word_count"] = r.word_count;
  j["created_at"] = r.created_at;
  return j;
}

inline ojson to_json(const CaptionRecord& r) {
  ojson j;
  j["schema"] = kCaptionSchema;
  const ojson fields = caption_fields(r);
  for (auto& [k, v] : fields.items()) j[k] = v;
  return j;
}

inline ojson to_json(const ScoredRecord& r) {
  ojson j;
  j["schema"] = kScoredSchema;
  j["record"] = caption_fields(r.record);
  j["score"] = r.score ? ojson(*r.score) : ojson(nullptr);
  j["rationale"] = r.rationale;
  j["score_status"] = to_string(r.status);
  return j;
}

inline ojson to_json(const NormalizedRecord& r) {
  ojson j;
  j["schema"] = kFilteredSchema;
  j["scored"] = to_json(r.scored);
  j["scored"].erase("schema");
  j["z"] = r.z;
  return j;
}

namespace detail {

template <typename T>
T field(const ojson& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("record missing '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(std::string("record field '") + key + "' has the wrong type");
  }
}

inline void expect_schema(const ojson& j, const char* schema) {
  if (auto it = j.find("schema"); it != j.end() && *it != schema) {
    throw ParseError("unexpected record schema " + it->dump() + ", want " + schema);
  }
}

}  // namespace detail

inline CaptionRecord caption_from_json(const ojson& j) {
  detail::expect_schema(j, kCaptionSchema);
  CaptionRecord r;
  r.image_id = detail::field<std::string>(j, "image_id");
  r.image_ref = detail::field<std::string>(j, "image_ref");
  r.role_name = detail::field<std::string>(j, "role_name");
  r.granularity = granularity_from_string(detail::field<std::string>(j, "granularity"));
  r.caption = detail::field<std::string>(j, "caption");
  r.word_count = detail::field<int>(j, "word_count");
  r.created_at = detail::field<std::string>(j, "created_at");
  if (r.word_count != word_count(r.caption)) {
    throw ValidationError("word_count does not match caption for image " + r.image_id);
  }
  return r;
}

inline ScoredRecord scored_from_json(const ojson& j) {
  detail::expect_schema(j, kScoredSchema);
  ScoredRecord r;
  if (!j.contains("record")) throw ParseError("scored record missing 'record'");
  r.record = caption_from_json(j["record"]);
  auto status = detail::field<std::string>(j, "score_status");
  if (status == "ok") {
    r.status = ScoreStatus::ok;
  } else if (status == "parse_failed") {
    r.status = ScoreStatus::parse_failed;
  } else {
    throw ParseError("unknown score_status '" + status + "'");
  }
  if (j.contains("score") && !j["score"].is_null()) r.score = detail::field<int>(j, "score");
  r.rationale = j.value("rationale", std::string());
  if (r.score.has_value() != (r.status == ScoreStatus::ok)) {
    throw ValidationError("score must be present exactly when score_status is ok");
  }
  return r;
}

inline NormalizedRecord normalized_from_json(const ojson& j) {
  detail::expect_schema(j, kFilteredSchema);
  NormalizedRecord r;
  if (!j.contains("scored")) throw ParseError("filtered record missing 'scored'");
  r.scored = scored_from_json(j["scored"]);
  r.z = detail::field<double>(j, "z");
  return r;
}

inline ojson parse_record_line(std::string_view line) {
  auto j = ojson::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("malformed record line");
  return j;
}

/// RFC 3339 UTC timestamp. Honors SOURCE_DATE_EPOCH for reproducible runs.
inline std::string utc_timestamp() {
  std::time_t t;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace rolesynth
