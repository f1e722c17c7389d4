#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "rolesynth/error.hpp"
#include "rolesynth/roles.hpp"

namespace rolesynth {

enum class GranularityKind { long_caption, short_caption };

struct Granularity {
  GranularityKind kind;
  int max_words;
  int min_words;

  static constexpr Granularity long_form() { return {GranularityKind::long_caption, 150, 10}; }
  static constexpr Granularity short_form() { return {GranularityKind::short_caption, 30, 4}; }
  static constexpr Granularity of(GranularityKind k) {
    return k == GranularityKind::long_caption ? long_form() : short_form();
  }

  bool operator==(const Granularity&) const = default;
};

inline const char* to_string(GranularityKind k) {
  return k == GranularityKind::long_caption ? "long" : "short";
}

inline GranularityKind granularity_from_string(std::string_view s) {
  if (s == "long") return GranularityKind::long_caption;
  if (s == "short") return GranularityKind::short_caption;
  throw ParseError("unknown granularity '" + std::string(s) + "'");
}

struct CaptionRecord {
  std::string image_id;
  std::string image_ref;
  std::string role_name;
  GranularityKind granularity = GranularityKind::long_caption;
  std::string caption;
  int word_count = 0;
  std::string created_at;

  bool operator==(const CaptionRecord&) const = default;
};

/// Number of maximal runs of non-whitespace characters.
inline int word_count(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

/// Title prefixes the caption prompt forbids, in the order the prompt lists
/// them (the last one repeats with a trailing space).
inline constexpr std::array<std::string_view, 6> kForbiddenTitles = {
    "Mood:", "Tune:", "Joyful simplicity:", "Muted Precision:", "Elegant simplicity:",
    "Muted Precision: "};

inline std::string render_caption_prompt(const RoleSpec& role, const Granularity& g) {
  std::string limit = g.kind == GranularityKind::long_caption ? "(max 150 words)"
                                                              : "(max 30 words)";
  std::string out;
  out += "You are a " + role.agent_role + " whose specialty is " + role.agent_speciality +
         ". " + role.agent_role_prompt + ".\n";
  out += "You will create an descriptions " + limit +
         " for the given image, from the perspective of an " + role.agent_role +
         ", highlighting " + role.agent_speciality + ".\n";
  out += "Output only the descriptions with no extra explanations. Do NOT use any title words "
         "such as: ";
  for (std::size_t i = 0; i < kForbiddenTitles.size(); ++i) {
    if (i) out += ",";
    out += "\"" + std::string(kForbiddenTitles[i]) + "\"";
  }
  return out;
}

enum class PrefilterVerdict { keep, discard_short, discard_titled };

inline const char* to_string(PrefilterVerdict v) {
  switch (v) {
    case PrefilterVerdict::keep: return "keep";
    case PrefilterVerdict::discard_short: return "discard_short";
    case PrefilterVerdict::discard_titled: return "discard_titled";
  }
  return "keep";
}

inline bool starts_with_forbidden_title(std::string_view caption) {
  auto first = caption.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return false;
  caption.remove_prefix(first);
  for (auto title : kForbiddenTitles) {
    if (caption.starts_with(title)) return true;
  }
  return false;
}

/// Length check first, then the title check.
inline PrefilterVerdict prefilter(std::string_view caption, const Granularity& g) {
  if (word_count(caption) < g.min_words) return PrefilterVerdict::discard_short;
  if (starts_with_forbidden_title(caption)) return PrefilterVerdict::discard_titled;
  return PrefilterVerdict::keep;
}

}  // namespace rolesynth
