#pragma once

// Expert personas that condition caption generation and scoring.

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rolesynth/digest.hpp"
#include "rolesynth/error.hpp"
#include "rolesynth/gateway.hpp"

namespace rolesynth {

struct RoleSpec {
  std::string agent_name;
  std::string agent_role;
  std::string agent_speciality;
  std::string agent_role_prompt;
  std::string provider_type = "openai";
  std::string model_name = "gpt-3.5-turbo";
  /// Keys outside the known record shape, kept for round-tripping.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const RoleSpec&) const = default;
};

enum class RoleSource { builtin, file, generated };

inline const char* to_string(RoleSource s) {
  switch (s) {
    case RoleSource::builtin: return "builtin";
    case RoleSource::file: return "file";
    case RoleSource::generated: return "generated";
  }
  return "builtin";
}

struct RoleSet {
  std::vector<RoleSpec> roles;
  RoleSource source = RoleSource::builtin;

  const RoleSpec* find(std::string_view agent_name) const {
    for (const auto& r : roles) {
      if (r.agent_name == agent_name) return &r;
    }
    return nullptr;
  }

  std::size_t size() const { return roles.size(); }
};

inline void validate_role(const RoleSpec& r) {
  auto require = [&](const std::string& v, const char* field) {
    if (v.empty()) {
      throw ValidationError(std::string("role '") + r.agent_name + "': " + field +
                            " is empty");
    }
  };
  require(r.agent_name, "agent_name");
  require(r.agent_role, "agent_role");
  require(r.agent_speciality, "agent_speciality");
  require(r.agent_role_prompt, "agent_role_prompt");
}

inline void validate_roles(const RoleSet& rs) {
  if (rs.roles.empty()) throw ValidationError("role set is empty");
  std::set<std::string> names;
  for (const auto& r : rs.roles) {
    validate_role(r);
    if (!names.insert(r.agent_name).second) {
      throw ValidationError("duplicate agent_name '" + r.agent_name + "'");
    }
  }
}

/// The five personas used for the released dataset.
inline RoleSet builtin_roles() {
  auto role = [](const char* name, const char* r, const char* spec, const char* prompt) {
    RoleSpec s;
    s.agent_name = name;
    s.agent_role = r;
    s.agent_speciality = spec;
    s.agent_role_prompt = prompt;
    return s;
  };
  RoleSet rs;
  rs.source = RoleSource::builtin;
  rs.roles = {
      role("GPT Agent 1 - Observer of Details", "Observer of Details",
           "Micro-level visual recognition",
           "Focuses on the specific visual attributes of an image such as objects, colors, "
           "textures, shapes, and lighting conditions. Strong emphasis on capturing factual, "
           "observable details."),
      role("GPT Agent 2 - Interpreter of Context", "Interpreter of Context",
           "Semantic and situational interpretation",
           "Identifies the possible meaning of visual elements, interpreting human "
           "expressions, implied actions, cultural references, and the situational context "
           "of the image."),
      role("GPT Agent 3 - Compositional Analyst", "Compositional Analyst",
           "Macro-level composition analysis",
           "Examines the overall structure of the image, including arrangement of subjects, "
           "balance, perspective, depth, and spatial relationships. Highlights the visual "
           "organization and framing."),
      role("GPT Agent 4 - Narrative Setter", "Narrative or Scene Setter",
           "Story and situational framing",
           "Synthesizes observed details and context to suggest a narrative, identifying the "
           "setting, possible actions, implied storylines, and the overall communicative "
           "intent of the image."),
      role("GPT Agent 5 - Emotional Responder", "Emotional/Aesthetic Responder",
           "Mood, tone, and subjective experience",
           "Focuses on the image's emotional resonance and aesthetic qualities, capturing "
           "mood, atmosphere, symbolic associations, and the subjective impression it may "
           "evoke in viewers."),
  };
  return rs;
}

// Record shape: type, model_name, agent_name, agent_role, agent_speciality,
// agent_role_prompt.

inline RoleSpec role_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ParseError("role record must be an object");
  auto text = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) throw ValidationError(std::string("role record missing '") + key + "'");
      return {};
    }
    if (!it->is_string()) throw ValidationError(std::string("'") + key + "' must be a string");
    return it->get<std::string>();
  };
  RoleSpec r;
  r.provider_type = text("type", false);
  r.model_name = text("model_name", false);
  r.agent_name = text("agent_name", true);
  r.agent_role = text("agent_role", true);
  r.agent_speciality = text("agent_speciality", true);
  r.agent_role_prompt = text("agent_role_prompt", true);
  static const std::set<std::string> known = {"type", "model_name", "agent_name",
                                              "agent_role", "agent_speciality",
                                              "agent_role_prompt"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) r.extra[k] = v;
  }
  return r;
}

inline nlohmann::ordered_json role_to_json(const RoleSpec& r) {
  nlohmann::ordered_json j;
  j["type"] = r.provider_type;
  j["model_name"] = r.model_name;
  j["agent_name"] = r.agent_name;
  j["agent_role"] = r.agent_role;
  j["agent_speciality"] = r.agent_speciality;
  j["agent_role_prompt"] = r.agent_role_prompt;
  for (const auto& [k, v] : r.extra.items()) j[k] = v;
  return j;
}

inline RoleSet roles_from_json(const nlohmann::ordered_json& doc, RoleSource source) {
  if (!doc.is_array()) throw ParseError("role document must be a list of records");
  RoleSet rs;
  rs.source = source;
  for (const auto& rec : doc) rs.roles.push_back(role_from_json(rec));
  validate_roles(rs);
  return rs;
}

inline nlohmann::ordered_json roles_to_json(const RoleSet& rs) {
  auto doc = nlohmann::ordered_json::array();
  for (const auto& r : rs.roles) doc.push_back(role_to_json(r));
  return doc;
}

inline std::string serialize_roles(const RoleSet& rs) {
  return roles_to_json(rs).dump(2) + "\n";
}

/// Stable digest of the role contents (source tag excluded).
inline std::string role_set_fingerprint(const RoleSet& rs) {
  return sha256_hex(roles_to_json(rs).dump());
}

inline RoleSet parse_roles(std::string_view text, RoleSource source = RoleSource::file) {
  auto doc = nlohmann::ordered_json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParseError("role document is not valid JSON");
  return roles_from_json(doc, source);
}

inline RoleSet load_roles(const std::string& path) {
  return parse_roles(read_file_bytes(path), RoleSource::file);
}

inline void write_roles(const RoleSet& rs, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << serialize_roles(rs);
  if (!out) throw IoError("write failed: " + path);
}

// Two-round role elicitation conversation.

inline constexpr std::string_view kRoleRound1Prompt =
    "What are some roles that are typically used in boosting precise image description, "
    "like different personas to precisely describe the image in different view.";

inline constexpr std::string_view kRoleRound2Prompt =
    "Great, now follow this format and generate a .json file for these roles: Remain "
    "”type”: ”openai”, ”model name”: ”gpt-3.5-turbo”, "
    "the same. and the agent name = ”GPT Agent 1 - {agent role}”\n"
    "[\n"
    "  {\n"
    "    \"type\": \"openai\",\n"
    "    \"model_name\": \"gpt-3.5-turbo\",\n"
    "    \"agent_name\": \"GPT Agent 1 - White Hat\",\n"
    "    \"agent_role\": \"White Hat\",\n"
    "    \"agent_speciality\": \"Information Analysis and Facts\",\n"
    "    \"agent_role_prompt\": \"Focuses on available data and past information, analyzing "
    "trends and gaps in knowledge, striving for an objective viewpoint.\"\n"
    "  },\n"
    "  {\n"
    "    \"type\": \"openai\",\n"
    "    \"model_name\": \"gpt-3.5-turbo\",\n"
    "    \"agent_name\": \"GPT Agent 2 - Red Hat\",\n"
    "    \"agent_role\": \"Red Hat\",\n"
    "    \"agent_speciality\": \"Emotions and Feelings Interpretation\",\n"
    "    \"agent_role_prompt\": \"Listens to and validates the emotional responses of the "
    "group, understanding the values and intuition behind reactions, without judgment or "
    "justification.\"\n"
    "  }\n"
    "]";

namespace detail {

inline std::string strip_code_fences(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    auto first = line.find_first_not_of(" \t\r");
    bool fence = first != std::string_view::npos && line.substr(first).starts_with("```");
    if (!fence) {
      out.append(line);
      if (nl != std::string_view::npos) out.push_back('\n');
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

/// Index one past the ']' matching the '[' at `open`, skipping brackets that
/// occur inside JSON string literals; npos when unbalanced.
inline std::size_t matching_bracket_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace detail

/// First balanced bracketed block in `response` that parses and validates as a
/// role list. Code-fence lines are dropped before scanning.
inline std::optional<RoleSet> extract_role_list(std::string_view response) {
  const std::string text = detail::strip_code_fences(response);
  for (std::size_t open = text.find('['); open != std::string::npos;
       open = text.find('[', open + 1)) {
    auto end = detail::matching_bracket_end(text, open);
    if (end == std::string::npos) continue;
    try {
      return parse_roles(std::string_view(text).substr(open, end - open),
                         RoleSource::generated);
    } catch (const Error&) {
      // not a role list; keep scanning
    }
  }
  return std::nullopt;
}

/// Runs the two-round elicitation conversation against `gateway`.
inline RoleSet generate_roles(Gateway& gateway,
                              const SamplingParams& params = default_scoring_params()) {
  std::vector<ChatTurn> turns{ChatTurn::user(std::string(kRoleRound1Prompt))};
  std::string first;
  try {
    first = gateway.complete(turns, params).text;
  } catch (const EndpointError& e) {
    throw EndpointError(std::string("role generation round 1: ") + e.what(), e.status(),
                        e.body());
  }
  turns.push_back(ChatTurn::assistant(first));
  turns.push_back(ChatTurn::user(std::string(kRoleRound2Prompt)));
  std::string second;
  try {
    second = gateway.complete(turns, params).text;
  } catch (const EndpointError& e) {
    throw EndpointError(std::string("role generation round 2: ") + e.what(), e.status(),
                        e.body());
  }
  auto roles = extract_role_list(second);
  if (!roles) throw ExtractionError("no well-formed role list in round 2 response", second);
  return *roles;
}

}  // namespace rolesynth
