#pragma once

// Role-aware scoring prompt, score parsing and the cap-and-refill selector.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <climits>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rolesynth/error.hpp"
#include "rolesynth/records.hpp"
#include "rolesynth/roles.hpp"

namespace rolesynth {

inline std::string render_filter_prompt(const RoleSpec& role, std::string_view caption) {
  std::string out;
  out += "Here is Text Caption from a " + role.agent_role + ", which role is " +
         role.agent_role_prompt + "\n";
  out += "Text Caption: ";
  out += caption;
  out += "\n\n";
  out +=
      "Please evaluate if the provided text caption accurately represents the main features "
      "and objects of the image. The caption doesn't need to detail every aspect of the "
      "image, but it should capture its primary theme. Rate the overall quality of the text "
      "caption's match to the image on a scale of 1-100, considering the criteria mentioned. "
      "A higher score indicates higher level of image text matching.\n\n";
  out +=
      "Ensure that your scoring is nuanced and uses the entire range from 0 to 100, "
      "reflecting the subtle differences. The score should be given as an integer, with each "
      "number between 0 and 100 considered as a potential score, avoiding the tendency to "
      "round to multiples of 5 or 10. Please first output a single line containing the value "
      "indicating the scores. You must consider the role of the captioner when evaluating the "
      "caption. In the subsequent line, please provide a comprehensive explanation of your "
      "evaluation, avoiding any potential bias.";
  return out;
}

struct ParsedScore {
  std::optional<int> score;
  std::string rationale;

  bool ok() const { return score.has_value(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Score = first integer token on the first non-empty line, clamped to
/// [0, 100]. Rationale = the following lines, or the rest of the first line
/// when the response is a single line.
inline ParsedScore parse_score_response(std::string_view response) {
  std::size_t pos = 0;
  std::string_view line;
  bool found = false;
  while (pos <= response.size()) {
    auto nl = response.find('\n', pos);
    line = response.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? response.size() + 1 : nl + 1;
    if (!detail::trim(line).empty()) {
      found = true;
      break;
    }
  }
  if (!found) return {};

  std::size_t i = 0;
  while (i < line.size() && !std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == line.size()) return {};
  bool negative = i > 0 && line[i - 1] == '-' &&
                  (i == 1 || !std::isalnum(static_cast<unsigned char>(line[i - 2])));
  long long value = 0;
  std::size_t j = i;
  for (; j < line.size() && std::isdigit(static_cast<unsigned char>(line[j])); ++j) {
    value = std::min<long long>(value * 10 + (line[j] - '0'), 1'000'000);
  }
  if (negative) value = -value;

  ParsedScore out;
  out.score = static_cast<int>(std::clamp<long long>(value, 0, 100));
  std::string_view rest = pos <= response.size() ? response.substr(pos) : std::string_view{};
  out.rationale = std::string(detail::trim(rest));
  if (out.rationale.empty()) out.rationale = std::string(detail::trim(line.substr(j)));
  return out;
}

struct FilterConfig {
  // Not published alongside the released dataset; choose per corpus.
  int k_max = 4;
  int k_min = 1;
  std::size_t target_pairs = 1000;
  bool dedup = true;
  double epsilon = 1e-8;
  double prefilter_fraction = 0.5;

  void validate() const {
    if (k_min < 1) throw ConfigError("k_min must be >= 1");
    if (k_min > k_max) throw ConfigError("k_min must not exceed k_max");
    if (target_pairs < 1) throw ConfigError("target_pairs must be >= 1");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (!(prefilter_fraction > 0.0 && prefilter_fraction <= 1.0)) {
      throw ConfigError("prefilter_fraction must be in (0, 1]");
    }
  }
};

/// Role-wise standardization z = (x - mean_r) / (stdev_r + epsilon), with the
/// population standard deviation. Output order follows input order.
inline std::vector<NormalizedRecord> normalize_scores(const std::vector<ScoredRecord>& records,
                                                      double epsilon) {
  struct Moments {
    double sum = 0;
    std::size_t n = 0;
    double mean = 0;
    double sq = 0;
  };
  std::map<std::string, Moments> groups;
  for (const auto& r : records) {
    if (r.status != ScoreStatus::ok) {
      throw ValidationError("normalize_scores requires scored records");
    }
    auto& g = groups[r.record.role_name];
    g.sum += *r.score;
    ++g.n;
  }
  for (auto& [_, g] : groups) g.mean = g.sum / static_cast<double>(g.n);
  for (const auto& r : records) {
    auto& g = groups[r.record.role_name];
    double d = *r.score - g.mean;
    g.sq += d * d;
  }
  std::vector<NormalizedRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto& g = groups[r.record.role_name];
    double sigma = std::sqrt(g.sq / static_cast<double>(g.n));
    double denom = sigma + epsilon;
    double z = denom > 0 ? (*r.score - g.mean) / denom : 0.0;
    out.push_back({r, z});
  }
  return out;
}

/// Tie-break order shared by every ranking step: z desc, raw score desc,
/// image_id, role_name, caption, then the remaining fields ascending.
inline bool ranks_before(const NormalizedRecord& a, const NormalizedRecord& b) {
  if (a.z != b.z) return a.z > b.z;
  const auto& ra = a.scored;
  const auto& rb = b.scored;
  if (ra.score != rb.score) return ra.score > rb.score;
  return std::tie(ra.record.image_id, ra.record.role_name, ra.record.caption,
                  ra.record.granularity, ra.record.image_ref, ra.record.created_at,
                  ra.rationale) < std::tie(rb.record.image_id, rb.record.role_name,
                                           rb.record.caption, rb.record.granularity,
                                           rb.record.image_ref, rb.record.created_at,
                                           rb.rationale);
}

/// Raw-score ranking (used before normalization exists).
inline bool raw_ranks_before(const ScoredRecord& a, const ScoredRecord& b) {
  return ranks_before(NormalizedRecord{a, 0.0}, NormalizedRecord{b, 0.0});
}

enum class SelectionBranch { exact, over_budget, under_budget };

inline const char* to_string(SelectionBranch b) {
  switch (b) {
    case SelectionBranch::exact: return "exact";
    case SelectionBranch::over_budget: return "over_budget";
    case SelectionBranch::under_budget: return "under_budget";
  }
  return "exact";
}

struct SelectionStats {
  std::size_t input_records = 0;
  std::size_t parse_failed_excluded = 0;
  std::size_t after_prefilter = 0;
  std::size_t duplicates_removed = 0;
  std::size_t candidates = 0;
  std::size_t initial_kept = 0;  // after the per-image k_max cap
  std::size_t target_pairs = 0;
  SelectionBranch branch = SelectionBranch::exact;
  std::size_t unique_images = 0;
  std::size_t pairs_kept = 0;
  double captions_per_image_mean = 0.0;
  std::map<std::string, std::size_t> per_role_input_counts;
  std::map<std::string, std::size_t> per_role_kept_counts;
  std::vector<std::string> notes;
};

struct SelectionResult {
  std::vector<NormalizedRecord> kept;  // in rank order
  SelectionStats stats;
};

inline SelectionResult cap_and_refill(const std::vector<ScoredRecord>& pool,
                                      const FilterConfig& cfg) {
  cfg.validate();
  SelectionResult result;
  auto& st = result.stats;
  st.input_records = pool.size();
  st.target_pairs = cfg.target_pairs;

  // Unscorable rows never enter selection.
  std::map<std::string, std::vector<ScoredRecord>> by_role;
  for (const auto& r : pool) {
    if (r.status != ScoreStatus::ok) {
      ++st.parse_failed_excluded;
      continue;
    }
    ++st.per_role_input_counts[r.record.role_name];
    by_role[r.record.role_name].push_back(r);
  }

  // Step 1: per role, keep the top fraction by raw score.
  std::vector<ScoredRecord> survivors;
  for (auto& [role, rows] : by_role) {
    std::sort(rows.begin(), rows.end(), raw_ranks_before);
    auto keep = static_cast<std::size_t>(
        std::ceil(cfg.prefilter_fraction * static_cast<double>(rows.size()) - 1e-9));
    keep = std::min(rows.size(), std::max<std::size_t>(keep, 1));
    survivors.insert(survivors.end(), rows.begin(), rows.begin() + static_cast<long>(keep));
  }
  st.after_prefilter = survivors.size();

  // Step 2: one row per (image, caption); the best-ranked copy survives.
  if (cfg.dedup) {
    std::sort(survivors.begin(), survivors.end(), raw_ranks_before);
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<ScoredRecord> unique;
    for (auto& r : survivors) {
      if (seen.emplace(r.record.image_id, r.record.caption).second) unique.push_back(std::move(r));
    }
    st.duplicates_removed = survivors.size() - unique.size();
    survivors = std::move(unique);
  }
  st.candidates = survivors.size();

  // Steps 3-4.
  auto ranked = normalize_scores(survivors, cfg.epsilon);
  std::sort(ranked.begin(), ranked.end(), ranks_before);

  // Step 5: per-image cap.
  const auto k_max = static_cast<std::size_t>(cfg.k_max);
  const auto k_min = static_cast<std::size_t>(cfg.k_min);
  std::vector<char> in_k(ranked.size(), 0);
  std::map<std::string, std::size_t> per_image;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    auto& n = per_image[ranked[i].scored.record.image_id];
    if (n < k_max) {
      ++n;
      in_k[i] = 1;
      ++kept;
    }
  }
  st.initial_kept = kept;
  const std::size_t target = cfg.target_pairs;

  std::vector<char> selected;
  if (kept > target) {
    st.branch = SelectionBranch::over_budget;
    selected.assign(ranked.size(), 0);
    std::map<std::string, std::size_t> floor_count;
    std::size_t n_sel = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (!in_k[i]) continue;
      auto& f = floor_count[ranked[i].scored.record.image_id];
      if (f < k_min) {
        ++f;
        selected[i] = 1;
        ++n_sel;
      }
    }
    if (n_sel > target) {
      st.notes.push_back("k_min floor exceeds target_pairs: kept " + std::to_string(n_sel) +
                         " > " + std::to_string(target));
    }
    for (std::size_t i = 0; i < ranked.size() && n_sel < target; ++i) {
      if (in_k[i] && !selected[i]) {
        selected[i] = 1;
        ++n_sel;
      }
    }
  } else {
    selected = in_k;
    if (kept < target) {
      st.branch = SelectionBranch::under_budget;
      std::map<std::string, std::size_t> count;
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (selected[i]) ++count[ranked[i].scored.record.image_id];
      }
      // Top-1 for images that have candidates but nothing kept.
      for (std::size_t i = 0; i < ranked.size() && kept < target; ++i) {
        auto& c = count[ranked[i].scored.record.image_id];
        if (!selected[i] && c == 0) {
          selected[i] = 1;
          c = 1;
          ++kept;
        }
      }
      for (std::size_t i = 0; i < ranked.size() && kept < target; ++i) {
        auto& c = count[ranked[i].scored.record.image_id];
        if (!selected[i] && c < k_max) {
          selected[i] = 1;
          ++c;
          ++kept;
        }
      }
      if (kept < target) {
        st.notes.push_back("under budget: candidate pool exhausted, kept " +
                           std::to_string(kept) + " of " + std::to_string(target));
      }
    }
  }

  std::set<std::string> images;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!selected[i]) continue;
    images.insert(ranked[i].scored.record.image_id);
    ++st.per_role_kept_counts[ranked[i].scored.record.role_name];
    result.kept.push_back(std::move(ranked[i]));
  }
  st.pairs_kept = result.kept.size();
  st.unique_images = images.size();
  st.captions_per_image_mean =
      images.empty() ? 0.0
                     : static_cast<double>(st.pairs_kept) / static_cast<double>(images.size());
  return result;
}

/// Runs the selector separately for each granularity and concatenates the
/// results (long first). Each pool gets the full configuration.
inline SelectionResult cap_and_refill_split(const std::vector<ScoredRecord>& pool,
                                            const FilterConfig& cfg) {
  std::map<GranularityKind, std::vector<ScoredRecord>> pools;
  for (const auto& r : pool) pools[r.record.granularity].push_back(r);
  SelectionResult merged;
  auto& st = merged.stats;
  st.target_pairs = 0;
  std::set<std::string> images;
  bool first = true;
  for (auto& [g, rows] : pools) {
    auto part = cap_and_refill(rows, cfg);
    const auto& ps = part.stats;
    st.input_records += ps.input_records;
    st.parse_failed_excluded += ps.parse_failed_excluded;
    st.after_prefilter += ps.after_prefilter;
    st.duplicates_removed += ps.duplicates_removed;
    st.candidates += ps.candidates;
    st.initial_kept += ps.initial_kept;
    st.target_pairs += ps.target_pairs;
    if (first) st.branch = ps.branch;
    else if (st.branch != ps.branch) st.branch = SelectionBranch::exact;
    first = false;
    for (const auto& [k, v] : ps.per_role_input_counts) st.per_role_input_counts[k] += v;
    for (const auto& [k, v] : ps.per_role_kept_counts) st.per_role_kept_counts[k] += v;
    for (const auto& note : ps.notes) st.notes.push_back(std::string(to_string(g)) + ": " + note);
    for (auto& r : part.kept) {
      images.insert(r.scored.record.image_id);
      merged.kept.push_back(std::move(r));
    }
  }
  st.pairs_kept = merged.kept.size();
  st.unique_images = images.size();
  st.captions_per_image_mean =
      images.empty() ? 0.0
                     : static_cast<double>(st.pairs_kept) / static_cast<double>(images.size());
  return merged;
}

struct SelectionReport {
  std::size_t unique_images = 0;
  std::size_t pairs_kept = 0;
  double captions_per_image_mean = 0.0;
  std::map<std::string, std::size_t> per_role_kept;
  std::map<std::string, double> per_role_retention;  // kept / scored input
  std::array<std::size_t, 10> score_histogram{};     // raw scores, bins of 10 (100 in last)
  std::map<std::string, std::array<std::size_t, 10>> per_role_score_histogram;
  double mean_score = 0.0;
  SelectionStats selection;
};

inline std::size_t score_bin(int score) {
  return static_cast<std::size_t>(std::clamp(score / 10, 0, 9));
}

inline SelectionReport selection_stats(const SelectionResult& result) {
  SelectionReport rep;
  rep.selection = result.stats;
  std::set<std::string> images;
  double sum = 0;
  for (const auto& r : result.kept) {
    images.insert(r.scored.record.image_id);
    const auto& role = r.scored.record.role_name;
    ++rep.per_role_kept[role];
    int s = r.scored.score.value_or(0);
    sum += s;
    ++rep.score_histogram[score_bin(s)];
    ++rep.per_role_score_histogram[role][score_bin(s)];
  }
  rep.pairs_kept = result.kept.size();
  rep.unique_images = images.size();
  if (!images.empty()) {
    rep.captions_per_image_mean =
        static_cast<double>(rep.pairs_kept) / static_cast<double>(rep.unique_images);
    rep.mean_score = sum / static_cast<double>(rep.pairs_kept);
  }
  for (const auto& [role, n] : result.stats.per_role_input_counts) {
    auto it = rep.per_role_kept.find(role);
    std::size_t k = it == rep.per_role_kept.end() ? 0 : it->second;
    rep.per_role_retention[role] = n ? static_cast<double>(k) / static_cast<double>(n) : 0.0;
  }
  return rep;
}

inline ojson to_json(const SelectionReport& rep) {
  const auto& s = rep.selection;
  ojson j;
  j["unique_images"] = rep.unique_images;
  j["pairs_kept"] = rep.pairs_kept;
  j["captions_per_image_mean"] = rep.captions_per_image_mean;
  j["mean_score"] = rep.mean_score;
  j["per_role_kept"] = rep.per_role_kept;
  j["per_role_retention"] = rep.per_role_retention;
  j["score_histogram"] = rep.score_histogram;
  j["per_role_score_histogram"] = ojson::object();
  for (const auto& [role, h] : rep.per_role_score_histogram) j["per_role_score_histogram"][role] = h;
  j["selection"] = {{"input_records", s.input_records},
                    {"parse_failed_excluded", s.parse_failed_excluded},
                    {"after_prefilter", s.after_prefilter},
                    {"duplicates_removed", s.duplicates_removed},
                    {"candidates", s.candidates},
                    {"initial_kept", s.initial_kept},
                    {"target_pairs", s.target_pairs},
                    {"branch", to_string(s.branch)},
                    {"notes", s.notes}};
  return j;
}

inline std::string to_table(const SelectionReport& rep) {
  const auto& s = rep.selection;
  std::ostringstream os;
  char buf[200];
  auto row = [&](const char* label, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-26s %s\n", label, value.c_str());
    os << buf;
  };
  row("input records", std::to_string(s.input_records));
  row("parse failures excluded", std::to_string(s.parse_failed_excluded));
  row("after role prefilter", std::to_string(s.after_prefilter));
  row("duplicates removed", std::to_string(s.duplicates_removed));
  row("after k_max cap", std::to_string(s.initial_kept));
  row("target pairs", std::to_string(s.target_pairs));
  row("branch", to_string(s.branch));
  row("pairs kept", std::to_string(rep.pairs_kept));
  row("unique images", std::to_string(rep.unique_images));
  std::snprintf(buf, sizeof buf, "%.4f", rep.captions_per_image_mean);
  row("captions per image", buf);
  std::snprintf(buf, sizeof buf, "%.2f", rep.mean_score);
  row("mean raw score", buf);
  os << "per role (kept / retention):\n";
  for (const auto& [role, ret] : rep.per_role_retention) {
    auto it = rep.per_role_kept.find(role);
    std::snprintf(buf, sizeof buf, "  %-40s %6zu  %6.2f%%\n", role.c_str(),
                  it == rep.per_role_kept.end() ? std::size_t{0} : it->second, 100.0 * ret);
    os << buf;
  }
  os << "score histogram:\n";
  for (std::size_t b = 0; b < rep.score_histogram.size(); ++b) {
    std::snprintf(buf, sizeof buf, "  [%3zu,%3zu%c %zu\n", b * 10, b == 9 ? 100 : b * 10 + 10,
                  b == 9 ? ']' : ')', rep.score_histogram[b]);
    os << buf;
  }
  for (const auto& note : s.notes) os << "note: " << note << "\n";
  return os.str();
}

}  // namespace rolesynth
