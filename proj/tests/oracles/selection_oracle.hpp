#pragma once

// Brute-force reference for budgeted per-image selection. Written without
// touching the library's ranking or normalization code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "rolesynth/records.hpp"

namespace rolesynth::oracle {

struct Row {
  const ScoredRecord* rec;
  double z = 0;
};

// Total order: z desc, raw desc, then identity fields ascending.
inline auto identity_key(const ScoredRecord& r) {
  return std::make_tuple(r.record.image_id, r.record.role_name, r.record.caption,
                         static_cast<int>(r.record.granularity), r.record.image_ref,
                         r.record.created_at, r.rationale);
}

inline bool raw_before(const ScoredRecord* a, const ScoredRecord* b) {
  if (*a->score != *b->score) return *a->score > *b->score;
  return identity_key(*a) < identity_key(*b);
}

struct OracleConfig {
  std::size_t k_max, k_min, target;
  double fraction = 0.5;
  double epsilon = 1e-8;
  bool dedup = true;
};

/// Candidate rows (after failure exclusion, role prefilter and dedup) with
/// z-scores, sorted best first.
inline std::vector<Row> candidates(const std::vector<ScoredRecord>& pool, const OracleConfig& cfg) {
  std::map<std::string, std::vector<const ScoredRecord*>> roles;
  for (const auto& r : pool)
    if (r.status == ScoreStatus::ok) roles[r.record.role_name].push_back(&r);

  std::vector<const ScoredRecord*> kept;
  for (auto& [_, rows] : roles) {
    std::sort(rows.begin(), rows.end(), raw_before);
    std::size_t k = 0;
    while (static_cast<double>(k) < cfg.fraction * static_cast<double>(rows.size()) - 1e-9) ++k;
    k = std::clamp<std::size_t>(k, 1, rows.size());
    kept.insert(kept.end(), rows.begin(), rows.begin() + static_cast<long>(k));
  }
  if (cfg.dedup) {
    std::sort(kept.begin(), kept.end(), raw_before);
    std::vector<const ScoredRecord*> u;
    std::set<std::pair<std::string, std::string>> seen;
    for (auto* r : kept)
      if (seen.insert({r->record.image_id, r->record.caption}).second) u.push_back(r);
    kept = u;
  }

  // Two-pass population moments per role.
  std::map<std::string, std::vector<double>> vals;
  for (auto* r : kept) vals[r->record.role_name].push_back(*r->score);
  std::map<std::string, std::pair<double, double>> mom;
  for (auto& [role, v] : vals) {
    double mu = 0;
    for (double x : v) mu += x;
    mu /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mu) * (x - mu);
    mom[role] = {mu, std::sqrt(var / static_cast<double>(v.size()))};
  }
  std::vector<Row> out;
  for (auto* r : kept) {
    auto [mu, sd] = mom[r->record.role_name];
    out.push_back({r, (*r->score - mu) / (sd + cfg.epsilon)});
  }
  std::sort(out.begin(), out.end(), [](const Row& a, const Row& b) {
    if (a.z != b.z) return a.z > b.z;
    return raw_before(a.rec, b.rec);
  });
  return out;
}

/// Exhaustive search: per-image subsets sized within [min(k_min, n), min(k_max, n)],
/// total size min(sum hi, max(target, sum lo)), maximizing total z; ties go
/// to the set whose best-ranked differing row ranks higher.
inline std::vector<const ScoredRecord*> select(const std::vector<ScoredRecord>& pool,
                                               const OracleConfig& cfg) {
  auto rows = candidates(pool, cfg);
  if (rows.size() > 64) throw std::invalid_argument("oracle handles at most 64 candidates");

  std::map<std::string, std::vector<std::size_t>> by_image;  // rank positions
  for (std::size_t i = 0; i < rows.size(); ++i) by_image[rows[i].rec->record.image_id].push_back(i);

  struct Best {
    bool valid = false;
    double sum = 0;
    std::uint64_t mask = 0;
  };
  auto better = [](double s1, std::uint64_t m1, const Best& b) {
    if (!b.valid) return true;
    if (s1 > b.sum + 1e-9) return true;
    if (s1 < b.sum - 1e-9) return false;
    return m1 > b.mask;
  };

  std::size_t sum_lo = 0, sum_hi = 0;
  std::vector<Best> dp(1);
  dp[0] = {true, 0.0, 0};
  for (const auto& [_, idx] : by_image) {
    const std::size_t n = idx.size();
    const std::size_t lo = std::min(cfg.k_min, n), hi = std::min(cfg.k_max, n);
    sum_lo += lo;
    sum_hi += hi;
    std::vector<Best> next(dp.size() + hi);
    for (std::uint32_t sub = 0; sub < (1u << n); ++sub) {
      const auto c = static_cast<std::size_t>(__builtin_popcount(sub));
      if (c < lo || c > hi) continue;
      double s = 0;
      std::uint64_t m = 0;
      for (std::size_t b = 0; b < n; ++b) {
        if (sub >> b & 1u) {
          s += rows[idx[b]].z;
          m |= std::uint64_t{1} << (63 - idx[b]);
        }
      }
      for (std::size_t k = 0; k < dp.size(); ++k) {
        if (!dp[k].valid) continue;
        double ns = dp[k].sum + s;
        std::uint64_t nm = dp[k].mask | m;
        if (better(ns, nm, next[k + c])) next[k + c] = {true, ns, nm};
      }
    }
    dp = std::move(next);
  }
  const std::size_t want = std::min(sum_hi, std::max(cfg.target, sum_lo));
  const auto& best = dp.at(want);
  if (!best.valid) throw std::logic_error("oracle found no feasible selection");
  std::vector<const ScoredRecord*> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (best.mask >> (63 - i) & 1u) out.push_back(rows[i].rec);
  return out;
}

}  // namespace rolesynth::oracle
