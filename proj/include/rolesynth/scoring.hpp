#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rolesynth/digest.hpp"
#include "rolesynth/filter.hpp"
#include "rolesynth/gateway.hpp"
#include "rolesynth/records.hpp"
#include "rolesynth/roles.hpp"

namespace rolesynth {

struct ScoringStats {
  std::size_t calls = 0;
  std::size_t parse_retries = 0;
  std::size_t endpoint_failures = 0;
  std::size_t parse_failed = 0;
};

/// One scoring call per record (image + role-aware prompt); an unparseable
/// reply gets one more attempt. Output order matches input order and nothing
/// is dropped: failures come back as parse_failed.
inline std::vector<ScoredRecord> score_pairs(const std::vector<CaptionRecord>& records,
                                             const RoleSet& roles, Gateway& gateway,
                                             const SamplingParams& params = default_scoring_params(),
                                             ScoringStats* stats = nullptr) {
  for (const auto& r : records) {
    if (!roles.find(r.role_name)) {
      throw ValidationError("record role '" + r.role_name + "' is not in the active role set");
    }
  }

  std::mutex image_mu;
  std::map<std::string, std::string> image_cache;
  auto image_bytes = [&](const std::string& ref) -> std::string {
    std::lock_guard lock(image_mu);
    auto it = image_cache.find(ref);
    if (it == image_cache.end()) it = image_cache.emplace(ref, read_file_bytes(ref)).first;
    return it->second;
  };
  // Load everything first so a missing image aborts before any call.
  for (const auto& r : records) image_bytes(r.image_ref);

  std::vector<ScoredRecord> out(records.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0}, retries{0}, failures{0}, failed{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      const auto& rec = records[i];
      const RoleSpec& role = *roles.find(rec.role_name);
      std::vector<ChatTurn> turns{ChatTurn::user(
          render_filter_prompt(role, rec.caption),
          ImagePayload{image_bytes(rec.image_ref), media_type_for_path(rec.image_ref)})};
      ScoredRecord& s = out[i];
      s.record = rec;
      s.status = ScoreStatus::parse_failed;
      try {
        for (int attempt = 0; attempt < 2; ++attempt) {
          if (attempt) ++retries;
          ++calls;
          std::string reply = gateway.complete(turns, params).text;
          auto parsed = parse_score_response(reply);
          if (parsed.ok()) {
            s.score = parsed.score;
            s.rationale = std::move(parsed.rationale);
            s.status = ScoreStatus::ok;
            break;
          }
          s.rationale = reply;
        }
      } catch (const EndpointError& e) {
        ++failures;
        s.rationale = std::string("endpoint error: ") + e.what();
      }
      if (s.status != ScoreStatus::ok) {
        s.score.reset();
        ++failed;
      }
    }
  };
  const auto threads = std::min<std::size_t>(
      static_cast<std::size_t>(gateway.config().max_concurrency), std::max<std::size_t>(records.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (stats) {
    stats->calls += calls;
    stats->parse_retries += retries;
    stats->endpoint_failures += failures;
    stats->parse_failed += failed;
  }
  return out;
}

}  // namespace rolesynth
