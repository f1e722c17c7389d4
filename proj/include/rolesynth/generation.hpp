#pragma once

// Resumable caption generation over (image, role, granularity) cells.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rolesynth/captions.hpp"
#include "rolesynth/dataset_io.hpp"
#include "rolesynth/digest.hpp"
#include "rolesynth/gateway.hpp"
#include "rolesynth/records.hpp"
#include "rolesynth/roles.hpp"

namespace rolesynth {

struct RunCounts {
  std::size_t generated = 0;
  std::size_t discarded_short = 0;
  std::size_t discarded_titled = 0;
  std::size_t failed = 0;

  std::size_t total() const { return generated + discarded_short + discarded_titled + failed; }
  bool operator==(const RunCounts&) const = default;
};

struct RunManifest {
  std::vector<std::string> corpus;
  std::string role_fingerprint;
  std::vector<GranularityKind> granularities;
  std::size_t cursor = 0;         // cells completed, in canonical order
  std::size_t records_bytes = 0;  // committed prefix of the records file
  RunCounts counts;
  std::vector<std::size_t> failed_cells;

  std::size_t total_cells(std::size_t role_count) const {
    return corpus.size() * role_count * granularities.size();
  }

  void validate() const {
    if (counts.total() != cursor) {
      throw ValidationError("run manifest counts do not add up to the cursor");
    }
    if (failed_cells.size() != counts.failed) {
      throw ValidationError("run manifest failed-cell list does not match counts");
    }
  }

  bool operator==(const RunManifest&) const = default;
};

inline constexpr const char* kRunManifestFile = "run_manifest.json";
inline constexpr const char* kRunRecordsFile = "records.jsonl";

inline ojson to_json(const RunManifest& m) {
  ojson j;
  j["schema"] = "rolesynth.run/1";
  j["corpus"] = m.corpus;
  j["role_fingerprint"] = m.role_fingerprint;
  j["granularities"] = ojson::array();
  for (auto g : m.granularities) j["granularities"].push_back(to_string(g));
  j["cursor"] = m.cursor;
  j["records_bytes"] = m.records_bytes;
  j["counts"] = {{"generated", m.counts.generated},
                 {"discarded_short", m.counts.discarded_short},
                 {"discarded_titled", m.counts.discarded_titled},
                 {"failed", m.counts.failed}};
  j["failed_cells"] = m.failed_cells;
  return j;
}

inline RunManifest run_manifest_from_json(const ojson& j) {
  if (j.value("schema", "") != "rolesynth.run/1") throw ParseError("not a run manifest");
  RunManifest m;
  m.corpus = j.at("corpus").get<std::vector<std::string>>();
  m.role_fingerprint = j.at("role_fingerprint").get<std::string>();
  for (const auto& g : j.at("granularities")) {
    m.granularities.push_back(granularity_from_string(g.get<std::string>()));
  }
  m.cursor = j.at("cursor").get<std::size_t>();
  m.records_bytes = j.at("records_bytes").get<std::size_t>();
  const auto& c = j.at("counts");
  m.counts = {c.at("generated").get<std::size_t>(), c.at("discarded_short").get<std::size_t>(),
              c.at("discarded_titled").get<std::size_t>(), c.at("failed").get<std::size_t>()};
  m.failed_cells = j.at("failed_cells").get<std::vector<std::size_t>>();
  m.validate();
  return m;
}

struct Cell {
  std::size_t image;
  std::size_t role;
  GranularityKind granularity;
};

/// Image-major, then role order, then granularity order (long before short).
inline Cell cell_at(std::size_t index, std::size_t role_count,
                    const std::vector<GranularityKind>& grans) {
  const std::size_t per_image = role_count * grans.size();
  return {index / per_image, (index / grans.size()) % role_count, grans[index % grans.size()]};
}

struct GenerationOptions {
  std::vector<GranularityKind> granularities{GranularityKind::long_caption,
                                             GranularityKind::short_caption};
  std::size_t batch_size = 16;
  /// Stop after this many cells in this invocation (leaves the run resumable).
  std::optional<std::size_t> max_cells;
  std::function<std::string()> clock = utc_timestamp;
  /// Called for each kept record, in canonical cell order, after its batch commits.
  std::function<void(const CaptionRecord&)> sink;
};

struct GenerationOutcome {
  RunManifest manifest;
  bool complete = false;
  std::size_t calls = 0;
};

inline std::vector<CaptionRecord> read_run_records(const fs::path& work_dir,
                                                   const RunManifest& m) {
  std::vector<CaptionRecord> out;
  auto path = work_dir / kRunRecordsFile;
  if (!fs::exists(path)) return out;
  std::string content = read_file_bytes(path.string());
  if (content.size() < m.records_bytes) throw ValidationError("records file shorter than manifest");
  content.resize(m.records_bytes);
  std::istringstream in(content);
  for (std::string line; std::getline(in, line);) {
    out.push_back(caption_from_json(parse_record_line(line)));
  }
  return out;
}

/// Drives one captioning call per pending cell. Progress commits after every
/// batch: kept records are appended to the records file, then the run
/// manifest is atomically replaced. Bytes past the committed prefix (from an
/// interrupted batch) are discarded on resume.
inline GenerationOutcome run_generation(const std::vector<std::string>& corpus,
                                        const RoleSet& roles, Gateway& gateway,
                                        const SamplingParams& params, const fs::path& work_dir,
                                        const GenerationOptions& opts = {}) {
  validate_roles(roles);
  if (opts.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (opts.granularities.empty()) throw ConfigError("no granularities requested");
  auto grans = opts.granularities;
  std::stable_sort(grans.begin(), grans.end());
  grans.erase(std::unique(grans.begin(), grans.end()), grans.end());

  fs::create_directories(work_dir);
  const auto manifest_path = work_dir / kRunManifestFile;
  const auto records_path = work_dir / kRunRecordsFile;

  RunManifest m;
  if (fs::exists(manifest_path)) {
    auto j = ojson::parse(read_file_bytes(manifest_path.string()), nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed run manifest");
    m = run_manifest_from_json(j);
    if (m.corpus != corpus || m.role_fingerprint != role_set_fingerprint(roles) ||
        m.granularities != grans) {
      throw ValidationError("run manifest is inconsistent with the requested corpus/roles");
    }
    if (fs::exists(records_path)) {
      if (fs::file_size(records_path) < m.records_bytes) {
        throw ValidationError("records file shorter than committed prefix");
      }
      fs::resize_file(records_path, m.records_bytes);
    } else if (m.records_bytes != 0) {
      throw ValidationError("records file missing");
    }
  } else {
    m.corpus = corpus;
    m.role_fingerprint = role_set_fingerprint(roles);
    m.granularities = grans;
    std::ofstream(records_path, std::ios::binary | std::ios::trunc);
    atomic_write_file(manifest_path, to_json(m).dump(2) + "\n");
  }

  const std::size_t total = m.total_cells(roles.size());
  std::size_t budget = opts.max_cells.value_or(total);
  GenerationOutcome outcome;

  struct CellResult {
    enum Kind { kept, short_, titled, failed } kind = failed;
    CaptionRecord record;
  };

  while (m.cursor < total && budget > 0) {
    const std::size_t begin = m.cursor;
    const std::size_t end = std::min({total, begin + opts.batch_size, begin + budget});

    // Corpus reads happen up front so a bad file aborts before any call.
    std::map<std::size_t, std::pair<std::string, std::string>> images;  // idx -> (bytes, id)
    for (std::size_t c = begin; c < end; ++c) {
      auto idx = cell_at(c, roles.size(), grans).image;
      if (!images.contains(idx)) {
        std::string bytes = read_file_bytes(corpus[idx]);
        std::string id = sha256_hex(bytes);
        images.emplace(idx, std::make_pair(std::move(bytes), std::move(id)));
      }
    }

    std::vector<CellResult> results(end - begin);
    std::atomic<std::size_t> next{begin};
    auto worker = [&] {
      for (std::size_t c = next++; c < end; c = next++) {
        const Cell cell = cell_at(c, roles.size(), grans);
        const RoleSpec& role = roles.roles[cell.role];
        const Granularity g = Granularity::of(cell.granularity);
        const auto& [bytes, id] = images.at(cell.image);
        auto& out = results[c - begin];
        try {
          std::vector<ChatTurn> turns{ChatTurn::user(
              render_caption_prompt(role, g),
              ImagePayload{bytes, media_type_for_path(corpus[cell.image])})};
          std::string caption = gateway.complete(turns, params).text;
          switch (prefilter(caption, g)) {
            case PrefilterVerdict::discard_short: out.kind = CellResult::short_; break;
            case PrefilterVerdict::discard_titled: out.kind = CellResult::titled; break;
            case PrefilterVerdict::keep:
              out.kind = CellResult::kept;
              out.record = CaptionRecord{id,
                                         corpus[cell.image],
                                         role.agent_name,
                                         cell.granularity,
                                         caption,
                                         word_count(caption),
                                         opts.clock()};
              break;
          }
        } catch (const EndpointError&) {
          out.kind = CellResult::failed;
        }
      }
    };
    const auto threads = std::min<std::size_t>(
        static_cast<std::size_t>(gateway.config().max_concurrency), end - begin);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
      worker();
    }
    outcome.calls += end - begin;

    std::string appended;
    std::vector<const CaptionRecord*> kept;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      switch (r.kind) {
        case CellResult::kept:
          ++m.counts.generated;
          appended += to_json(r.record).dump() + "\n";
          kept.push_back(&r.record);
          break;
        case CellResult::short_: ++m.counts.discarded_short; break;
        case CellResult::titled: ++m.counts.discarded_titled; break;
        case CellResult::failed:
          ++m.counts.failed;
          m.failed_cells.push_back(begin + i);
          break;
      }
    }
    {
      std::ofstream out(records_path, std::ios::binary | std::ios::app);
      out.write(appended.data(), static_cast<std::streamsize>(appended.size()));
      out.flush();
      if (!out) throw IoError("cannot append to " + records_path.string());
    }
    m.records_bytes += appended.size();
    m.cursor = end;
    atomic_write_file(manifest_path, to_json(m).dump(2) + "\n");
    if (opts.sink) {
      for (const auto* r : kept) opts.sink(*r);
    }
    budget -= end - begin;
  }

  outcome.manifest = m;
  outcome.complete = m.cursor >= total;
  return outcome;
}

}  // namespace rolesynth
