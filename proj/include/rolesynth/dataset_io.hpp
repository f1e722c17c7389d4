#pragma once

// Newline-delimited record shards tracked by a checksummed manifest.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rolesynth/digest.hpp"
#include "rolesynth/error.hpp"
#include "rolesynth/records.hpp"

namespace rolesynth {

namespace fs = std::filesystem;

enum class Stage { generated, scored, filtered };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::generated: return "generated";
    case Stage::scored: return "scored";
    case Stage::filtered: return "filtered";
  }
  return "generated";
}

inline Stage stage_from_string(std::string_view s) {
  if (s == "generated") return Stage::generated;
  if (s == "scored") return Stage::scored;
  if (s == "filtered") return Stage::filtered;
  throw ParseError("unknown stage '" + std::string(s) + "'");
}

struct ShardInfo {
  std::string path;  // relative to the dataset directory
  std::size_t record_count = 0;
  std::string checksum;  // "sha256:<hex>"

  bool operator==(const ShardInfo&) const = default;
};

struct DatasetManifest {
  std::vector<ShardInfo> shards;
  Stage stage = Stage::generated;
  std::string config_fingerprint;

  std::size_t record_count() const {
    std::size_t n = 0;
    for (const auto& s : shards) n += s.record_count;
    return n;
  }

  bool operator==(const DatasetManifest&) const = default;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kManifestSchema = "rolesynth.dataset/1";

/// Writes `content` to `path` via a sibling temp file and rename.
inline void atomic_write_file(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("rename failed: " + path.string());
  }
}

inline ojson manifest_to_json(const DatasetManifest& m) {
  ojson j;
  j["schema"] = kManifestSchema;
  j["stage"] = to_string(m.stage);
  j["config_fingerprint"] = m.config_fingerprint;
  j["record_count"] = m.record_count();
  j["shards"] = ojson::array();
  for (const auto& s : m.shards) {
    j["shards"].push_back(
        {{"path", s.path}, {"record_count", s.record_count}, {"checksum", s.checksum}});
  }
  return j;
}

inline DatasetManifest manifest_from_json(const ojson& j) {
  if (!j.is_object() || j.value("schema", "") != kManifestSchema) {
    throw ParseError("not a dataset manifest");
  }
  DatasetManifest m;
  m.stage = stage_from_string(detail::field<std::string>(j, "stage"));
  m.config_fingerprint = j.value("config_fingerprint", std::string());
  for (const auto& s : j.at("shards")) {
    m.shards.push_back({detail::field<std::string>(s, "path"),
                        detail::field<std::size_t>(s, "record_count"),
                        detail::field<std::string>(s, "checksum")});
  }
  return m;
}

inline DatasetManifest read_manifest(const fs::path& dir) {
  auto path = dir / kManifestFile;
  if (!fs::exists(path)) throw IoError("no dataset manifest in " + dir.string());
  auto j = ojson::parse(read_file_bytes(path.string()), nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed manifest " + path.string());
  return manifest_from_json(j);
}

/// Writes `lines` (one serialized record each, without newline) as shards of
/// at most `shard_size` lines. The manifest goes last; on failure every file
/// this call created is removed.
inline DatasetManifest write_shards(const std::vector<std::string>& lines, const fs::path& dir,
                                    std::size_t shard_size, Stage stage,
                                    const std::string& config_fingerprint = {}) {
  if (shard_size < 1) throw ConfigError("shard_size must be >= 1");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  if (fs::exists(dir / kManifestFile)) {
    throw IoError("stage output already exists in " + dir.string() +
                  "; stage outputs are immutable, choose a new directory");
  }

  DatasetManifest manifest;
  manifest.stage = stage;
  manifest.config_fingerprint = config_fingerprint;
  std::vector<fs::path> written;
  try {
    for (std::size_t begin = 0, idx = 0; begin < lines.size(); begin += shard_size, ++idx) {
      std::size_t end = std::min(lines.size(), begin + shard_size);
      std::string content;
      for (std::size_t i = begin; i < end; ++i) {
        content += lines[i];
        content += '\n';
      }
      char name[32];
      std::snprintf(name, sizeof name, "shard-%05zu.jsonl", idx);
      auto path = dir / name;
      written.push_back(path);
      atomic_write_file(path, content);
      manifest.shards.push_back({name, end - begin, "sha256:" + sha256_hex(content)});
    }
    written.push_back(dir / kManifestFile);
    atomic_write_file(dir / kManifestFile, manifest_to_json(manifest).dump(2) + "\n");
  } catch (...) {
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
  return manifest;
}

template <typename Record>
DatasetManifest write_record_shards(const std::vector<Record>& records, const fs::path& dir,
                                    std::size_t shard_size, Stage stage,
                                    const std::string& config_fingerprint = {}) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(to_json(r).dump());
  return write_shards(lines, dir, shard_size, stage, config_fingerprint);
}

/// Verifies checksums and line counts, then returns every record line.
inline std::vector<std::string> read_shard_lines(const fs::path& dir,
                                                 const DatasetManifest& manifest) {
  std::vector<std::string> lines;
  for (const auto& shard : manifest.shards) {
    const std::string content = read_file_bytes((dir / shard.path).string());
    if ("sha256:" + sha256_hex(content) != shard.checksum) {
      throw ValidationError("checksum mismatch in " + shard.path);
    }
    std::size_t count = 0;
    std::istringstream in(content);
    for (std::string line; std::getline(in, line);) {
      lines.push_back(std::move(line));
      ++count;
    }
    if (count != shard.record_count) {
      throw ValidationError("record count mismatch in " + shard.path);
    }
  }
  return lines;
}

inline std::vector<CaptionRecord> read_caption_records(const fs::path& dir,
                                                       const DatasetManifest& m) {
  std::vector<CaptionRecord> out;
  for (const auto& line : read_shard_lines(dir, m)) {
    out.push_back(caption_from_json(parse_record_line(line)));
  }
  return out;
}

inline std::vector<ScoredRecord> read_scored_records(const fs::path& dir,
                                                     const DatasetManifest& m) {
  std::vector<ScoredRecord> out;
  for (const auto& line : read_shard_lines(dir, m)) {
    out.push_back(scored_from_json(parse_record_line(line)));
  }
  return out;
}

inline std::vector<NormalizedRecord> read_normalized_records(const fs::path& dir,
                                                             const DatasetManifest& m) {
  std::vector<NormalizedRecord> out;
  for (const auto& line : read_shard_lines(dir, m)) {
    out.push_back(normalized_from_json(parse_record_line(line)));
  }
  return out;
}

struct GranularityStats {
  std::size_t count = 0;
  double mean_words = 0.0;
};

struct CorpusStats {
  Stage stage = Stage::generated;
  std::size_t records = 0;
  std::size_t unique_images = 0;
  double captions_per_image_mean = 0.0;
  std::map<std::string, GranularityStats> per_granularity;
  std::map<std::string, std::size_t> per_role;
  std::size_t scored_ok = 0;
  std::size_t scored_failed = 0;
  double mean_score = 0.0;
};

/// Caption-level statistics over a set of records.
inline CorpusStats caption_stats(const std::vector<CaptionRecord>& records) {
  CorpusStats st;
  st.records = records.size();
  std::set<std::string> images;
  std::map<std::string, double> word_sums;
  for (const auto& r : records) {
    images.insert(r.image_id);
    auto& g = st.per_granularity[to_string(r.granularity)];
    ++g.count;
    word_sums[to_string(r.granularity)] += r.word_count;
    ++st.per_role[r.role_name];
  }
  for (auto& [k, g] : st.per_granularity) g.mean_words = word_sums[k] / static_cast<double>(g.count);
  st.unique_images = images.size();
  if (!images.empty()) {
    st.captions_per_image_mean =
        static_cast<double>(records.size()) / static_cast<double>(images.size());
  }
  return st;
}

inline CorpusStats corpus_stats(const fs::path& dir, const DatasetManifest& manifest) {
  std::vector<CaptionRecord> captions;
  std::vector<ScoredRecord> scored;
  switch (manifest.stage) {
    case Stage::generated:
      captions = read_caption_records(dir, manifest);
      break;
    case Stage::scored:
      scored = read_scored_records(dir, manifest);
      break;
    case Stage::filtered:
      for (auto& n : read_normalized_records(dir, manifest)) scored.push_back(std::move(n.scored));
      break;
  }
  for (const auto& s : scored) captions.push_back(s.record);
  CorpusStats st = caption_stats(captions);
  st.stage = manifest.stage;
  double score_sum = 0;
  for (const auto& s : scored) {
    if (s.status == ScoreStatus::ok) {
      ++st.scored_ok;
      score_sum += *s.score;
    } else {
      ++st.scored_failed;
    }
  }
  if (st.scored_ok) st.mean_score = score_sum / static_cast<double>(st.scored_ok);
  return st;
}

inline CorpusStats corpus_stats(const fs::path& dir) { return corpus_stats(dir, read_manifest(dir)); }

inline ojson to_json(const CorpusStats& st) {
  ojson j;
  j["stage"] = to_string(st.stage);
  j["records"] = st.records;
  j["unique_images"] = st.unique_images;
  j["captions_per_image_mean"] = st.captions_per_image_mean;
  j["per_granularity"] = ojson::object();
  for (const auto& [k, g] : st.per_granularity) {
    j["per_granularity"][k] = {{"count", g.count}, {"mean_words", g.mean_words}};
  }
  j["per_role"] = st.per_role;
  if (st.stage != Stage::generated) {
    j["scored_ok"] = st.scored_ok;
    j["scored_failed"] = st.scored_failed;
    j["mean_score"] = st.mean_score;
  }
  return j;
}

inline std::string to_table(const CorpusStats& st) {
  std::ostringstream os;
  char buf[160];
  os << "stage                    " << to_string(st.stage) << "\n";
  os << "records                  " << st.records << "\n";
  os << "unique images            " << st.unique_images << "\n";
  std::snprintf(buf, sizeof buf, "captions per image       %.4f\n", st.captions_per_image_mean);
  os << buf;
  for (const auto& [k, g] : st.per_granularity) {
    std::snprintf(buf, sizeof buf, "%-6s captions          %zu (mean %.2f words)\n", k.c_str(),
                  g.count, g.mean_words);
    os << buf;
  }
  for (const auto& [role, n] : st.per_role) {
    std::snprintf(buf, sizeof buf, "  role %-40s %zu\n", role.c_str(), n);
    os << buf;
  }
  if (st.stage != Stage::generated) {
    std::snprintf(buf, sizeof buf, "scored ok / failed       %zu / %zu (mean score %.2f)\n",
                  st.scored_ok, st.scored_failed, st.mean_score);
    os << buf;
  }
  return os.str();
}

}  // namespace rolesynth
