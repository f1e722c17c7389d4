#pragma once

// Command-line front end; `cli_main` is callable in-process for tests.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rolesynth/collision.hpp"
#include "rolesynth/dataset_io.hpp"
#include "rolesynth/filter.hpp"
#include "rolesynth/gateway.hpp"
#include "rolesynth/generation.hpp"
#include "rolesynth/mock_endpoint.hpp"
#include "rolesynth/roles.hpp"
#include "rolesynth/scoring.hpp"
#include "rolesynth/training_config.hpp"
#include "rolesynth/verify.hpp"

namespace rolesynth {

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitUsage = 2 };

namespace cli {

struct SamplingOverrides {
  std::optional<int> top_k;
  std::optional<double> top_p;
  std::optional<double> temperature;
  std::optional<double> repetition_penalty;
  std::optional<double> presence_penalty;
  std::optional<double> frequency_penalty;

  SamplingParams apply(SamplingParams p) const {
    if (top_k) p.top_k = *top_k;
    if (top_p) p.top_p = *top_p;
    if (temperature) p.temperature = *temperature;
    if (repetition_penalty) p.repetition_penalty = *repetition_penalty;
    if (presence_penalty) p.presence_penalty = *presence_penalty;
    if (frequency_penalty) p.frequency_penalty = *frequency_penalty;
    p.validate();
    return p;
  }
};

inline nlohmann::json sampling_json(const SamplingParams& p) {
  return {{"top_k", p.top_k},
          {"top_p", p.top_p},
          {"temperature", p.temperature},
          {"repetition_penalty", p.repetition_penalty},
          {"presence_penalty", p.presence_penalty},
          {"frequency_penalty", p.frequency_penalty}};
}

inline bool is_image_file(const fs::path& p) {
  static const std::set<std::string> exts = {".png", ".jpg", ".jpeg", ".webp", ".gif", ".bmp"};
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return exts.contains(e);
}

/// Directories expand to their image files in name order; files are kept as given.
inline std::vector<std::string> list_corpus(const std::vector<std::string>& inputs) {
  std::vector<std::string> corpus;
  for (const auto& in : inputs) {
    fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) corpus.push_back(f.string());
    } else if (fs::is_regular_file(p)) {
      corpus.push_back(p.string());
    } else {
      throw IoError("corpus path not found: " + in);
    }
  }
  if (corpus.empty()) throw IoError("corpus is empty");
  return corpus;
}

inline RoleSet load_role_option(const std::string& path) {
  return path.empty() ? builtin_roles() : load_roles(path);
}

inline std::string manifest_checksum_list(const DatasetManifest& m) {
  std::string s;
  for (const auto& shard : m.shards) s += shard.checksum + ";";
  return s;
}

}  // namespace cli

inline int cli_main(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Role-conditioned caption synthesis and curation toolkit", "rolesynth"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file supplying option values");

  EndpointConfig ep;
  double timeout_s = 120.0;
  long backoff_ms = 1000;
  std::uint64_t seed = 0;
  cli::SamplingOverrides sampling;
  std::string roles_path;
  std::size_t shard_size = 100000;

  app.add_option("--base-url", ep.base_url, "OpenAI-compatible endpoint base URL")->capture_default_str();
  app.add_option("--model", ep.model_name, "model name sent with each request")->capture_default_str();
  app.add_option("--api-key-env", ep.api_key_env, "environment variable holding the API key")
      ->capture_default_str();
  app.add_option("--timeout", timeout_s, "request timeout in seconds")->capture_default_str();
  app.add_option("--max-retries", ep.max_retries, "retries on transient failures")->capture_default_str();
  app.add_option("--concurrency", ep.max_concurrency, "maximum in-flight requests")->capture_default_str();
  app.add_option("--backoff-ms", backoff_ms, "base retry backoff in milliseconds")->capture_default_str();
  app.add_option("--seed", seed, "seed for retry jitter and randomized checks")->capture_default_str();
  app.add_option("--roles", roles_path, "role file (default: the five built-in roles)");
  app.add_option("--top-k", sampling.top_k, "sampling top-k")->capture_default_str();
  app.add_option("--top-p", sampling.top_p, "sampling nucleus mass")->capture_default_str();
  app.add_option("--temperature", sampling.temperature, "sampling temperature")->capture_default_str();
  app.add_option("--repetition-penalty", sampling.repetition_penalty, "sampling repetition penalty")->capture_default_str();
  app.add_option("--presence-penalty", sampling.presence_penalty, "sampling presence penalty")->capture_default_str();
  app.add_option("--frequency-penalty", sampling.frequency_penalty, "sampling frequency penalty")->capture_default_str();
  app.add_option("--shard-size", shard_size, "records per output shard")->capture_default_str();

  // roles
  auto* roles_cmd = app.add_subcommand("roles", "show, validate or generate role sets");
  roles_cmd->require_subcommand(1);
  auto* roles_show = roles_cmd->add_subcommand("show", "print the active role set");
  auto* roles_validate = roles_cmd->add_subcommand("validate", "validate a role file");
  std::string validate_path;
  roles_validate->add_option("file", validate_path)->required();
  auto* roles_generate = roles_cmd->add_subcommand("generate", "elicit roles from the endpoint");
  std::string roles_out;
  roles_generate->add_option("--out", roles_out, "output role file")->required();

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "synthesize role-conditioned captions");
  std::vector<std::string> images;
  std::string gen_out;
  std::vector<std::string> gran_names{"long", "short"};
  std::optional<std::size_t> max_cells;
  std::size_t batch_size = 16;
  std::string created_at;
  gen_cmd->add_option("--images", images, "image files or directories")->required();
  gen_cmd->add_option("--out", gen_out, "output dataset directory")->required();
  gen_cmd->add_option("--granularity", gran_names, "long and/or short")
      ->delimiter(',')
      ->check(CLI::IsMember({"long", "short"}));
  gen_cmd->add_option("--max-cells", max_cells, "stop after this many cells (resume later)");
  gen_cmd->add_option("--batch-size", batch_size, "cells per committed batch")->capture_default_str();
  gen_cmd->add_option("--created-at", created_at, "fixed record timestamp");

  // score
  auto* score_cmd = app.add_subcommand("score", "score captions with the role-aware filter prompt");
  std::string score_in, score_out;
  score_cmd->add_option("--in", score_in, "generated dataset directory")->required();
  score_cmd->add_option("--out", score_out, "output dataset directory")->required();

  // filter
  auto* filter_cmd = app.add_subcommand("filter", "role-aware cap-and-refill selection");
  FilterConfig fcfg;
  std::string filter_in, filter_out;
  bool no_dedup = false;
  bool split_pool = false;
  filter_cmd->add_option("--in", filter_in, "scored dataset directory")->required();
  filter_cmd->add_option("--out", filter_out, "output dataset directory")->required();
  filter_cmd->add_option("--k-max", fcfg.k_max, "maximum captions kept per image")->capture_default_str();
  filter_cmd->add_option("--k-min", fcfg.k_min, "per-image floor when trimming to the target")->capture_default_str();
  filter_cmd->add_option("--target", fcfg.target_pairs, "target number of pairs")->required();
  filter_cmd->add_option("--epsilon", fcfg.epsilon, "stdev floor for z-scores")->capture_default_str();
  filter_cmd->add_option("--prefilter-fraction", fcfg.prefilter_fraction, "per-role fraction kept by raw score")->capture_default_str();
  filter_cmd->add_flag("--no-dedup", no_dedup, "keep duplicate (image, caption) rows");
  filter_cmd->add_flag("--split-pool", split_pool, "filter long and short captions separately");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "dataset statistics");
  std::string stats_in;
  bool stats_json = false;
  stats_cmd->add_option("--in", stats_in, "dataset directory")->required();
  stats_cmd->add_flag("--json", stats_json, "machine-readable output");

  auto* verify_cmd = app.add_subcommand("verify", "run the numerics self-check suite");

  auto* export_cmd = app.add_subcommand("export-config", "write fine-tuning hyperparameters");
  std::string export_out;
  export_cmd->add_option("--out", export_out, "output file")->required();

  auto* mock_cmd = app.add_subcommand("serve-mock", "serve a scripted mock endpoint");
  std::string mock_script;
  int mock_port = 8000;
  mock_cmd->add_option("--script", mock_script, "mock script JSON")->required();
  mock_cmd->add_option("--port", mock_port, "listen port on 127.0.0.1")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    ep.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000));
    ep.backoff_base = std::chrono::milliseconds(backoff_ms);
    ep.seed = seed;
    ep.validate();

    if (*roles_cmd) {
      if (*roles_show) {
        out << serialize_roles(cli::load_role_option(roles_path));
      } else if (*roles_validate) {
        auto rs = load_roles(validate_path);
        out << "ok: " << rs.size() << " roles\n";
      } else if (*roles_generate) {
        Gateway gateway(ep);
        RoleSet rs;
        try {
          rs = generate_roles(gateway, sampling.apply(default_scoring_params()));
        } catch (const ExtractionError& e) {
          err << "error: " << e.what() << "\n--- raw response ---\n" << e.raw_response() << "\n";
          return kExitError;
        }
        write_roles(rs, roles_out);
        out << "wrote " << rs.size() << " roles to " << roles_out << "\n";
      }
      return kExitOk;
    }

    if (*gen_cmd) {
      const fs::path dir(gen_out);
      if (fs::exists(dir / kManifestFile)) {
        throw IoError("stage output already complete in " + gen_out + "; choose a new directory");
      }
      RoleSet roles = cli::load_role_option(roles_path);
      auto corpus = cli::list_corpus(images);
      GenerationOptions opts;
      opts.granularities.clear();
      for (const auto& g : gran_names) opts.granularities.push_back(granularity_from_string(g));
      opts.batch_size = batch_size;
      opts.max_cells = max_cells;
      if (!created_at.empty()) opts.clock = [created_at] { return created_at; };
      SamplingParams params = sampling.apply(default_generation_params());
      Gateway gateway(ep);
      auto outcome = run_generation(corpus, roles, gateway, params, dir / "work", opts);
      const auto& c = outcome.manifest.counts;
      const std::size_t total = outcome.manifest.total_cells(roles.size());
      out << "cells " << outcome.manifest.cursor << "/" << total << ": kept " << c.generated
          << ", discarded_short " << c.discarded_short << ", discarded_titled "
          << c.discarded_titled << ", failed " << c.failed << "\n";
      if (!outcome.complete) {
        out << "run incomplete; re-run the same command to resume\n";
        return kExitOk;
      }
      nlohmann::json fp = {{"roles", role_set_fingerprint(roles)},
                           {"corpus", corpus},
                           {"granularities", gran_names},
                           {"model", ep.model_name},
                           {"sampling", cli::sampling_json(params)}};
      auto records = read_run_records(dir / "work", outcome.manifest);
      auto m = write_record_shards(records, dir, shard_size, Stage::generated,
                                   sha256_hex(fp.dump()));
      out << "wrote " << m.record_count() << " records in " << m.shards.size() << " shard(s)\n";
      return kExitOk;
    }

    if (*score_cmd) {
      auto in_manifest = read_manifest(score_in);
      if (in_manifest.stage != Stage::generated) throw ValidationError("score expects a generated dataset");
      auto records = read_caption_records(score_in, in_manifest);
      RoleSet roles = cli::load_role_option(roles_path);
      SamplingParams params = sampling.apply(default_scoring_params());
      Gateway gateway(ep);
      ScoringStats ss;
      auto scored = score_pairs(records, roles, gateway, params, &ss);
      nlohmann::json fp = {{"input", cli::manifest_checksum_list(in_manifest)},
                           {"roles", role_set_fingerprint(roles)},
                           {"model", ep.model_name},
                           {"sampling", cli::sampling_json(params)}};
      auto m = write_record_shards(scored, score_out, shard_size, Stage::scored, sha256_hex(fp.dump()));
      out << "scored " << scored.size() << " records (" << ss.parse_failed
          << " parse_failed), wrote " << m.shards.size() << " shard(s)\n";
      return kExitOk;
    }

    if (*filter_cmd) {
      fcfg.dedup = !no_dedup;
      fcfg.validate();
      auto in_manifest = read_manifest(filter_in);
      if (in_manifest.stage != Stage::scored) throw ValidationError("filter expects a scored dataset");
      auto pool = read_scored_records(filter_in, in_manifest);
      auto result = split_pool ? cap_and_refill_split(pool, fcfg) : cap_and_refill(pool, fcfg);
      auto report = selection_stats(result);
      nlohmann::json fp = {{"input", cli::manifest_checksum_list(in_manifest)},
                           {"k_max", fcfg.k_max},
                           {"k_min", fcfg.k_min},
                           {"target_pairs", fcfg.target_pairs},
                           {"dedup", fcfg.dedup},
                           {"epsilon", fcfg.epsilon},
                           {"prefilter_fraction", fcfg.prefilter_fraction},
                           {"split_pool", split_pool}};
      auto m = write_record_shards(result.kept, filter_out, shard_size, Stage::filtered,
                                   sha256_hex(fp.dump()));
      atomic_write_file(fs::path(filter_out) / "filter_report.json", to_json(report).dump(2) + "\n");
      atomic_write_file(fs::path(filter_out) / "filter_report.txt", to_table(report));
      out << to_table(report);
      out << "wrote " << m.record_count() << " records in " << m.shards.size() << " shard(s)\n";
      return kExitOk;
    }

    if (*stats_cmd) {
      auto st = corpus_stats(stats_in);
      auto report_path = fs::path(stats_in) / "filter_report.json";
      if (stats_json) {
        auto j = to_json(st);
        if (fs::exists(report_path)) {
          j["selection_report"] = ojson::parse(read_file_bytes(report_path.string()));
        }
        out << j.dump(2) << "\n";
      } else {
        out << to_table(st);
        auto txt = fs::path(stats_in) / "filter_report.txt";
        if (fs::exists(txt)) out << "-- selection --\n" << read_file_bytes(txt.string());
      }
      return kExitOk;
    }

    if (*verify_cmd) {
      auto checks = run_numeric_checks(seed == 0 ? 20240601 : seed);
      out << format_check_table(checks);
      bool ok = std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
      return ok ? kExitOk : kExitError;
    }

    if (*export_cmd) {
      export_training_config(export_out);
      out << "wrote " << export_out << "\n";
      return kExitOk;
    }

    if (*mock_cmd) {
      auto script = mock_script_from_json(nlohmann::json::parse(read_file_bytes(mock_script)));
      MockEndpoint mock(std::move(script));
      out << "serving mock endpoint on http://127.0.0.1:" << mock_port << "/v1" << std::endl;
      mock.serve_blocking(mock_port);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const EndpointError& e) {
    err << "error: " << e.what();
    if (!e.body().empty()) err << "\n" << e.body();
    err << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}

inline int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace rolesynth
