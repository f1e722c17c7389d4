// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. `acceptance --update-golden` rewrites tests/golden from a fresh
// end-to-end run instead of comparing against it.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdarg>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "loss_oracle.hpp"
#include "rolesynth/cli.hpp"
#include "rolesynth/rolesynth.hpp"
#include "selection_oracle.hpp"
#include "test_support.hpp"

using namespace rolesynth;
namespace fs = std::filesystem;
namespace rt = rolesynth::testing;

namespace {

bool g_update_golden = false;

struct Outcome {
  bool pass = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& why) {
  if (o.pass) o.detail = why;
  o.pass = false;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix<double> random_matrix(std::mt19937_64& rng, std::size_t b, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix<double> s(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) s(i, j) = u(rng);
  return s;
}

CorrespondenceMatrix random_groups(std::mt19937_64& rng, std::size_t b) {
  std::vector<std::size_t> owner(b);
  for (auto& o : owner) o = rng() % std::max<std::size_t>(1, b / 2 + 1);
  CorrespondenceMatrix m(b, b, 0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) m(i, j) = owner[i] == owner[j];
  return m;
}

oracle::Grid to_grid(const Matrix<double>& s) {
  oracle::Grid g(s.rows(), std::vector<double>(s.cols()));
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) g[i][j] = s(i, j);
  return g;
}

// Pool with duplicate captions and unscorable rows mixed in.
std::vector<ScoredRecord> messy_pool(std::mt19937_64& rng, std::size_t images,
                                     std::size_t max_per_image) {
  auto pool = rt::random_pool(rng, images, max_per_image, 5);
  const std::size_t n = pool.size();
  for (std::size_t k = 0; k < n / 10; ++k) {
    auto dup = pool[rng() % n];
    dup.record.role_name = "role" + std::to_string(rng() % 5);
    dup.score = static_cast<int>(rng() % 101);
    pool.push_back(dup);
  }
  for (auto& r : pool) {
    if (rng() % 25 == 0) {
      r.status = ScoreStatus::parse_failed;
      r.score.reset();
      r.rationale = "unparseable";
    }
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  return pool;
}

// --- 1 -------------------------------------------------------------------
Outcome collision_claim() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  CollisionSpec spec{1'000'000, 2048};
  const double exact = collision_probability(spec, true);
  const double approx = collision_probability(spec, false);
  const double mc = simulate_collision_rate(spec, 100'000, 20240601);
  const double secs = seconds_since(t0);
  o.detail = fmt("exact=%.6f approx=%.6f mc=%.5f (%.2fs)", exact, approx, mc, secs);
  if (!(exact > 0.80 && approx > 0.80)) fail(o, "probability not above 0.80: " + o.detail);
  if (std::abs(exact - mc) > 0.01 || std::abs(approx - mc) > 0.01) fail(o, "MC disagreement: " + o.detail);
  if (secs >= 10.0) fail(o, "too slow: " + o.detail);
  return o;
}

// --- 2 -------------------------------------------------------------------
Outcome identity_reduction() {
  Outcome o;
  std::mt19937_64 rng(1001);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t b = 1 + rng() % 16;
    const double tau = std::vector<double>{0.05, 0.1, 0.5, 1.0, 2.0}[rng() % 5];
    auto s = random_matrix(rng, b, 3.0);
    const double got = multipositive_loss(SimilarityBatch<double>{s, tau}, CorrespondenceMatrix::identity(b));
    const double want = oracle::onehot_loss(to_grid(s), tau);
    worst = std::max(worst, std::abs(got - want));
  }
  o.detail = fmt("max |diff| = %.3g over 100 batches", worst);
  if (!(worst <= 1e-12)) fail(o, o.detail);
  return o;
}

// --- 3 -------------------------------------------------------------------
Outcome gradient_check() {
  Outcome o;
  std::mt19937_64 rng(1002);
  const double taus[] = {0.05, 0.5, 1.0};
  const double h = 1e-5;
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t b = 2 + rng() % 7;
    const double tau = taus[t % 3];
    SimilarityBatch<double> batch{random_matrix(rng, b, 1.0), tau};
    auto m = random_groups(rng, b);
    auto g = loss_gradient(batch, m);
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        auto p = batch, q = batch;
        p.s(i, j) += h;
        q.s(i, j) -= h;
        const double fd = (multipositive_loss(p, m) - multipositive_loss(q, m)) / (2 * h);
        diff = std::max(diff, std::abs(fd - g(i, j)));
        scale = std::max(scale, std::abs(g(i, j)));
      }
    }
    worst = std::max(worst, diff / scale);
  }
  o.detail = fmt("max relative error %.3g over 50 instances", worst);
  if (!(worst <= 1e-5)) fail(o, o.detail);
  return o;
}

// --- 4 -------------------------------------------------------------------
Outcome positional_extension() {
  Outcome o;
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> u(-1, 1);
  PositionalTable<double> pe;
  pe.entries = Matrix<double>(77, 16);
  for (auto& v : pe.entries.data()) v = u(rng);
  auto out = extend_positional_table(pe, 248);
  if (out.length() != 248) fail(o, fmt("length %zu", out.length()));
  if (out.ratio_q != 4) fail(o, fmt("q = %zu", out.ratio_q));
  for (std::size_t r = 0; r < 20; ++r)
    for (std::size_t c = 0; c < 16; ++c)
      if (std::memcmp(&out.entries(r, c), &pe.entries(r, c), sizeof(double)) != 0)
        fail(o, fmt("prefix row %zu differs", r));
  for (std::size_t i = 0; i < 228; ++i) {
    const std::size_t lo = 20 + i / 4, hi = std::min<std::size_t>(lo + 1, 76);
    const double lambda = static_cast<double>(i % 4) / 4.0;
    for (std::size_t c = 0; c < 16; ++c) {
      const double a = pe.entries(lo, c), b = pe.entries(hi, c), v = out.entries(20 + i, c);
      if (v < std::min(a, b) || v > std::max(a, b)) fail(o, fmt("row %zu not convex", 20 + i));
      if (std::abs(v - ((1 - lambda) * a + lambda * b)) > 1e-15) fail(o, fmt("row %zu off formula", 20 + i));
    }
  }
  auto same = extend_positional_table(pe, 77);
  if (same.ratio_q != 1 || !(same.entries == pe.entries)) fail(o, "q=1 is not the identity");
  if (o.pass) o.detail = "n=77 keep=20 -> 248, q=4; q=1 identity";
  return o;
}

// --- 5 -------------------------------------------------------------------
Outcome selection_optimality() {
  Outcome o;
  std::mt19937_64 rng(1005);
  int over = 0, under = 0, exact = 0;
  for (int t = 0; t < 200; ++t) {
    auto pool = messy_pool(rng, 1 + rng() % 12, 5);
    FilterConfig cfg;
    cfg.k_max = 1 + static_cast<int>(rng() % 5);
    cfg.k_min = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.k_max));
    cfg.target_pairs = 1 + rng() % 30;
    cfg.prefilter_fraction = std::vector<double>{0.5, 0.5, 0.75, 1.0}[rng() % 4];
    auto res = cap_and_refill(pool, cfg);
    auto want = oracle::select(pool, {static_cast<std::size_t>(cfg.k_max),
                                      static_cast<std::size_t>(cfg.k_min), cfg.target_pairs,
                                      cfg.prefilter_fraction, cfg.epsilon, cfg.dedup});
    switch (res.stats.branch) {
      case SelectionBranch::over_budget: ++over; break;
      case SelectionBranch::under_budget: ++under; break;
      case SelectionBranch::exact: ++exact; break;
    }
    bool same = res.kept.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) same = res.kept[i].scored == *want[i];
    if (!same) {
      fail(o, fmt("pool %d: kept %zu, oracle %zu", t, res.kept.size(), want.size()));
      break;
    }
  }
  if (o.pass) o.detail = fmt("200 pools match (over=%d under=%d exact=%d)", over, under, exact);
  return o;
}

// --- 6 -------------------------------------------------------------------
Outcome selection_safety() {
  Outcome o;
  std::mt19937_64 rng(1006);
  std::size_t violations = 0, largest = 0, total_rows = 0;
  auto violate = [&](const std::string& why) {
    if (!violations) o.detail = why;
    ++violations;
  };
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < 1000; ++t) {
    // Log-uniform pool sizes with a few pinned at the 10k ceiling.
    const double lg = std::uniform_real_distribution<double>(0.0, 4.0)(rng);
    std::size_t want_rows = t % 100 == 0 ? 10'000 : static_cast<std::size_t>(std::pow(10.0, lg));
    const std::size_t per = 1 + rng() % 8;
    const std::size_t images = std::max<std::size_t>(1, want_rows * 2 / (per + 1));
    auto pool = messy_pool(rng, images, per);
    if (pool.size() > 10'000) pool.resize(10'000);
    largest = std::max(largest, pool.size());
    total_rows += pool.size();

    FilterConfig cfg;
    cfg.k_max = 1 + static_cast<int>(rng() % 6);
    cfg.k_min = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.k_max));
    cfg.target_pairs = 1 + rng() % (pool.size() + pool.size() / 2 + 1);
    cfg.prefilter_fraction = std::vector<double>{0.3, 0.5, 0.8, 1.0}[rng() % 4];
    auto res = cap_and_refill(pool, cfg);

    auto cands = oracle::candidates(pool, {static_cast<std::size_t>(cfg.k_max),
                                           static_cast<std::size_t>(cfg.k_min), cfg.target_pairs,
                                           cfg.prefilter_fraction, cfg.epsilon, cfg.dedup});
    std::map<std::string, std::size_t> avail, kept;
    for (const auto& c : cands) ++avail[c.rec->record.image_id];
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& k : res.kept) {
      ++kept[k.scored.record.image_id];
      if (k.scored.status != ScoreStatus::ok) violate(fmt("pool %d: unscored row kept", t));
      if (!seen.insert({k.scored.record.image_id, k.scored.record.caption}).second)
        violate(fmt("pool %d: duplicate kept", t));
    }
    if (res.stats.candidates != cands.size()) violate(fmt("pool %d: candidate count differs", t));

    std::size_t floors = 0, capped = 0;
    for (const auto& [img, n] : avail) {
      floors += std::min<std::size_t>(cfg.k_min, n);
      capped += std::min<std::size_t>(cfg.k_max, n);
    }
    for (const auto& [img, n] : kept) {
      if (n > static_cast<std::size_t>(cfg.k_max)) violate(fmt("pool %d: image over k_max", t));
      if (!avail.count(img)) violate(fmt("pool %d: kept image has no candidate", t));
    }
    const std::size_t n_kept = res.kept.size();
    if (n_kept > cfg.target_pairs) {
      const bool justified = res.stats.branch == SelectionBranch::over_budget &&
                             n_kept == floors && !res.stats.notes.empty();
      if (!justified) violate(fmt("pool %d: %zu kept > target %zu without floor", t, n_kept, cfg.target_pairs));
    }
    if (res.stats.branch == SelectionBranch::over_budget) {
      if (n_kept != std::max(floors, cfg.target_pairs)) violate(fmt("pool %d: over-budget size", t));
      for (const auto& [img, n] : avail) {
        if (kept[img] < std::min<std::size_t>(cfg.k_min, n)) violate(fmt("pool %d: floor broken", t));
      }
    } else {
      if (n_kept != capped) violate(fmt("pool %d: capped set not kept", t));
      if (res.stats.branch == SelectionBranch::under_budget) {
        for (const auto& [img, n] : avail)
          if (!kept.count(img)) violate(fmt("pool %d: image uncovered under budget", t));
      }
    }

    auto shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto again = cap_and_refill(shuffled, cfg);
    if (again.kept != res.kept) violate(fmt("pool %d: permutation changed the output", t));
  }
  if (violations) {
    fail(o, fmt("%zu violations; first: ", violations) + o.detail);
  } else {
    o.detail = fmt("1000 pools, %zu rows total, largest %zu, 0 violations (%.1fs)", total_rows,
                   largest, seconds_since(t0));
  }
  if (largest != 10'000) fail(o, "no pool reached 10,000 records");
  return o;
}

// --- 7 -------------------------------------------------------------------
Outcome prefilter_thresholds() {
  Outcome o;
  struct Case {
    GranularityKind g;
    std::string caption;
    PrefilterVerdict want;
  };
  std::vector<Case> cases;
  for (auto g : {GranularityKind::long_caption, GranularityKind::short_caption}) {
    const int min = Granularity::of(g).min_words;
    for (int n : {3, 4, 9, 10, 11}) {
      cases.push_back({g, rt::words(n, "w"), n < min ? PrefilterVerdict::discard_short : PrefilterVerdict::keep});
    }
  }
  cases.push_back({GranularityKind::long_caption, "Tune: " + rt::words(10, "w"), PrefilterVerdict::discard_titled});
  cases.push_back({GranularityKind::short_caption, "  Joyful simplicity: " + rt::words(3, "w"),
                   PrefilterVerdict::discard_titled});
  std::size_t ok = 0;
  for (const auto& c : cases) {
    auto got = prefilter(c.caption, Granularity::of(c.g));
    if (got == c.want) ++ok;
    else fail(o, fmt("'%s' (%s) -> %s", c.caption.c_str(), to_string(c.g), to_string(got)));
  }
  std::size_t titles = 0;
  for (auto t : kForbiddenTitles) {
    for (auto g : {GranularityKind::long_caption, GranularityKind::short_caption}) {
      std::string cap = std::string(t) + " " + rt::words(12, "w");
      if (prefilter(cap, Granularity::of(g)) == PrefilterVerdict::discard_titled) ++titles;
      else fail(o, "title not rejected: " + std::string(t));
    }
  }
  if (o.pass) o.detail = fmt("%zu/%zu fixture cases, %zu/%zu title checks", ok, cases.size(), titles,
                             kForbiddenTitles.size() * 2);
  return o;
}

// --- 8 -------------------------------------------------------------------
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file_bytes(e.path().string());
  }
  return out;
}

struct ChdirGuard {
  explicit ChdirGuard(const fs::path& p) : prev(fs::current_path()) { fs::current_path(p); }
  ~ChdirGuard() { fs::current_path(prev); }
  fs::path prev;
};

// One pipeline pass inside `root`; returns "" or the failing step.
std::string run_pipeline(const fs::path& root, const std::string& base_url, int concurrency,
                         std::optional<std::size_t> interrupt_at) {
  fs::create_directories(root / "images");
  for (const auto& img : rt::fixture_corpus()) fs::copy_file(img, root / "images" / fs::path(img).filename());
  ChdirGuard cd(root);
  std::vector<std::string> ep{"--base-url", base_url, "--backoff-ms", "1", "--concurrency",
                              std::to_string(concurrency), "--api-key-env", "ROLESYNTH_TEST_NO_KEY",
                              "--shard-size", "8"};
  auto cli = [&](std::vector<std::string> args, std::string* captured = nullptr) {
    std::vector<std::string> full = ep;
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream out, err;
    int code = cli_main(full, out, err);
    if (captured) *captured = out.str();
    return code == 0 ? std::string() : "exit " + std::to_string(code) + ": " + err.str();
  };
  std::vector<std::string> gen{"generate", "--images", "images", "--out", "out/generated",
                               "--created-at", "2026-01-01T00:00:00Z", "--batch-size", "4"};
  if (interrupt_at) {
    auto partial = gen;
    partial.insert(partial.end(), {"--max-cells", std::to_string(*interrupt_at)});
    if (auto e = cli(partial); !e.empty()) return "generate (partial) " + e;
    if (fs::exists("out/generated/manifest.json")) return "partial run published shards";
  }
  if (auto e = cli(gen); !e.empty()) return "generate " + e;
  if (auto e = cli({"score", "--in", "out/generated", "--out", "out/scored"}); !e.empty()) return "score " + e;
  if (auto e = cli({"filter", "--in", "out/scored", "--out", "out/filtered", "--target", "7", "--k-max",
                    "3", "--k-min", "1"});
      !e.empty())
    return "filter " + e;
  std::string table, json;
  if (auto e = cli({"stats", "--in", "out/filtered"}, &table); !e.empty()) return "stats " + e;
  if (auto e = cli({"stats", "--in", "out/filtered", "--json"}, &json); !e.empty()) return "stats " + e;
  std::ofstream("out/stats.txt", std::ios::binary) << table;
  std::ofstream("out/stats.json", std::ios::binary) << json;
  return {};
}

Outcome golden_run() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  MockEndpoint mock;
  mock.start();
  const auto roles = builtin_roles();
  rt::script_pipeline(mock, rt::fixture_corpus(), roles);

  rt::TempDir tmp;
  struct Variant {
    const char* name;
    int concurrency;
    std::optional<std::size_t> interrupt;
  };
  const std::vector<Variant> variants{{"run-a", 4, std::nullopt},
                                      {"run-b", 1, std::nullopt},
                                      {"resumed", 3, 13}};
  std::vector<std::map<std::string, std::string>> trees;
  for (const auto& v : variants) {
    mock.reset_log();
    if (auto e = run_pipeline(tmp / v.name, mock.base_url(), v.concurrency, v.interrupt); !e.empty()) {
      fail(o, std::string(v.name) + ": " + e);
      return o;
    }
    // 30 captioning calls plus one scoring call per kept caption.
    if (mock.request_count() != 30 + 28) {
      fail(o, fmt("%s: %zu endpoint calls, want 58", v.name, mock.request_count()));
    }
    trees.push_back(tree_bytes(tmp / v.name / "out"));
  }
  for (std::size_t i = 1; i < trees.size(); ++i) {
    if (trees[i] != trees[0]) {
      for (const auto& [k, v] : trees[0]) {
        auto it = trees[i].find(k);
        if (it == trees[i].end() || it->second != v) {
          fail(o, std::string(variants[i].name) + " differs at " + k);
          break;
        }
      }
      if (o.pass) fail(o, std::string(variants[i].name) + " has extra files");
    }
  }

  const fs::path golden(ROLESYNTH_GOLDEN_DIR);
  if (g_update_golden) {
    fs::remove_all(golden);
    for (const auto& [rel, bytes] : trees[0]) {
      fs::create_directories((golden / rel).parent_path());
      std::ofstream(golden / rel, std::ios::binary) << bytes;
    }
    std::printf("golden files rewritten in %s\n", golden.string().c_str());
  } else {
    auto want = tree_bytes(golden);
    if (want.empty()) fail(o, "no golden files; run with --update-golden");
    for (const auto& [rel, bytes] : want) {
      auto it = trees[0].find(rel);
      if (it == trees[0].end()) fail(o, "missing output " + rel);
      else if (it->second != bytes) fail(o, "golden mismatch in " + rel);
    }
    for (const auto& [rel, _] : trees[0])
      if (!want.count(rel)) fail(o, "output not in golden set: " + rel);
  }
  const double secs = seconds_since(t0);
  if (secs >= 30.0) fail(o, fmt("took %.1fs", secs));
  if (o.pass) o.detail = fmt("%zu files identical across 3 runs and golden (%.1fs)", trees[0].size(), secs);
  return o;
}

// --- 9 -------------------------------------------------------------------
Outcome prompt_fidelity() {
  Outcome o;
  std::size_t checks = 0;
  auto need = [&](const std::string& text, const char* anchor, const std::string& who) {
    ++checks;
    if (text.find(anchor) == std::string::npos) fail(o, who + " lacks \"" + anchor + "\"");
  };
  for (const auto& r : builtin_roles().roles) {
    auto lp = render_caption_prompt(r, Granularity::long_form());
    auto sp = render_caption_prompt(r, Granularity::short_form());
    auto fp = render_filter_prompt(r, "A dog on a beach.");
    need(lp, "max 150 words", r.agent_role + " long");
    need(lp, "Do NOT use any title", r.agent_role + " long");
    need(sp, "max 30 words", r.agent_role + " short");
    need(sp, "Do NOT use any title", r.agent_role + " short");
    need(fp, "scale of 1-100", r.agent_role + " filter");
  }
  if (o.pass) o.detail = fmt("%zu anchors present across 5 roles", checks);
  return o;
}

// --- 10 ------------------------------------------------------------------
Outcome config_export() {
  Outcome o;
  rt::TempDir tmp;
  const auto path = (tmp / "train.cfg").string();
  export_training_config(path);
  auto c = parse_training_config(read_file_bytes(path));
  auto check = [&](bool ok, const char* field) {
    if (!ok) fail(o, std::string("field ") + field);
  };
  check(c.global_batch_size == 2048, "global_batch_size");
  check(c.epochs == 6, "epochs");
  check(c.learning_rate == 1e-6, "learning_rate");
  check(c.warmup_steps == 200, "warmup_steps");
  check(c.scheduler == "cosine", "scheduler");
  check(c.weight_decay == 1e-2, "weight_decay");
  check(c.optimizer == "AdamW", "optimizer");
  check(c.adam_beta1 == 0.9 && c.adam_beta2 == 0.999 && c.adam_epsilon == 1e-8, "adam");
  check(c.max_text_tokens == 248, "max_text_tokens");
  if (o.pass) o.detail = "batch 2048, epochs 6, lr 1e-6, warmup 200, cosine, wd 1e-2";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--update-golden") == 0) g_update_golden = true;
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"collision probability vs Monte-Carlo", collision_claim},
      {"identity correspondence reduces to one-hot loss", identity_reduction},
      {"analytic gradient vs finite differences", gradient_check},
      {"positional table extension 77 -> 248", positional_extension},
      {"cap-and-refill vs exhaustive oracle", selection_optimality},
      {"cap-and-refill safety properties", selection_safety},
      {"pre-filter thresholds and titles", prefilter_thresholds},
      {"end-to-end golden run", golden_run},
      {"prompt anchor strings", prompt_fidelity},
      {"training config export", config_export},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
