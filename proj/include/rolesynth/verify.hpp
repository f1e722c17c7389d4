#pragma once

// Self-check suite behind `rolesynth verify`: randomized invariant checks of
// the loss, gradient, positional extension, collision and selection code.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rolesynth/captions.hpp"
#include "rolesynth/collision.hpp"
#include "rolesynth/filter.hpp"
#include "rolesynth/loss.hpp"
#include "rolesynth/positional.hpp"

namespace rolesynth {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline Matrix<double> random_similarity(std::mt19937_64& rng, std::size_t b) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix<double> s(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) s(i, j) = u(rng);
  return s;
}

/// Random correspondence from a random image assignment per batch slot.
inline CorrespondenceMatrix random_correspondence(std::mt19937_64& rng, std::size_t b) {
  std::uniform_int_distribution<std::size_t> img(0, std::max<std::size_t>(b / 2, 1));
  std::vector<std::size_t> owner(b);
  for (auto& o : owner) o = img(rng);
  CorrespondenceMatrix m(b, b, 0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) m(i, j) = owner[i] == owner[j];
  return m;
}

// Plain one-hot softmax cross-entropy in both directions, no shortcuts shared
// with the multi-positive code.
inline double one_hot_contrastive(const Matrix<double>& s, double tau) {
  const std::size_t b = s.rows();
  double i2t = 0, t2i = 0;
  for (std::size_t i = 0; i < b; ++i) {
    double row = 0, col = 0, row_max = -1e300, col_max = -1e300;
    for (std::size_t j = 0; j < b; ++j) {
      row_max = std::max(row_max, s(i, j) / tau);
      col_max = std::max(col_max, s(j, i) / tau);
    }
    for (std::size_t j = 0; j < b; ++j) {
      row += std::exp(s(i, j) / tau - row_max);
      col += std::exp(s(j, i) / tau - col_max);
    }
    i2t += -(s(i, i) / tau - row_max - std::log(row));
    t2i += -(s(i, i) / tau - col_max - std::log(col));
  }
  return 0.5 * (i2t + t2i) / static_cast<double>(b);
}

inline std::string fmt(const char* f, double a, double b = 0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

}  // namespace detail

inline std::vector<CheckResult> run_numeric_checks(std::uint64_t seed = 20240601) {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(seed);

  {
    CollisionSpec spec{1'000'000, 2048};
    double exact = collision_probability(spec, true);
    double approx = collision_probability(spec, false);
    double mc = simulate_collision_rate(spec, 100'000, seed);
    bool ok = exact > 0.8 && approx > 0.8 && std::abs(exact - mc) <= 0.01 &&
              std::abs(approx - mc) <= 0.01;
    out.push_back({"collision N=1e6 B=2048 > 0.80, Monte-Carlo within 0.01", ok,
                   detail::fmt("exact %.6f approx %.6f", exact, approx) +
                       detail::fmt(" mc %.6f", mc)});
  }
  {
    bool ok = true;
    for (std::uint64_t n : {100ULL, 1000ULL, 100000ULL}) {
      double prev = -1;
      for (std::uint64_t b = 1; b <= std::min<std::uint64_t>(100, n / 2); ++b) {
        double p = collision_probability({n, b}, true);
        ok = ok && p >= prev && p <= collision_probability({n / 2, b}, true);
        prev = p;
      }
    }
    out.push_back({"collision monotone in B and N", ok, ""});
  }
  {
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
      std::size_t b = 1 + rng() % 16;
      double tau = std::array{0.05, 0.5, 1.0}[rng() % 3];
      auto s = detail::random_similarity(rng, b);
      double got = multipositive_loss(SimilarityBatch<double>{s, tau},
                                      CorrespondenceMatrix::identity(b));
      worst = std::max(worst, std::abs(got - detail::one_hot_contrastive(s, tau)));
    }
    out.push_back({"identity correspondence equals one-hot loss (1e-12)", worst <= 1e-12,
                   detail::fmt("max |diff| %.3e", worst)});
  }
  {
    double worst = 0;
    const double h = 1e-5;
    for (int t = 0; t < 50; ++t) {
      std::size_t b = 2 + rng() % 7;
      double tau = std::array{0.05, 0.5, 1.0}[t % 3];
      SimilarityBatch<double> batch{detail::random_similarity(rng, b), tau};
      auto m = detail::random_correspondence(rng, b);
      auto g = loss_gradient(batch, m);
      double num_norm = 0, diff_norm = 0;
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
          auto plus = batch, minus = batch;
          plus.s(i, j) += h;
          minus.s(i, j) -= h;
          double fd = (multipositive_loss(plus, m) - multipositive_loss(minus, m)) / (2 * h);
          num_norm = std::max(num_norm, std::abs(fd));
          diff_norm = std::max(diff_norm, std::abs(fd - g(i, j)));
        }
      }
      worst = std::max(worst, diff_norm / std::max(num_norm, 1e-12));
    }
    out.push_back({"analytic gradient vs central differences (rel 1e-5)", worst <= 1e-5,
                   detail::fmt("max rel err %.3e", worst)});
  }
  {
    bool nonneg = true;
    double shift_worst = 0;
    for (int t = 0; t < 100; ++t) {
      std::size_t b = 1 + rng() % 10;
      SimilarityBatch<double> batch{detail::random_similarity(rng, b), 0.5};
      auto m = detail::random_correspondence(rng, b);
      nonneg = nonneg && multipositive_loss(batch, m) >= -1e-12;
      auto shifted = batch;
      std::size_t r = rng() % b;
      for (std::size_t j = 0; j < b; ++j) shifted.s(r, j) += 3.7;
      shift_worst = std::max(shift_worst, std::abs(multipositive_loss_i2t(shifted, m) -
                                                   multipositive_loss_i2t(batch, m)));
    }
    out.push_back({"loss non-negative", nonneg, ""});
    out.push_back({"row shift invariance of image-to-text loss (1e-10)", shift_worst <= 1e-10,
                   detail::fmt("max |dL| %.3e", shift_worst)});
  }
  {
    std::normal_distribution<double> nd;
    PositionalTable<double> pe;
    pe.entries = Matrix<double>(77, 16);
    for (std::size_t r = 0; r < 77; ++r)
      for (std::size_t c = 0; c < 16; ++c) pe.entries(r, c) = nd(rng);
    auto ext = extend_positional_table(pe, 248);
    bool ok = ext.entries.rows() == 248 && ext.ratio_q == 4;
    for (std::size_t r = 0; r < 20 && ok; ++r)
      for (std::size_t c = 0; c < 16; ++c) ok = ok && ext.entries(r, c) == pe.entries(r, c);
    for (std::size_t i = 0; i < 228 && ok; ++i) {
      std::size_t lo = 20 + i / 4, hi = std::min<std::size_t>(lo + 1, 76);
      for (std::size_t c = 0; c < 16; ++c) {
        double v = ext.entries(20 + i, c);
        ok = ok && v >= std::min(pe.entries(lo, c), pe.entries(hi, c)) &&
             v <= std::max(pe.entries(lo, c), pe.entries(hi, c));
      }
    }
    ok = ok && extend_positional_table(pe, 77).entries == pe.entries;
    out.push_back({"positional extension 77 -> 248 (q=4), prefix frozen, convex rows, q=1 identity",
                   ok, ""});
  }
  {
    double worst = 0;
    std::uniform_int_distribution<int> sc(0, 100);
    for (int t = 0; t < 50; ++t) {
      std::vector<ScoredRecord> rows;
      std::size_t n = 2 + rng() % 30;
      for (std::size_t i = 0; i < n; ++i) {
        ScoredRecord r;
        r.record.role_name = "r" + std::to_string(rng() % 3);
        r.score = sc(rng);
        r.status = ScoreStatus::ok;
        rows.push_back(r);
      }
      auto z = normalize_scores(rows, 1e-12);
      std::map<std::string, std::vector<double>> g;
      std::map<std::string, std::vector<int>> raw;
      for (const auto& r : z) {
        g[r.scored.record.role_name].push_back(r.z);
        raw[r.scored.record.role_name].push_back(*r.scored.score);
      }
      for (auto& [role, v] : g) {
        auto [lo, hi] = std::minmax_element(raw[role].begin(), raw[role].end());
        if (*lo == *hi) continue;
        double mean = 0, var = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        worst = std::max({worst, std::abs(mean), std::abs(std::sqrt(var) - 1.0)});
      }
    }
    out.push_back({"role-wise z-scores have mean 0, stdev 1 (1e-9)", worst <= 1e-9,
                   detail::fmt("max deviation %.3e", worst)});
  }
  {
    struct Case {
      int words;
      Granularity g;
      PrefilterVerdict want;
    };
    bool ok = true;
    for (int w : {3, 4, 9, 10, 11}) {
      std::string text;
      for (int i = 0; i < w; ++i) text += (i ? " w" : "w");
      ok = ok && prefilter(text, Granularity::long_form()) ==
                     (w < 10 ? PrefilterVerdict::discard_short : PrefilterVerdict::keep);
      ok = ok && prefilter(text, Granularity::short_form()) ==
                     (w < 4 ? PrefilterVerdict::discard_short : PrefilterVerdict::keep);
    }
    for (auto title : kForbiddenTitles) {
      ok = ok && prefilter(std::string(title) + " one two three four five six seven eight nine ten",
                           Granularity::long_form()) == PrefilterVerdict::discard_titled;
    }
    out.push_back({"caption pre-filter thresholds and forbidden titles", ok, ""});
  }
  return out;
}

inline std::string format_check_table(const std::vector<CheckResult>& checks) {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS  " : "FAIL  ") << c.name;
    if (!c.detail.empty()) os << "  [" << c.detail << "]";
    os << "\n";
  }
  return os.str();
}

}  // namespace rolesynth
