#pragma once

// Fine-tuning hyperparameters for downstream trainers, as `key = value` lines.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "rolesynth/error.hpp"

namespace rolesynth {

struct TrainingConfigExport {
  int global_batch_size = 2048;
  int epochs = 6;
  double learning_rate = 1e-6;
  int warmup_steps = 200;
  std::string scheduler = "cosine";
  std::string optimizer = "AdamW";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 1e-2;
  int max_text_tokens = 248;

  bool operator==(const TrainingConfigExport&) const = default;
};

namespace detail {

/// Shortest round-trip text, with exponents written without padding ("1e-6").
inline std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  auto e = s.find('e');
  if (e != std::string::npos) {
    std::string mant = s.substr(0, e);
    std::string exp = s.substr(e + 1);
    std::string sign;
    if (!exp.empty() && (exp[0] == '-' || exp[0] == '+')) {
      if (exp[0] == '-') sign = "-";
      exp.erase(0, 1);
    }
    exp.erase(0, std::min(exp.find_first_not_of('0'), exp.size() - 1));
    s = mant + "e" + sign + exp;
  }
  return s;
}

}  // namespace detail

inline std::string serialize_training_config(const TrainingConfigExport& c) {
  using detail::format_real;
  std::ostringstream os;
  os << "# contrastive fine-tuning hyperparameters\n";
  os << "# format: one `key = value` per line; '#' starts a comment\n";
  os << "global_batch_size = " << c.global_batch_size << "\n";
  os << "epochs = " << c.epochs << "\n";
  os << "learning_rate = " << format_real(c.learning_rate) << "\n";
  os << "warmup_steps = " << c.warmup_steps << "\n";
  os << "scheduler = " << c.scheduler << "\n";
  os << "optimizer = " << c.optimizer << "\n";
  os << "adam_beta1 = " << format_real(c.adam_beta1) << "\n";
  os << "adam_beta2 = " << format_real(c.adam_beta2) << "\n";
  os << "adam_epsilon = " << format_real(c.adam_epsilon) << "\n";
  os << "weight_decay = " << format_real(c.weight_decay) << "\n";
  os << "max_text_tokens = " << c.max_text_tokens << "\n";
  return os.str();
}

inline TrainingConfigExport parse_training_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      auto f = s.find_first_not_of(" \t\r");
      auto l = s.find_last_not_of(" \t\r");
      return f == std::string::npos ? std::string() : s.substr(f, l - f + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("missing key '") + key + "'");
    return it->second;
  };
  auto real = [&](const char* key) {
    const auto& s = get(key);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(std::string("bad number for ") + key);
    return v;
  };
  auto integer = [&](const char* key) {
    const auto& s = get(key);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(std::string("bad integer for ") + key);
    return v;
  };
  TrainingConfigExport c;
  c.global_batch_size = integer("global_batch_size");
  c.epochs = integer("epochs");
  c.learning_rate = real("learning_rate");
  c.warmup_steps = integer("warmup_steps");
  c.scheduler = get("scheduler");
  c.optimizer = get("optimizer");
  c.adam_beta1 = real("adam_beta1");
  c.adam_beta2 = real("adam_beta2");
  c.adam_epsilon = real("adam_epsilon");
  c.weight_decay = real("weight_decay");
  c.max_text_tokens = integer("max_text_tokens");
  return c;
}

inline void export_training_config(const std::string& path,
                                   const TrainingConfigExport& c = TrainingConfigExport{}) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << serialize_training_config(c);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace rolesynth
