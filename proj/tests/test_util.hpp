#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "matcomp/autodiff.hpp"
#include "matcomp/composition.hpp"
#include "matcomp/nn.hpp"

namespace matcomp::test {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(MATCOMP_FIXTURE_DIR) / name;
}

struct Fixture {
  std::string text;
  std::string tree;
};

inline std::vector<Fixture> grammar_fixtures() {
  std::ifstream in(fixture("grammar.tsv"));
  std::vector<Fixture> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

inline std::vector<std::string> corner_cases() {
  std::ifstream in(fixture("corner_cases.txt"));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "matcomp_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline nn::Matrix random_matrix(int r, int c, nn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

using LossFn = std::function<nn::Var(nn::Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
};

// Central differences over every entry of every parameter. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckResult grad_check(const std::vector<nn::Param*>& params, const LossFn& loss,
                                  double h = 1e-6, double floor = 1e-6) {
  for (auto* p : params) p->zero_grad();
  {
    nn::Tape tape;
    tape.backward(loss(tape));
  }
  GradCheckResult out;
  for (auto* p : params) {
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data[k];
      p->value.data[k] = saved + h;
      double up, down;
      {
        nn::Tape t;
        up = loss(t).scalar();
      }
      p->value.data[k] = saved - h;
      {
        nn::Tape t;
        down = loss(t).scalar();
      }
      p->value.data[k] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data[k];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = p->name + "[" + std::to_string(k) + "] analytic " + std::to_string(analytic) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return out;
}

// Random tree, its text rendering, and the expected shares computed independently.
struct FuzzCase {
  std::string text;
  std::map<std::string, double> expected;
  double top_sum = 0;
};

inline const std::vector<std::string> kFuzzPool = {"SiO2", "B2O3", "Na2O", "CaO",  "Al2O3", "P2O5",
                                                   "ZnO",  "Li2O", "TeO2", "AgI",  "AgCl",  "Bi2O3",
                                                   "PbO",  "MgO",  "K2O",  "BaO",  "SrO",   "GeO2"};

// Renders items at one level; returns the shares of each leaf when the level owns `share`.
inline std::string render_level(std::mt19937_64& rng, int depth, double share, std::map<std::string, double>& out,
                                std::vector<std::string>& used, double* level_sum) {
  const std::vector<std::string> seps = {"-", "+", " - ", "·", ":", ", ", "*", " – "};
  const int n = 2 + static_cast<int>(rng() % 3);
  std::vector<double> coefs;
  std::vector<int> group(n, 0);
  for (int k = 0; k < n; ++k) {
    coefs.push_back((1 + static_cast<double>(rng() % 900)) / 10.0);
    group[k] = depth < 1 && rng() % 4 == 0;
  }
  double total = 0;
  for (double c : coefs) total += c;
  if (level_sum) *level_sum = total;
  const std::string sep = seps[rng() % seps.size()];
  std::string text;
  for (int k = 0; k < n; ++k) {
    if (k) text += sep;
    const double part = share * coefs[k] / total;
    if (group[k]) {
      const bool square = rng() % 2;
      const std::string inner = render_level(rng, depth + 1, part, out, used, nullptr);
      const std::string body = std::string(square ? "[" : "(") + inner + (square ? "]" : ")");
      text += rng() % 2 ? body + format_number(coefs[k]) : format_number(coefs[k]) + body;
    } else {
      std::string c;
      do {
        c = kFuzzPool[rng() % kFuzzPool.size()];
      } while (std::find(used.begin(), used.end(), c) != used.end());
      used.push_back(c);
      out[c] += part;
      text += format_number(coefs[k]) + c;
    }
  }
  return text;
}

inline FuzzCase make_fuzz_case(std::mt19937_64& rng) {
  FuzzCase fc;
  std::vector<std::string> used;
  fc.text = render_level(rng, 0, 100.0, fc.expected, used, &fc.top_sum);
  return fc;
}

// Literal transcription of the four families over hard labels (labels as ints 0..3).
inline int brute_force_violations(const std::vector<int>& r, const std::vector<int>& c) {
  const int R = static_cast<int>(r.size()), C = static_cast<int>(c.size());
  int n = 0;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j)
      for (int l = 1; l <= 2; ++l) n += r[i] == l && c[j] == l;
  for (int a = 0; a < R; ++a)
    for (int b = 0; b < R; ++b) n += a != b && r[a] == 1 && r[b] == 3;
  for (int a = 0; a < C; ++a)
    for (int b = 0; b < C; ++b) n += a != b && c[a] == 1 && c[b] == 3;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j)
      for (int l = 2; l <= 3; ++l) n += r[i] == l && c[j] == 5 - l;
  for (int a = 0; a < R; ++a)
    for (int b = a + 1; b < R; ++b) n += r[a] == 3 && r[b] == 3;
  for (int a = 0; a < C; ++a)
    for (int b = a + 1; b < C; ++b) n += c[a] == 3 && c[b] == 3;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) n += r[i] == 3 && c[j] == 3;
  return n;
}

}  // namespace matcomp::test
