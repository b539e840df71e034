#pragma once

// Test-only helpers: random grammars, derivation sampling and brute-force
// oracles that share no code with the chart module.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "matgi/grammar.hpp"

namespace matgi::testing {

inline const char* kTenRulePcfg =
    "0.1 0.8 S --> NP VP\n"
    "0.1 0.2 S --> VP\n"
    "0.1 0.6 VP --> V NP\n"
    "0.1 0.4 VP --> V\n"
    "0.1 0.7 NP --> N\n"
    "0.1 0.3 NP --> NP NP\n"
    "0.1 0.5 N --> dog\n"
    "0.1 0.5 N --> cat\n"
    "0.1 0.5 V --> sees\n"
    "0.1 0.5 V --> barks\n";

// Every sentence of this grammar has exactly one parse.
inline const char* kUnambiguousPcfg =
    "0.1 0.6 S --> NP VP\n"
    "0.1 0.4 S --> VP\n"
    "0.1 0.5 NP --> D N\n"
    "0.1 0.5 NP --> P\n"
    "0.1 0.7 VP --> V NP\n"
    "0.1 0.3 VP --> V\n"
    "0.1 0.5 D --> the\n"
    "0.1 0.5 D --> a\n"
    "0.1 0.5 N --> dog\n"
    "0.1 0.5 N --> cat\n"
    "0.1 1 P --> you\n"
    "0.1 0.5 V --> sees\n"
    "0.1 0.5 V --> runs\n";

// Random normalized grammar over nonterminals S, A, B, C and terminals
// a, b, c with at most max_rules rules. Unary productions only point to
// later nonterminals, so the unary graph is acyclic.
inline Grammar random_grammar(std::mt19937_64& rng, std::size_t max_rules = 20) {
  static const std::vector<std::string> nts = {"S", "A", "B", "C"};
  static const std::vector<std::string> terms = {"a", "b", "c"};
  std::uniform_int_distribution<std::size_t> nt_count(1, nts.size());
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  const std::size_t k = nt_count(rng);

  std::vector<std::tuple<std::string, std::vector<std::string>>> rules;
  auto has = [&](const std::string& lhs, const std::vector<std::string>& rhs) {
    return std::any_of(rules.begin(), rules.end(), [&](const auto& r) {
      return std::get<0>(r) == lhs && std::get<1>(r) == rhs;
    });
  };
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::string> shuffled = terms;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t lex = 1 + rng() % 2;
    for (std::size_t t = 0; t < lex; ++t) rules.emplace_back(nts[i], std::vector<std::string>{shuffled[t]});
  }
  std::uniform_int_distribution<std::size_t> target_dist(rules.size() + 1, max_rules);
  const std::size_t target = std::max(rules.size(), target_dist(rng));
  for (int attempt = 0; attempt < 200 && rules.size() < target; ++attempt) {
    std::size_t lhs = rng() % k;
    double shape = std::uniform_real_distribution<double>(0, 1)(rng);
    std::vector<std::string> rhs;
    if (shape < 0.25) {
      if (lhs + 1 >= k) continue;
      rhs.push_back(nts[lhs + 1 + rng() % (k - lhs - 1)]);
    } else {
      std::size_t len = shape < 0.8 ? 2 : 3;
      for (std::size_t j = 0; j < len; ++j) rhs.push_back(nts[rng() % k]);
    }
    if (has(nts[lhs], rhs)) continue;
    rules.emplace_back(nts[lhs], rhs);
  }
  GrammarBuilder b;
  b.set_start("S");
  for (const auto& [lhs, rhs] : rules) b.add_rule(lhs, rhs, weight(rng), 0.1);
  return normalize(std::move(b).build());
}

// Top-down derivation sample; nullopt when it grows beyond max_len tokens.
inline std::optional<std::vector<std::string>> sample_sentence(const Grammar& g, std::mt19937_64& rng,
                                                               std::size_t max_len) {
  std::vector<std::string> out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<SymbolId, int>> stack{{g.start(), 0}};
  while (!stack.empty()) {
    auto [sym, depth] = stack.back();
    stack.pop_back();
    if (!g.is_nonterminal(sym)) {
      out.push_back(g.name(sym));
      if (out.size() > max_len) return std::nullopt;
      continue;
    }
    if (depth > 60) return std::nullopt;
    auto rules = g.rules_for(sym);
    double r = u(rng), acc = 0.0;
    RuleIndex chosen = rules.back();
    for (RuleIndex i : rules) {
      acc += g.rule(i).weight;
      if (r < acc) {
        chosen = i;
        break;
      }
    }
    const auto& rhs = g.rule(chosen).rule.rhs;
    for (auto it = rhs.rbegin(); it != rhs.rend(); ++it) stack.emplace_back(*it, depth + 1);
    if (stack.size() > 4 * max_len + 8) return std::nullopt;
  }
  return out;
}

inline std::vector<std::vector<std::string>> sample_corpus(const Grammar& g, std::mt19937_64& rng, std::size_t n,
                                                           std::size_t max_len) {
  std::vector<std::vector<std::string>> corpus;
  while (corpus.size() < n)
    if (auto s = sample_sentence(g, rng, max_len)) corpus.push_back(std::move(*s));
  return corpus;
}

// Linear-domain total and best derivation probability of a sentence, by
// memoized recursion over the unbinarized rules. Needs an acyclic unary graph.
struct BruteScore {
  double total = 0.0;
  double best = 0.0;
};

inline BruteScore brute_force_score(const Grammar& g, const std::vector<std::string>& tokens) {
  const std::size_t n = tokens.size();
  std::map<std::tuple<SymbolId, std::size_t, std::size_t>, BruteScore> memo;
  std::function<BruteScore(SymbolId, std::size_t, std::size_t)> span;
  std::function<BruteScore(const std::vector<SymbolId>&, std::size_t, std::size_t, std::size_t)> seq;

  span = [&](SymbolId x, std::size_t i, std::size_t j) -> BruteScore {
    if (!g.is_nonterminal(x)) {
      double v = (j == i + 1 && g.name(x) == tokens[i]) ? 1.0 : 0.0;
      return {v, v};
    }
    auto key = std::make_tuple(x, i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    BruteScore s;
    for (RuleIndex r : g.rules_for(x)) {
      const auto& wr = g.rule(r);
      auto child = seq(wr.rule.rhs, 0, i, j);
      s.total += wr.weight * child.total;
      s.best = std::max(s.best, wr.weight * child.best);
    }
    memo[key] = s;
    return s;
  };
  // Ways for rhs[pos..] to cover [i, j) with nonempty pieces.
  seq = [&](const std::vector<SymbolId>& rhs, std::size_t pos, std::size_t i, std::size_t j) -> BruteScore {
    const std::size_t left = rhs.size() - pos;
    if (left == 1) return span(rhs[pos], i, j);
    BruteScore s;
    for (std::size_t k = i + 1; k + (left - 1) <= j; ++k) {
      auto head = span(rhs[pos], i, k);
      if (head.total == 0.0) continue;
      auto tail = seq(rhs, pos + 1, k, j);
      s.total += head.total * tail.total;
      s.best = std::max(s.best, head.best * tail.best);
    }
    return s;
  };
  return span(g.start(), 0, n);
}

// One-sided signed-rank p-value by enumerating all 2^n sign assignments over
// the average ranks of the non-zero differences.
inline double wilcoxon_exhaustive(const std::vector<std::pair<double, double>>& pairs, bool a_greater) {
  std::vector<double> d;
  for (auto [a, b] : pairs)
    if (a - b != 0.0) d.push_back(a - b);
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return std::abs(d[x]) < std::abs(d[y]); });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) observed += rank[i];
  std::uint64_t hits = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) w += rank[i];
    if (a_greater ? w >= observed : w <= observed) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace matgi::testing
