#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matgi/estimate.hpp"
#include "matgi/grammar.hpp"
#include "matgi/tree.hpp"

namespace matgi {

struct F1Result {
  std::size_t matched = 0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Corpus-level (micro-averaged) unlabelled bracket F1. A missing prediction
// counts its gold brackets only.
F1Result unlabelled_f1(std::span<const Tree> gold, std::span<const std::optional<Tree>> predicted,
                       bool include_root = true);

// Jensen-Shannon divergence in the given log base (base 2 bounds it by 1).
double jsd(std::span<const double> p, std::span<const double> q, double base = 2.0);

struct NtDivergence {
  std::string nt;
  double divergence = 0.0;
  // False when the induced grammar has no rules for nt yet; divergence is
  // then reported as 1.
  bool available = true;
};

struct JsdOptions {
  double base = 2.0;
  // Keep not-yet-available nonterminals out of the mean.
  bool exclude_unavailable = true;
  // Also score lhs symbols that only have lexicalisations.
  bool include_preterminals = false;
};

struct JsdReport {
  std::vector<NtDivergence> per_nt;
  double mean = 0.0;
  std::size_t averaged = 0;
  double base = 2.0;
};

// Compares each oracle nonterminal's expansion distribution with the induced
// grammar's, aligned by rule strings. `only` restricts the evaluated set.
JsdReport per_nt_jsd(const Grammar& oracle, const Grammar& induced,
                     const std::optional<std::vector<std::string>>& only = std::nullopt,
                     const JsdOptions& options = {});

struct LoglikRecord {
  std::size_t length = 0;
  double log_marginal = 0.0;
  bool scored = false;
};

struct LoglikReport {
  double mean = 0.0;  // NaN when nothing was scored
  std::size_t scored = 0;
  std::size_t skipped = 0;
  std::vector<LoglikRecord> records;
};

// Mean over parsable, in-lexicon sentences of ln P(sentence) / length.
LoglikReport mean_sentence_loglik(const Grammar& g, const Corpus& sentences);

enum class Alternative { a_greater, b_greater };

struct WilcoxonResult {
  std::size_t n = 0;         // non-tied pairs
  double statistic = 0.0;    // W+, rank sum of positive a - b
  double p_value = 1.0;      // one-sided
  double rank_biserial = 0.0;
  double median_difference = 0.0;
  bool exact = true;
};

inline constexpr std::size_t kWilcoxonExactLimit = 25;

// Paired one-sided signed-rank test on d = a - b. Exact null distribution
// (average ranks for ties) up to kWilcoxonExactLimit pairs, normal
// approximation with tie and continuity correction beyond.
WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs, Alternative alternative);

}  // namespace matgi
