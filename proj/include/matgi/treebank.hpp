#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "matgi/grammar.hpp"
#include "matgi/tree.hpp"

namespace matgi {

// Keeps trees whose yield is longer than min_len tokens.
std::vector<Tree> filter_sentences(std::span<const Tree> trees, std::size_t min_len);

struct RuleCount {
  std::string lhs;
  std::vector<std::string> rhs;
  bool lexical = false;
  std::size_t count = 0;
};

// Rule occurrences over a treebank, in order of first occurrence (pre-order).
struct RuleCounts {
  std::string root;
  std::vector<RuleCount> rules;
  std::map<std::string, std::size_t> lhs_totals;
  std::size_t vocabulary = 0;
};

RuleCounts count_rules(std::span<const Tree> trees);

inline constexpr double kExtractionPseudocount = 0.1;

// Relative-frequency PCFG from counts. Productions seen fewer than f_m times
// are dropped, as is any production left referring to a category with no
// surviving rules; lexicalisations are never pruned.
Grammar grammar_from_counts(const RuleCounts& counts, std::size_t f_m);

Grammar extract_pcfg(std::span<const Tree> trees, std::size_t f_m);

struct CoverageRow {
  std::size_t f_m = 0;
  std::size_t productions = 0;
  std::size_t lexicalisations = 0;
  double coverage = 0.0;
};

// Fraction of treebank sentences with at least one complete parse under the
// grammar pruned at each f_m.
std::vector<CoverageRow> coverage_sweep(std::span<const Tree> trees, std::span<const std::size_t> f_values);

std::string coverage_csv(std::span<const CoverageRow> rows);

struct Bracket {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;
  friend auto operator<=>(const Bracket&, const Bracket&) = default;
};

// Multiset of constituent spans of length >= 2 (preterminals excluded).
class BracketSet {
 public:
  void add(Bracket b) { ++counts_[std::move(b)]; }
  std::size_t size() const;
  bool empty() const noexcept { return counts_.empty(); }
  const std::map<Bracket, std::size_t>& labelled() const noexcept { return counts_; }
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> unlabelled() const;

 private:
  std::map<Bracket, std::size_t> counts_;
};

BracketSet tree_to_brackets(const Tree& t, bool include_root = true);

}  // namespace matgi
