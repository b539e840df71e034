#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace matgi {

using SymbolId = std::uint32_t;
using RuleIndex = std::size_t;

// Interned symbol strings with dense 0-based ids.
class SymbolTable {
 public:
  SymbolId intern(std::string_view name);
  std::optional<SymbolId> find(std::string_view name) const;
  const std::string& name(SymbolId id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, SymbolId> ids_;
};

enum class RuleKind { production, lexicalisation };

struct Rule {
  SymbolId lhs = 0;
  std::vector<SymbolId> rhs;
  RuleKind kind = RuleKind::production;
};

struct WeightedRule {
  Rule rule;
  double weight = 0.0;
  double pseudocount = 0.1;
};

class GrammarBuilder;

// A PCFG: symbol table, weighted rules carrying Dirichlet pseudocounts, and a
// start symbol. Immutable once built; use the with_* helpers to derive
// re-weighted copies.
class Grammar {
 public:
  Grammar() = default;

  const SymbolTable& symbols() const noexcept { return table_; }
  const std::string& name(SymbolId id) const { return table_.name(id); }
  std::span<const WeightedRule> rules() const noexcept { return rules_; }
  const WeightedRule& rule(RuleIndex i) const { return rules_.at(i); }
  std::size_t size() const noexcept { return rules_.size(); }
  bool empty() const noexcept { return rules_.empty(); }
  SymbolId start() const noexcept { return start_; }

  bool is_nonterminal(SymbolId id) const { return id < nonterminal_.size() && nonterminal_[id]; }
  // Rules with the given lhs, in rule order. Empty for terminals.
  std::span<const RuleIndex> rules_for(SymbolId lhs) const;
  std::vector<SymbolId> nonterminals() const;
  std::vector<SymbolId> terminals() const;

  std::size_t production_count() const;
  std::size_t lexicalisation_count() const;

  std::optional<RuleIndex> find_rule(SymbolId lhs, std::span<const SymbolId> rhs) const;
  std::optional<RuleIndex> find_rule(std::string_view lhs, const std::vector<std::string>& rhs) const;

  // "LHS --> RHS1 RHS2"
  std::string rule_string(RuleIndex i) const;

  std::vector<double> weights() const;
  std::vector<double> pseudocounts() const;
  Grammar with_weights(std::span<const double> weights) const;
  Grammar with_pseudocounts(std::span<const double> pseudocounts) const;

  // Sub-grammar over the listed rules (kept in the given order). The symbol
  // table and the nonterminal classification of this grammar are retained, so
  // rule kinds never change under restriction.
  Grammar restricted_to(std::span<const RuleIndex> indices) const;

  // Deep equality by symbol strings, rule order, weights and pseudocounts.
  friend bool operator==(const Grammar& a, const Grammar& b);

 private:
  friend class GrammarBuilder;
  void index();

  SymbolTable table_;
  std::vector<WeightedRule> rules_;
  std::vector<bool> nonterminal_;
  std::vector<std::vector<RuleIndex>> by_lhs_;
  std::unordered_map<std::string, RuleIndex> rule_keys_;
  SymbolId start_ = 0;
};

class GrammarBuilder {
 public:
  void set_start(std::string_view symbol);
  // line is only used for error reporting (0 = unknown).
  void add_rule(std::string_view lhs, const std::vector<std::string>& rhs, double weight,
                double pseudocount, std::size_t line = 0);
  std::size_t size() const noexcept { return pending_.size(); }
  // Classifies symbols (nonterminal iff it is some rule's lhs), assigns rule
  // kinds and checks the grammar invariants.
  Grammar build() &&;

 private:
  struct Pending {
    SymbolId lhs;
    std::vector<SymbolId> rhs;
    double weight;
    double pseudocount;
    std::size_t line;
  };
  SymbolTable table_;
  std::vector<Pending> pending_;
  std::unordered_map<std::string, std::size_t> keys_;
  std::optional<SymbolId> start_;
};

Grammar parse_grammar_file(std::string_view text);
std::string write_grammar_file(const Grammar& g);

// Per-lhs renormalization. An lhs whose weights already sum to 1 within
// rounding is left untouched, which makes normalize idempotent bit-for-bit.
Grammar normalize(const Grammar& g);

// Uniform 1/|rules(A)| weights for every lhs A.
Grammar uniform_weights(const Grammar& g);

struct Diagnostics {
  std::vector<SymbolId> unreachable;
  std::vector<SymbolId> no_lexical_yield;
  std::vector<std::vector<SymbolId>> unary_cycles;
  std::vector<std::pair<SymbolId, double>> bad_weight_sums;

  bool empty() const {
    return unreachable.empty() && no_lexical_yield.empty() && unary_cycles.empty() &&
           bad_weight_sums.empty();
  }
};

Diagnostics validate(const Grammar& g);
std::string describe(const Grammar& g, const Diagnostics& d);

// Strongly connected components of the unary production graph that form
// cycles (size > 1, or a self loop).
std::vector<std::vector<SymbolId>> unary_cycles(const Grammar& g);

}  // namespace matgi
