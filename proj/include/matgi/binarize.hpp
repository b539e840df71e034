#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "matgi/grammar.hpp"

namespace matgi {

// Dense index over the nonterminals of a binarized grammar: base grammar
// nonterminals first (in symbol-id order), then intermediate chain symbols.
using NtIndex = std::uint32_t;
inline constexpr NtIndex kNoNt = static_cast<NtIndex>(-1);

struct BinaryRule {
  NtIndex parent;
  NtIndex left;
  NtIndex right;
  double log_weight;
  // Originating rule. For chain-internal rules this is the first rule whose
  // chain created them; see intermediate_origins() for the full set.
  RuleIndex origin;
  bool chain_internal;
};

struct UnaryRule {
  NtIndex parent;
  NtIndex child;
  double log_weight;
  RuleIndex origin;
};

struct LexicalRule {
  NtIndex parent;
  SymbolId terminal;
  double log_weight;
  RuleIndex origin;
};

// CYK-ready form of a Grammar. Productions longer than two symbols become
// right-branching chains through intermediate symbols named "A|B.C"; the
// chain head carries the original weight and the remaining links weight 1.
class BinarizedGrammar {
 public:
  const Grammar& base() const noexcept { return *base_; }
  NtIndex nonterminal_count() const noexcept { return static_cast<NtIndex>(nt_names_.size()); }
  NtIndex base_nonterminal_count() const noexcept { return base_nts_; }
  NtIndex start() const noexcept { return start_; }
  bool is_intermediate(NtIndex a) const noexcept { return a >= base_nts_; }
  const std::string& nt_name(NtIndex a) const { return nt_names_.at(a); }
  NtIndex nt_of(SymbolId s) const { return s < nt_of_symbol_.size() ? nt_of_symbol_[s] : kNoNt; }
  SymbolId symbol_of(NtIndex a) const { return symbol_of_nt_.at(a); }

  std::span<const BinaryRule> binary() const noexcept { return binary_; }
  std::span<const UnaryRule> unary() const noexcept { return unary_; }
  std::span<const LexicalRule> lexical() const noexcept { return lexical_; }

  // Intermediate symbol names (registry), in creation order.
  std::vector<std::string> intermediates() const;
  // Every original rule whose chain passes through intermediate symbol a.
  std::span<const RuleIndex> intermediate_origins(NtIndex a) const { return chain_origins_.at(a - base_nts_); }

  // Indices into binary() whose left child is a.
  std::span<const std::size_t> binary_by_left(NtIndex a) const { return by_left_[a]; }
  // Indices into unary() ordered so that every child is final before any
  // parent reads it (children first).
  std::span<const std::size_t> unary_bottom_up() const noexcept { return unary_order_; }
  // Indices into lexical() for a terminal symbol of the base grammar.
  std::span<const std::size_t> lexical_for(SymbolId terminal) const;

  // Same structure with log weights recomputed from per-original-rule
  // weights (indexed like base().rules()).
  BinarizedGrammar with_weights(std::span<const double> weights) const;

 private:
  friend BinarizedGrammar binarize(const Grammar& g);
  void assign_weights(std::span<const double> weights);

  std::shared_ptr<const Grammar> base_;
  NtIndex base_nts_ = 0;
  NtIndex start_ = 0;
  std::vector<std::string> nt_names_;
  std::vector<NtIndex> nt_of_symbol_;
  std::vector<SymbolId> symbol_of_nt_;
  std::vector<std::vector<RuleIndex>> chain_origins_;
  std::vector<BinaryRule> binary_;
  std::vector<UnaryRule> unary_;
  std::vector<LexicalRule> lexical_;
  std::vector<std::vector<std::size_t>> by_left_;
  std::vector<std::size_t> unary_order_;
  std::vector<std::vector<std::size_t>> lexical_by_terminal_;
};

// Throws GrammarError naming the cycle if the unary production graph is cyclic.
BinarizedGrammar binarize(const Grammar& g);

}  // namespace matgi
