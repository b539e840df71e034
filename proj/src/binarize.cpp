#include "matgi/binarize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "matgi/error.hpp"

namespace matgi {

namespace {

double log_of(double w) { return w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity(); }

}  // namespace

std::vector<std::string> BinarizedGrammar::intermediates() const {
  return {nt_names_.begin() + base_nts_, nt_names_.end()};
}

std::span<const std::size_t> BinarizedGrammar::lexical_for(SymbolId terminal) const {
  if (terminal >= lexical_by_terminal_.size()) return {};
  return lexical_by_terminal_[terminal];
}

void BinarizedGrammar::assign_weights(std::span<const double> weights) {
  if (weights.size() != base_->size()) throw GrammarError("weight vector size does not match rule count");
  for (auto& r : binary_) r.log_weight = r.chain_internal ? 0.0 : log_of(weights[r.origin]);
  for (auto& r : unary_) r.log_weight = log_of(weights[r.origin]);
  for (auto& r : lexical_) r.log_weight = log_of(weights[r.origin]);
}

BinarizedGrammar BinarizedGrammar::with_weights(std::span<const double> weights) const {
  BinarizedGrammar out = *this;
  out.assign_weights(weights);
  return out;
}

BinarizedGrammar binarize(const Grammar& g) {
  if (g.empty()) throw GrammarError("cannot binarize an empty grammar");
  if (auto cycles = unary_cycles(g); !cycles.empty()) {
    std::string names;
    for (SymbolId s : cycles.front()) names += (names.empty() ? "" : ", ") + g.name(s);
    throw GrammarError("unary cycle among nonterminals {" + names + "}");
  }

  BinarizedGrammar b;
  b.base_ = std::make_shared<const Grammar>(g);
  const auto& table = g.symbols();
  b.nt_of_symbol_.assign(table.size(), kNoNt);
  for (SymbolId s : g.nonterminals()) {
    b.nt_of_symbol_[s] = static_cast<NtIndex>(b.nt_names_.size());
    b.nt_names_.push_back(table.name(s));
    b.symbol_of_nt_.push_back(s);
  }
  b.base_nts_ = static_cast<NtIndex>(b.nt_names_.size());
  b.start_ = b.nt_of_symbol_[g.start()];

  std::unordered_map<std::string, NtIndex> chain_symbols;
  auto chain_symbol = [&](const Rule& r, std::size_t from, RuleIndex origin) -> std::pair<NtIndex, bool> {
    std::string name = table.name(r.lhs) + "|";
    for (std::size_t k = from; k < r.rhs.size(); ++k) {
      if (k > from) name += '.';
      name += table.name(r.rhs[k]);
    }
    if (auto it = chain_symbols.find(name); it != chain_symbols.end()) {
      b.chain_origins_[it->second - b.base_nts_].push_back(origin);
      return {it->second, false};
    }
    if (table.find(name)) throw GrammarError("intermediate symbol '" + name + "' collides with a grammar symbol");
    auto id = static_cast<NtIndex>(b.nt_names_.size());
    b.nt_names_.push_back(name);
    b.symbol_of_nt_.push_back(static_cast<SymbolId>(-1));
    b.chain_origins_.push_back({origin});
    chain_symbols.emplace(std::move(name), id);
    return {id, true};
  };

  for (RuleIndex i = 0; i < g.size(); ++i) {
    const auto& r = g.rule(i).rule;
    NtIndex parent = b.nt_of_symbol_[r.lhs];
    if (r.kind == RuleKind::lexicalisation) {
      b.lexical_.push_back({parent, r.rhs[0], 0.0, i});
      continue;
    }
    if (r.rhs.size() == 1) {
      b.unary_.push_back({parent, b.nt_of_symbol_[r.rhs[0]], 0.0, i});
      continue;
    }
    if (r.rhs.size() == 2) {
      b.binary_.push_back({parent, b.nt_of_symbol_[r.rhs[0]], b.nt_of_symbol_[r.rhs[1]], 0.0, i, false});
      continue;
    }
    // Right-branching chain: A -> x1 A|x2..xn, A|x2..xn -> x2 A|x3..xn, ...
    // Chains with a common suffix share their tail links.
    NtIndex current = parent;
    bool emitting = true;
    const std::size_t n = r.rhs.size();
    for (std::size_t k = 0; k + 2 < n; ++k) {
      auto [rest, fresh] = chain_symbol(r, k + 1, i);
      if (emitting) b.binary_.push_back({current, b.nt_of_symbol_[r.rhs[k]], rest, 0.0, i, k > 0});
      emitting = emitting && fresh;
      current = rest;
    }
    if (emitting)
      b.binary_.push_back({current, b.nt_of_symbol_[r.rhs[n - 2]], b.nt_of_symbol_[r.rhs[n - 1]], 0.0, i, true});
  }

  b.by_left_.assign(b.nt_names_.size(), {});
  for (std::size_t i = 0; i < b.binary_.size(); ++i) b.by_left_[b.binary_[i].left].push_back(i);

  b.lexical_by_terminal_.assign(table.size(), {});
  for (std::size_t i = 0; i < b.lexical_.size(); ++i) b.lexical_by_terminal_[b.lexical_[i].terminal].push_back(i);

  // Post-order ranks over the unary graph; acyclic, so a child is always
  // ranked before its parents.
  const std::size_t n_nt = b.nt_names_.size();
  std::vector<std::vector<NtIndex>> children(n_nt);
  for (const auto& u : b.unary_) children[u.parent].push_back(u.child);
  std::vector<int> rank(n_nt, -1);
  int next_rank = 0;
  for (NtIndex root = 0; root < n_nt; ++root) {
    if (rank[root] != -1) continue;
    std::vector<std::pair<NtIndex, std::size_t>> work{{root, 0}};
    while (!work.empty()) {
      auto& [v, k] = work.back();
      if (k < children[v].size()) {
        NtIndex c = children[v][k++];
        if (rank[c] == -1) work.emplace_back(c, 0);
        continue;
      }
      rank[v] = next_rank++;
      work.pop_back();
    }
  }
  b.unary_order_.resize(b.unary_.size());
  for (std::size_t i = 0; i < b.unary_.size(); ++i) b.unary_order_[i] = i;
  std::stable_sort(b.unary_order_.begin(), b.unary_order_.end(),
                   [&](std::size_t x, std::size_t y) { return rank[b.unary_[x].parent] < rank[b.unary_[y].parent]; });

  b.assign_weights(g.weights());
  return b;
}

}  // namespace matgi
