#include "matgi/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "matgi/error.hpp"
#include "matgi/text.hpp"

namespace matgi {

namespace {

constexpr std::string_view kArrow = "-->";

std::string rule_key(SymbolId lhs, std::span<const SymbolId> rhs) {
  std::string key;
  key.reserve(4 * (rhs.size() + 1));
  auto put = [&key](SymbolId id) {
    for (int shift = 0; shift < 32; shift += 8) key.push_back(static_cast<char>((id >> shift) & 0xff));
  };
  put(lhs);
  for (SymbolId s : rhs) put(s);
  return key;
}

bool near_one(double sum, std::size_t n) {
  double tol = 1e-12 + 4.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  return std::abs(sum - 1.0) <= tol;
}

}  // namespace

SymbolId SymbolTable::intern(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  auto id = static_cast<SymbolId>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<SymbolId> SymbolTable::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

std::span<const RuleIndex> Grammar::rules_for(SymbolId lhs) const {
  if (lhs >= by_lhs_.size()) return {};
  return by_lhs_[lhs];
}

std::vector<SymbolId> Grammar::nonterminals() const {
  std::vector<SymbolId> out;
  for (SymbolId id = 0; id < table_.size(); ++id)
    if (is_nonterminal(id)) out.push_back(id);
  return out;
}

std::vector<SymbolId> Grammar::terminals() const {
  std::vector<SymbolId> out;
  for (SymbolId id = 0; id < table_.size(); ++id)
    if (!is_nonterminal(id)) out.push_back(id);
  return out;
}

std::size_t Grammar::production_count() const {
  return static_cast<std::size_t>(std::count_if(rules_.begin(), rules_.end(), [](const WeightedRule& r) {
    return r.rule.kind == RuleKind::production;
  }));
}

std::size_t Grammar::lexicalisation_count() const { return rules_.size() - production_count(); }

std::optional<RuleIndex> Grammar::find_rule(SymbolId lhs, std::span<const SymbolId> rhs) const {
  auto it = rule_keys_.find(rule_key(lhs, rhs));
  if (it == rule_keys_.end()) return std::nullopt;
  return it->second;
}

std::optional<RuleIndex> Grammar::find_rule(std::string_view lhs, const std::vector<std::string>& rhs) const {
  auto l = table_.find(lhs);
  if (!l) return std::nullopt;
  std::vector<SymbolId> ids;
  for (const auto& s : rhs) {
    auto id = table_.find(s);
    if (!id) return std::nullopt;
    ids.push_back(*id);
  }
  return find_rule(*l, ids);
}

std::string Grammar::rule_string(RuleIndex i) const {
  const auto& r = rules_.at(i).rule;
  std::string out = table_.name(r.lhs);
  out += " -->";
  for (SymbolId s : r.rhs) {
    out += ' ';
    out += table_.name(s);
  }
  return out;
}

std::vector<double> Grammar::weights() const {
  std::vector<double> out;
  out.reserve(rules_.size());
  for (const auto& r : rules_) out.push_back(r.weight);
  return out;
}

std::vector<double> Grammar::pseudocounts() const {
  std::vector<double> out;
  out.reserve(rules_.size());
  for (const auto& r : rules_) out.push_back(r.pseudocount);
  return out;
}

Grammar Grammar::with_weights(std::span<const double> weights) const {
  if (weights.size() != rules_.size()) throw GrammarError("weight vector size does not match rule count");
  Grammar g = *this;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw GrammarError("invalid weight for rule '" + rule_string(i) + "'");
    g.rules_[i].weight = weights[i];
  }
  return g;
}

Grammar Grammar::with_pseudocounts(std::span<const double> pseudocounts) const {
  if (pseudocounts.size() != rules_.size())
    throw GrammarError("pseudocount vector size does not match rule count");
  Grammar g = *this;
  for (std::size_t i = 0; i < pseudocounts.size(); ++i) {
    if (!(pseudocounts[i] > 0.0) || !std::isfinite(pseudocounts[i]))
      throw GrammarError("nonpositive pseudocount for rule '" + rule_string(i) + "'");
    g.rules_[i].pseudocount = pseudocounts[i];
  }
  return g;
}

Grammar Grammar::restricted_to(std::span<const RuleIndex> indices) const {
  Grammar g;
  g.table_ = table_;
  g.nonterminal_ = nonterminal_;
  g.start_ = start_;
  g.rules_.reserve(indices.size());
  for (RuleIndex i : indices) g.rules_.push_back(rules_.at(i));
  g.index();
  if (g.rule_keys_.size() != g.rules_.size()) throw GrammarError("restricted_to: duplicate rule index");
  return g;
}

void Grammar::index() {
  by_lhs_.assign(table_.size(), {});
  rule_keys_.clear();
  for (RuleIndex i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i].rule;
    by_lhs_[r.lhs].push_back(i);
    rule_keys_.emplace(rule_key(r.lhs, r.rhs), i);
  }
}

bool operator==(const Grammar& a, const Grammar& b) {
  if (a.rules_.size() != b.rules_.size()) return false;
  if (a.empty()) return b.empty();
  if (a.name(a.start_) != b.name(b.start_)) return false;
  for (std::size_t i = 0; i < a.rules_.size(); ++i) {
    const auto& ra = a.rules_[i];
    const auto& rb = b.rules_[i];
    if (ra.weight != rb.weight || ra.pseudocount != rb.pseudocount) return false;
    if (ra.rule.kind != rb.rule.kind || ra.rule.rhs.size() != rb.rule.rhs.size()) return false;
    if (a.name(ra.rule.lhs) != b.name(rb.rule.lhs)) return false;
    for (std::size_t k = 0; k < ra.rule.rhs.size(); ++k)
      if (a.name(ra.rule.rhs[k]) != b.name(rb.rule.rhs[k])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

void GrammarBuilder::set_start(std::string_view symbol) { start_ = table_.intern(symbol); }

void GrammarBuilder::add_rule(std::string_view lhs, const std::vector<std::string>& rhs, double weight,
                              double pseudocount, std::size_t line) {
  auto where = [&](const std::string& msg) -> std::string {
    return msg + " in rule '" + std::string(lhs) + " --> " + join(rhs, " ") + "'";
  };
  if (rhs.empty()) throw ParseError(line, where("empty right-hand side"));
  if (!(pseudocount > 0.0) || !std::isfinite(pseudocount))
    throw ParseError(line, where("nonpositive pseudocount"));
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw ParseError(line, where("negative or non-finite weight"));
  Pending p{table_.intern(lhs), {}, weight, pseudocount, line};
  for (const auto& s : rhs) p.rhs.push_back(table_.intern(s));
  auto key = rule_key(p.lhs, p.rhs);
  if (!keys_.emplace(key, pending_.size()).second) throw ParseError(line, where("duplicate rule"));
  pending_.push_back(std::move(p));
}

Grammar GrammarBuilder::build() && {
  if (pending_.empty()) throw ParseError(0, "grammar has no rules");
  Grammar g;
  g.table_ = std::move(table_);
  g.nonterminal_.assign(g.table_.size(), false);
  for (const auto& p : pending_) g.nonterminal_[p.lhs] = true;
  g.start_ = start_.value_or(pending_.front().lhs);
  if (!g.nonterminal_[g.start_])
    throw ParseError(0, "start symbol '" + g.table_.name(g.start_) + "' has no rules");
  g.rules_.reserve(pending_.size());
  for (auto& p : pending_) {
    RuleKind kind;
    if (p.rhs.size() == 1 && !g.nonterminal_[p.rhs[0]]) {
      kind = RuleKind::lexicalisation;
    } else {
      for (SymbolId s : p.rhs) {
        if (!g.nonterminal_[s])
          throw ParseError(p.line, "rule for '" + g.table_.name(p.lhs) + "' mixes terminal '" + g.table_.name(s) +
                                       "' with other right-hand-side symbols");
      }
      kind = RuleKind::production;
    }
    g.rules_.push_back(WeightedRule{Rule{p.lhs, std::move(p.rhs), kind}, p.weight, p.pseudocount});
  }
  g.index();
  return g;
}

// ---------------------------------------------------------------------------

Grammar parse_grammar_file(std::string_view text) {
  GrammarBuilder builder;
  bool seen_content = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = split_whitespace(body);
    if (fields.front() == "%start") {
      if (seen_content) throw ParseError(line_no, "%start must be the first non-comment line");
      if (fields.size() != 2) throw ParseError(line_no, "%start takes exactly one symbol");
      builder.set_start(fields[1]);
      seen_content = true;
      continue;
    }
    seen_content = true;
    if (fields.size() < 5 || fields[3] != kArrow)
      throw ParseError(line_no, "expected '<pseudocount> <weight> <LHS> --> <RHS...>'");
    double pseudocount = 0.0, weight = 0.0;
    if (!parse_double(fields[0], pseudocount)) throw ParseError(line_no, "bad pseudocount '" + fields[0] + "'");
    if (!parse_double(fields[1], weight)) throw ParseError(line_no, "bad weight '" + fields[1] + "'");
    if (fields[2] == kArrow) throw ParseError(line_no, "missing left-hand side");
    std::vector<std::string> rhs(fields.begin() + 4, fields.end());
    for (const auto& s : rhs)
      if (s == kArrow) throw ParseError(line_no, "'-->' cannot be used as a symbol");
    builder.add_rule(fields[2], rhs, weight, pseudocount, line_no);
  }
  if (builder.size() == 0) throw ParseError(0, "grammar has no rules");
  return std::move(builder).build();
}

std::string write_grammar_file(const Grammar& g) {
  if (g.empty()) throw GrammarError("cannot write an empty grammar");
  std::string out = "%start " + g.name(g.start()) + "\n";
  for (RuleIndex i = 0; i < g.size(); ++i) {
    const auto& r = g.rule(i);
    out += format_double(r.pseudocount);
    out += ' ';
    out += format_double(r.weight);
    out += ' ';
    out += g.rule_string(i);
    out += '\n';
  }
  return out;
}

Grammar normalize(const Grammar& g) {
  std::vector<double> w = g.weights();
  for (SymbolId a : g.nonterminals()) {
    auto rules = g.rules_for(a);
    if (rules.empty()) continue;
    double sum = 0.0;
    for (RuleIndex i : rules) sum += w[i];
    if (sum <= 0.0) throw GrammarError("weights of '" + g.name(a) + "' sum to zero");
    if (near_one(sum, rules.size())) continue;
    for (RuleIndex i : rules) w[i] /= sum;
  }
  return g.with_weights(w);
}

Grammar uniform_weights(const Grammar& g) {
  std::vector<double> w(g.size(), 0.0);
  for (SymbolId a : g.nonterminals()) {
    auto rules = g.rules_for(a);
    for (RuleIndex i : rules) w[i] = 1.0 / static_cast<double>(rules.size());
  }
  return g.with_weights(w);
}

std::vector<std::vector<SymbolId>> unary_cycles(const Grammar& g) {
  const std::size_t n = g.symbols().size();
  std::vector<std::vector<SymbolId>> edges(n);
  std::vector<bool> self_loop(n, false);
  for (const auto& wr : g.rules()) {
    const auto& r = wr.rule;
    if (r.kind == RuleKind::production && r.rhs.size() == 1) {
      edges[r.lhs].push_back(r.rhs[0]);
      if (r.rhs[0] == r.lhs) self_loop[r.lhs] = true;
    }
  }
  // Tarjan's SCC, iterative.
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<SymbolId> stack;
  std::vector<std::vector<SymbolId>> cycles;
  int counter = 0;
  for (SymbolId root = 0; root < n; ++root) {
    if (index[root] != -1 || edges[root].empty()) continue;
    std::vector<std::pair<SymbolId, std::size_t>> work{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!work.empty()) {
      auto& [v, next] = work.back();
      if (next < edges[v].size()) {
        SymbolId w = edges[v][next++];
        if (index[w] == -1) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          work.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      SymbolId done = v;
      work.pop_back();
      if (!work.empty()) low[work.back().first] = std::min(low[work.back().first], low[done]);
      if (low[done] == index[done]) {
        std::vector<SymbolId> scc;
        SymbolId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          scc.push_back(w);
        } while (w != done);
        if (scc.size() > 1 || self_loop[done]) {
          std::sort(scc.begin(), scc.end());
          cycles.push_back(std::move(scc));
        }
      }
    }
  }
  std::sort(cycles.begin(), cycles.end());
  return cycles;
}

Diagnostics validate(const Grammar& g) {
  Diagnostics d;
  if (g.empty()) return d;
  const std::size_t n = g.symbols().size();

  std::vector<bool> reached(n, false);
  std::vector<SymbolId> frontier{g.start()};
  reached[g.start()] = true;
  while (!frontier.empty()) {
    SymbolId a = frontier.back();
    frontier.pop_back();
    for (RuleIndex i : g.rules_for(a))
      for (SymbolId s : g.rule(i).rule.rhs)
        if (!reached[s]) {
          reached[s] = true;
          frontier.push_back(s);
        }
  }

  // Least fixed point of "can derive some terminal string".
  std::vector<bool> productive(n, false);
  for (SymbolId s = 0; s < n; ++s) productive[s] = !g.is_nonterminal(s);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& wr : g.rules()) {
      if (productive[wr.rule.lhs]) continue;
      if (std::all_of(wr.rule.rhs.begin(), wr.rule.rhs.end(), [&](SymbolId s) { return productive[s]; })) {
        productive[wr.rule.lhs] = true;
        changed = true;
      }
    }
  }

  for (SymbolId a : g.nonterminals()) {
    auto rules = g.rules_for(a);
    if (rules.empty()) continue;
    if (!reached[a]) d.unreachable.push_back(a);
    if (!productive[a]) d.no_lexical_yield.push_back(a);
    double sum = 0.0;
    for (RuleIndex i : rules) sum += g.rule(i).weight;
    if (std::abs(sum - 1.0) > 1e-9) d.bad_weight_sums.emplace_back(a, sum);
  }
  d.unary_cycles = unary_cycles(g);
  return d;
}

std::string describe(const Grammar& g, const Diagnostics& d) {
  std::ostringstream out;
  auto list = [&](const char* title, const std::vector<SymbolId>& ids) {
    if (ids.empty()) return;
    out << title << ':';
    for (SymbolId s : ids) out << ' ' << g.name(s);
    out << '\n';
  };
  list("unreachable", d.unreachable);
  list("no lexical yield", d.no_lexical_yield);
  for (const auto& c : d.unary_cycles) list("unary cycle", c);
  for (const auto& [a, sum] : d.bad_weight_sums)
    out << "weights of " << g.name(a) << " sum to " << format_double(sum) << '\n';
  return out.str();
}

}  // namespace matgi
