#include "matgi/treebank.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "matgi/binarize.hpp"
#include "matgi/chart.hpp"
#include "matgi/error.hpp"
#include "matgi/text.hpp"

namespace matgi {

std::vector<Tree> filter_sentences(std::span<const Tree> trees, std::size_t min_len) {
  std::vector<Tree> out;
  for (const auto& t : trees)
    if (t.yield_length() > min_len) out.push_back(t);
  return out;
}

namespace {

void count_node(const Tree& t, RuleCounts& counts, std::unordered_map<std::string, std::size_t>& index,
                std::set<std::string>& labels, std::set<std::string>& tokens) {
  if (t.is_leaf()) return;
  labels.insert(t.label);
  RuleCount rc;
  rc.lhs = t.label;
  if (t.is_preterminal()) {
    rc.rhs = {t.children.front().token};
    rc.lexical = true;
    tokens.insert(t.children.front().token);
  } else {
    for (const auto& c : t.children) rc.rhs.push_back(c.label);
  }
  std::string key = rc.lhs + '\x1f' + (rc.lexical ? "L" : "P");
  for (const auto& s : rc.rhs) key += '\x1f' + s;
  auto [it, fresh] = index.emplace(key, counts.rules.size());
  if (fresh) counts.rules.push_back(std::move(rc));
  ++counts.rules[it->second].count;
  ++counts.lhs_totals[t.label];
  if (!t.is_preterminal())
    for (const auto& c : t.children) count_node(c, counts, index, labels, tokens);
}

}  // namespace

RuleCounts count_rules(std::span<const Tree> trees) {
  if (trees.empty()) throw Error("treebank is empty");
  RuleCounts counts;
  counts.root = trees.front().label;
  std::unordered_map<std::string, std::size_t> index;
  std::set<std::string> labels, tokens;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    if (trees[i].label != counts.root)
      throw Error("tree " + std::to_string(i + 1) + " is rooted at '" + trees[i].label + "', expected '" +
                  counts.root + "'");
    count_node(trees[i], counts, index, labels, tokens);
  }
  for (const auto& tok : tokens)
    if (labels.count(tok)) throw Error("token '" + tok + "' is also used as a node label");
  counts.vocabulary = tokens.size();
  return counts;
}

Grammar grammar_from_counts(const RuleCounts& counts, std::size_t f_m) {
  if (f_m == 0) throw Error("f_m must be positive");
  std::vector<bool> keep(counts.rules.size());
  std::set<std::string> categories;
  for (std::size_t i = 0; i < counts.rules.size(); ++i) {
    const auto& r = counts.rules[i];
    keep[i] = r.lexical || r.count >= f_m;
    categories.insert(r.lhs);
  }
  // Drop productions that mention a category with no surviving rules.
  for (bool changed = true; changed;) {
    changed = false;
    std::set<std::string> alive;
    for (std::size_t i = 0; i < counts.rules.size(); ++i)
      if (keep[i]) alive.insert(counts.rules[i].lhs);
    for (std::size_t i = 0; i < counts.rules.size(); ++i) {
      const auto& r = counts.rules[i];
      if (!keep[i] || r.lexical) continue;
      for (const auto& s : r.rhs)
        if (categories.count(s) && !alive.count(s)) {
          keep[i] = false;
          changed = true;
          break;
        }
    }
  }
  std::map<std::string, std::size_t> totals;
  for (std::size_t i = 0; i < counts.rules.size(); ++i)
    if (keep[i]) totals[counts.rules[i].lhs] += counts.rules[i].count;
  if (!totals.count(counts.root))
    throw GrammarError("no rule for start symbol '" + counts.root + "' survives f_m = " + std::to_string(f_m));

  GrammarBuilder builder;
  builder.set_start(counts.root);
  for (std::size_t i = 0; i < counts.rules.size(); ++i) {
    if (!keep[i]) continue;
    const auto& r = counts.rules[i];
    builder.add_rule(r.lhs, r.rhs, static_cast<double>(r.count) / static_cast<double>(totals.at(r.lhs)),
                     kExtractionPseudocount);
  }
  return std::move(builder).build();
}

Grammar extract_pcfg(std::span<const Tree> trees, std::size_t f_m) { return grammar_from_counts(count_rules(trees), f_m); }

std::vector<CoverageRow> coverage_sweep(std::span<const Tree> trees, std::span<const std::size_t> f_values) {
  if (!std::is_sorted(f_values.begin(), f_values.end())) throw Error("f_m values must be sorted ascending");
  const auto counts = count_rules(trees);
  std::vector<std::vector<std::string>> sentences;
  for (const auto& t : trees) sentences.push_back(t.yield());

  std::vector<CoverageRow> rows;
  for (std::size_t f : f_values) {
    CoverageRow row;
    row.f_m = f;
    Grammar g;
    try {
      g = grammar_from_counts(counts, f);
    } catch (const GrammarError&) {
      rows.push_back(row);
      continue;
    }
    row.productions = g.production_count();
    row.lexicalisations = g.lexicalisation_count();
    const auto bg = binarize(g);
    std::size_t parsed = 0;
    for (const auto& s : sentences)
      if (inside(bg, s).parsed()) ++parsed;
    row.coverage = static_cast<double>(parsed) / static_cast<double>(sentences.size());
    rows.push_back(row);
  }
  return rows;
}

std::string coverage_csv(std::span<const CoverageRow> rows) {
  std::string out = "f_m,productions,lexicalisations,coverage\n";
  for (const auto& r : rows)
    out += std::to_string(r.f_m) + "," + std::to_string(r.productions) + "," + std::to_string(r.lexicalisations) +
           "," + format_double(r.coverage) + "\n";
  return out;
}

std::size_t BracketSet::size() const {
  std::size_t n = 0;
  for (const auto& [b, c] : counts_) n += c;
  return n;
}

std::map<std::pair<std::size_t, std::size_t>, std::size_t> BracketSet::unlabelled() const {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> out;
  for (const auto& [b, c] : counts_) out[{b.start, b.end}] += c;
  return out;
}

namespace {

std::size_t collect_brackets(const Tree& t, std::size_t start, bool is_root, bool include_root, BracketSet& out) {
  if (t.is_leaf()) return start + 1;
  if (t.is_preterminal()) return start + 1;
  std::size_t end = start;
  for (const auto& c : t.children) end = collect_brackets(c, end, false, include_root, out);
  if (end - start >= 2 && (include_root || !is_root)) out.add({start, end, t.label});
  return end;
}

}  // namespace

BracketSet tree_to_brackets(const Tree& t, bool include_root) {
  BracketSet out;
  collect_brackets(t, 0, true, include_root, out);
  return out;
}

}  // namespace matgi
