#include <doctest.h>

#include <cmath>
#include <random>

#include "matgi/binarize.hpp"
#include "matgi/chart.hpp"
#include "matgi/error.hpp"
#include "matgi/text.hpp"
#include "matgi/tree.hpp"
#include "matgi/treebank.hpp"
#include "support/fixtures.hpp"

using namespace matgi;

namespace {

const char* kYouGo = "(ROOT (S (NP (PRP you)) (VP (VB go))))";

std::vector<std::tuple<std::size_t, std::size_t, std::string>> spans(const BracketSet& b) {
  std::vector<std::tuple<std::size_t, std::size_t, std::string>> out;
  for (const auto& [br, n] : b.labelled())
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(br.start, br.end, br.label);
  return out;
}

double tree_log_prob(const Grammar& g, const Tree& t) {
  if (t.is_preterminal()) return std::log(g.rule(*g.find_rule(t.label, {t.children[0].token})).weight);
  std::vector<std::string> rhs;
  double lp = 0.0;
  for (const auto& c : t.children) {
    rhs.push_back(c.label);
    lp += tree_log_prob(g, c);
  }
  return lp + std::log(g.rule(*g.find_rule(t.label, rhs)).weight);
}

}  // namespace

TEST_CASE("parse a two-token tree") {
  auto trees = parse_trees(kYouGo);
  REQUIRE(trees.size() == 1);
  CHECK(trees[0].yield() == std::vector<std::string>{"you", "go"});
  CHECK(to_string(trees[0]) == kYouGo);
}

TEST_CASE("tree reader errors") {
  try {
    parse_trees("(ROOT (S (NP (PRP you)) (VP (VB go))");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  CHECK_THROWS_AS(parse_trees("(ROOT (S))"), ParseError);
  CHECK_THROWS_AS(parse_trees("(ROOT (S (NP x) y))"), ParseError);
  CHECK_THROWS_AS(parse_trees("(ROOT (S (A a)))) extra"), ParseError);
  CHECK_THROWS_AS(parse_trees("((A a))"), ParseError);
  try {
    parse_trees("(A a)\n(B (C c)\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("blank lines are skipped") {
  auto trees = parse_trees("(A a)\n\n(B b)\n   \n(C c)\n");
  CHECK(trees.size() == 3);
}

TEST_CASE("labels and tokens are preserved byte-exact") {
  auto t = parse_tree("(NP-SBJ (PRP$ his) (NN ca$h))");
  CHECK(t.label == "NP-SBJ");
  CHECK(t.children[0].label == "PRP$");
  CHECK(t.yield() == std::vector<std::string>{"his", "ca$h"});
}

TEST_CASE("extract single-expansion grammar") {
  auto trees = parse_trees(std::string(kYouGo) + "\n" + kYouGo);
  auto g = extract_pcfg(trees, 1);
  CHECK(g.production_count() == 4);
  CHECK(g.lexicalisation_count() == 2);
  CHECK(g.name(g.start()) == "ROOT");
  for (const auto& r : g.rules()) {
    CHECK(r.weight == 1.0);
    CHECK(r.pseudocount == 0.1);
  }
  for (auto [lhs, rhs] : std::vector<std::pair<std::string, std::vector<std::string>>>{
           {"ROOT", {"S"}}, {"S", {"NP", "VP"}}, {"NP", {"PRP"}}, {"VP", {"VB"}}, {"PRP", {"you"}}, {"VB", {"go"}}})
    CHECK(g.find_rule(lhs, rhs).has_value());
}

TEST_CASE("frequency threshold boundary") {
  std::string text;
  for (int i = 0; i < 6; ++i) text += "(ROOT (S (NP (PRP you)) (VP (VB go))))\n";
  for (int i = 0; i < 8; ++i) text += "(ROOT (FRAG (NP (PRP you)) (VP (VB go))))\n";
  auto trees = parse_trees(text);
  auto g7 = extract_pcfg(trees, 7);
  CHECK_FALSE(g7.find_rule("S", {"NP", "VP"}).has_value());
  CHECK_FALSE(g7.find_rule("ROOT", {"S"}).has_value());
  CHECK(g7.find_rule("FRAG", {"NP", "VP"}).has_value());
  CHECK(g7.rule(*g7.find_rule("ROOT", {"FRAG"})).weight == 1.0);
  auto g6 = extract_pcfg(trees, 6);
  CHECK(g6.find_rule("S", {"NP", "VP"}).has_value());
  CHECK(g6.rule(*g6.find_rule("ROOT", {"S"})).weight == 6.0 / 14.0);
}

TEST_CASE("lexicalisations survive any threshold") {
  auto trees = parse_trees("(ROOT (S (NP (PRP you)) (VP (VB go))))\n(ROOT (S (NP (PRP we)) (VP (VB go))))\n");
  auto g = extract_pcfg(trees, 2);
  CHECK(g.find_rule("PRP", {"we"}).has_value());
  CHECK(g.find_rule("PRP", {"you"}).has_value());
}

TEST_CASE("extraction errors") {
  CHECK_THROWS_AS(extract_pcfg(std::vector<Tree>{}, 1), Error);
  auto mixed = parse_trees("(ROOT (A a) (A a))\n(TOP (A a) (A a))\n");
  CHECK_THROWS_AS(extract_pcfg(mixed, 1), Error);
}

TEST_CASE("extracted weights are relative frequencies and sum to one") {
  auto trees = filter_sentences(parse_trees(read_file(std::string(MATGI_FIXTURE_DIR) + "/synthetic_treebank.txt")), 1);
  auto counts = count_rules(trees);
  auto g = extract_pcfg(trees, 1);
  for (const auto& rc : counts.rules) {
    auto r = g.find_rule(rc.lhs, rc.rhs);
    REQUIRE(r.has_value());
    CHECK(g.rule(*r).weight == static_cast<double>(rc.count) / static_cast<double>(counts.lhs_totals.at(rc.lhs)));
  }
  for (SymbolId a : g.nonterminals()) {
    double s = 0;
    for (RuleIndex r : g.rules_for(a)) s += g.rule(r).weight;
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("gold trees are derivable under the f_m=1 grammar") {
  auto all = parse_trees(read_file(std::string(MATGI_FIXTURE_DIR) + "/synthetic_treebank.txt"));
  std::vector<Tree> trees(all.begin(), all.begin() + 50);
  auto g = extract_pcfg(trees, 1);
  auto bg = binarize(g);
  for (const auto& t : trees) {
    auto w = t.yield();
    auto chart = inside(bg, std::span<const std::string>(w));
    REQUIRE(chart.parsed());
    const double lp = tree_log_prob(g, t);
    CHECK(chart.marginal() >= lp - 1e-12);
    auto parses = enumerate_parses(g, w);
    bool found = false;
    for (const auto& p : parses)
      if (p.tree == t) {
        found = true;
        CHECK(p.log_prob == doctest::Approx(lp).epsilon(1e-12));
      }
    CHECK(found);
  }
}

TEST_CASE("coverage sweep") {
  auto toy = parse_trees(std::string(kYouGo) + "\n(ROOT (S (NP (PRP we)) (VP (VB go))))\n");
  std::vector<std::size_t> one = {1};
  auto rows = coverage_sweep(toy, one);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].coverage == 1.0);

  // The third sentence needs the count-1 rule VP --> VB NP.
  auto text = std::string(kYouGo) + "\n" + kYouGo + "\n(ROOT (S (NP (PRP you)) (VP (VB go) (NP (PRP we)))))\n";
  auto trees = parse_trees(text);
  std::vector<std::size_t> f = {1, 2};
  rows = coverage_sweep(trees, f);
  CHECK(rows[0].coverage == 1.0);
  CHECK(rows[1].coverage < 1.0);
  auto g2 = extract_pcfg(trees, 2);
  auto w = trees[2].yield();
  CHECK(enumerate_parses(g2, w).empty());

  std::vector<std::size_t> unsorted = {2, 1};
  CHECK_THROWS_AS(coverage_sweep(trees, unsorted), Error);
  CHECK(coverage_csv(rows).rfind("f_m,productions,lexicalisations,coverage\n", 0) == 0);
}

TEST_CASE("coverage is non-increasing in f_m") {
  auto trees = filter_sentences(parse_trees(read_file(std::string(MATGI_FIXTURE_DIR) + "/synthetic_treebank.txt")), 1);
  std::vector<std::size_t> f;
  for (std::size_t i = 1; i <= 12; ++i) f.push_back(i);
  auto rows = coverage_sweep(trees, f);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].coverage <= rows[i - 1].coverage);
    CHECK(rows[i].productions <= rows[i - 1].productions);
  }
}

TEST_CASE("tree_to_brackets") {
  auto b = tree_to_brackets(parse_tree(kYouGo));
  CHECK(spans(b) == std::vector<std::tuple<std::size_t, std::size_t, std::string>>{{0, 2, "ROOT"}, {0, 2, "S"}});
  CHECK(tree_to_brackets(parse_tree("(ROOT (INTJ (UH hi)))")).empty());
  auto flat = tree_to_brackets(parse_tree("(ROOT (S (A a) (B b) (C c)))"));
  CHECK(spans(flat) == std::vector<std::tuple<std::size_t, std::size_t, std::string>>{{0, 3, "ROOT"}, {0, 3, "S"}});
  auto unlabelled = flat.unlabelled();
  CHECK(unlabelled.size() == 1);
  CHECK(unlabelled.at({0, 3}) == 2);
  auto no_root = tree_to_brackets(parse_tree(kYouGo), false);
  CHECK(spans(no_root) == std::vector<std::tuple<std::size_t, std::size_t, std::string>>{{0, 2, "S"}});
}

TEST_CASE("brackets from one tree never cross") {
  auto trees = parse_trees(read_file(std::string(MATGI_FIXTURE_DIR) + "/synthetic_treebank.txt"));
  for (const auto& t : trees) {
    auto b = tree_to_brackets(t);
    std::size_t internal = 0;
    std::function<void(const Tree&)> count = [&](const Tree& n) {
      if (n.is_leaf()) return;
      ++internal;
      for (const auto& c : n.children) count(c);
    };
    count(t);
    CHECK(b.size() <= internal);
    for (const auto& [x, nx] : b.labelled())
      for (const auto& [y, ny] : b.labelled()) {
        bool disjoint = x.end <= y.start || y.end <= x.start;
        bool nested = (x.start <= y.start && y.end <= x.end) || (y.start <= x.start && x.end <= y.end);
        CHECK((disjoint || nested));
        CHECK(x.end - x.start >= 2);
      }
  }
}

TEST_CASE("filter_sentences") {
  auto trees = parse_trees("(A a)\n(A (B a) (B b))\n");
  auto kept = filter_sentences(trees, 1);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].yield_length() == 2);
  CHECK(filter_sentences(std::vector<Tree>{}, 1).empty());
  auto five = parse_trees("(A a)\n(A b)\n(A (B a) (B b))\n(A (B a) (B b) (B c))\n(A c)\n");
  CHECK(filter_sentences(five, 1).size() == 2);
}
