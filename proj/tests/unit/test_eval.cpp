#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "matgi/binarize.hpp"
#include "matgi/chart.hpp"
#include "matgi/error.hpp"
#include "matgi/eval.hpp"
#include "matgi/report.hpp"
#include "matgi/text.hpp"
#include "matgi/treebank.hpp"
#include "support/fixtures.hpp"

using namespace matgi;

namespace {

std::vector<double> v(std::initializer_list<double> x) { return x; }

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("matgi_eval_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("jsd values") {
  CHECK(jsd(v({1, 0}), v({0.5, 0.5})) == doctest::Approx(0.3112781).epsilon(1e-6));
  CHECK(std::abs(jsd(v({1, 0}), v({0.5, 0.5})) - 0.3112781) <= 1e-6);
  CHECK(jsd(v({0.3, 0.7}), v({0.3, 0.7})) == 0.0);
  CHECK(jsd(v({1, 0}), v({0, 1})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(jsd(v({1, 0}), v({0, 1}), std::exp(1.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(jsd(v({1.2, -0.2}), v({0.5, 0.5})), Error);
  CHECK_THROWS_AS(jsd(v({0.6, 0.6}), v({0.5, 0.5})), Error);
  CHECK_THROWS_AS(jsd(v({1}), v({0.5, 0.5})), Error);
}

TEST_CASE("jsd is symmetric and bounded") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    std::size_t n = 1 + rng() % 6;
    std::vector<double> p(n), q(n);
    double sp = 0, sq = 0;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = u(rng) < 0.2 ? 0.0 : u(rng);
      q[j] = u(rng) < 0.2 ? 0.0 : u(rng);
      sp += p[j];
      sq += q[j];
    }
    if (sp == 0 || sq == 0) continue;
    for (auto& x : p) x /= sp;
    for (auto& x : q) x /= sq;
    const double a = jsd(p, q), b = jsd(q, p);
    CHECK(a == b);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("unlabelled F1 hand-worked example") {
  std::vector<Tree> gold = {parse_tree("(S (NP (A a) (B b)) (VP (C c)))")};
  std::vector<std::optional<Tree>> pred = {parse_tree("(S (NP (A a)) (VP (B b) (C c)))")};
  auto r = unlabelled_f1(gold, pred);
  CHECK(r.matched == 1);
  CHECK(r.gold == 2);
  CHECK(r.predicted == 2);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 0.5);
  CHECK(r.f1 == 0.5);

  std::vector<std::optional<Tree>> same = {gold[0]};
  CHECK(unlabelled_f1(gold, same).f1 == 1.0);
  std::vector<std::optional<Tree>> none = {std::nullopt};
  auto empty = unlabelled_f1(gold, none);
  CHECK(empty.f1 == 0.0);
  CHECK(empty.gold == 2);
  CHECK(empty.predicted == 0);

  std::vector<std::optional<Tree>> wrong = {parse_tree("(S (A a) (B x) (C c))")};
  CHECK_THROWS_AS(unlabelled_f1(gold, wrong), Error);
  std::vector<std::optional<Tree>> misaligned = {};
  CHECK_THROWS_AS(unlabelled_f1(gold, misaligned), Error);
}

TEST_CASE("F1 micro-averages over the corpus") {
  std::vector<Tree> gold = {parse_tree("(S (NP (A a) (B b)) (VP (C c)))"), parse_tree("(S (A a) (B b))")};
  std::vector<std::optional<Tree>> pred = {parse_tree("(S (NP (A a)) (VP (B b) (C c)))"), gold[1]};
  auto r = unlabelled_f1(gold, pred);
  CHECK(r.matched == 2);
  CHECK(r.gold == 3);
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  auto no_root = unlabelled_f1(gold, pred, false);
  CHECK(no_root.matched == 0);
  CHECK(no_root.gold == 1);
}

TEST_CASE("self-parse of an unambiguous grammar scores F1 = 1") {
  auto g = parse_grammar_file(testing::kUnambiguousPcfg);
  auto bg = binarize(g);
  std::mt19937_64 rng(42);
  std::vector<Tree> gold;
  std::vector<std::optional<Tree>> pred;
  for (const auto& s : testing::sample_corpus(g, rng, 50, 6)) {
    auto v = viterbi_parse(bg, std::span<const std::string>(s));
    REQUIRE(v.parsed());
    gold.push_back(*v.tree);
    pred.push_back(*v.tree);
  }
  // Re-extract from the gold trees and parse again.
  auto extracted = binarize(extract_pcfg(gold, 1));
  std::vector<std::optional<Tree>> reparsed;
  for (const auto& t : gold) reparsed.push_back(viterbi_parse(extracted, std::span<const std::string>(t.yield())).tree);
  CHECK(unlabelled_f1(gold, reparsed).f1 == 1.0);
}

TEST_CASE("per_nt_jsd") {
  auto oracle = parse_grammar_file(testing::kTenRulePcfg);
  auto self = per_nt_jsd(oracle, oracle);
  CHECK(self.mean == 0.0);
  CHECK(self.averaged == 3);
  for (const auto& d : self.per_nt) CHECK(d.divergence == 0.0);

  JsdOptions with_pre;
  with_pre.include_preterminals = true;
  CHECK(per_nt_jsd(oracle, oracle, std::nullopt, with_pre).averaged == 5);

  // Induced side covers only S and its lexical support; VP and NP absent.
  auto induced = parse_grammar_file("0.1 1 S --> VP\n0.1 1 VP --> V\n0.1 0.5 V --> sees\n0.1 0.5 V --> barks\n");
  auto r = per_nt_jsd(oracle, induced);
  bool saw_np = false;
  for (const auto& d : r.per_nt) {
    if (d.nt == "NP") {
      saw_np = true;
      CHECK_FALSE(d.available);
      CHECK(d.divergence == 1.0);
    }
    if (d.nt == "S") {
      CHECK(d.available);
      CHECK(d.divergence == doctest::Approx(jsd(v({0.8, 0.2}), v({0, 1}))));
    }
  }
  CHECK(saw_np);
  CHECK(r.averaged == 2);
  JsdOptions all;
  all.exclude_unavailable = false;
  CHECK(per_nt_jsd(oracle, induced, std::nullopt, all).averaged == 3);

  auto only = per_nt_jsd(oracle, oracle, std::vector<std::string>{"S"});
  REQUIRE(only.per_nt.size() == 1);
  CHECK(only.per_nt[0].nt == "S");
  CHECK_THROWS_AS(per_nt_jsd(oracle, oracle, std::vector<std::string>{"SBAR"}), Error);
}

TEST_CASE("mean sentence log-likelihood") {
  auto one = parse_grammar_file("0.1 1 S --> a\n");
  CHECK(mean_sentence_loglik(one, {{"a"}}).mean == 0.0);

  auto ss = parse_grammar_file("0.1 0.5 S --> S S\n0.1 0.5 S --> a\n");
  auto r = mean_sentence_loglik(ss, {{"a", "a"}, {"b"}, {"a", "b"}});
  CHECK(r.mean == doctest::Approx(std::log(0.125) / 2).epsilon(1e-14));
  CHECK(r.scored == 1);
  CHECK(r.skipped == 2);
  REQUIRE(r.records.size() == 3);
  CHECK(r.records[0].scored);
  CHECK_FALSE(r.records[1].scored);

  auto none = mean_sentence_loglik(ss, {{"b"}});
  CHECK(std::isnan(none.mean));
  CHECK_THROWS_AS(mean_sentence_loglik(ss, {{}}), Error);
}

TEST_CASE("log-likelihood matches enumeration") {
  std::mt19937_64 rng(43);
  for (int gi = 0; gi < 60; ++gi) {
    auto g = testing::random_grammar(rng, 20);
    auto s = testing::sample_sentence(g, rng, 6);
    if (!s) continue;
    double total = 0.0;
    try {
      for (const auto& p : enumerate_parses(g, *s)) total += p.probability;
    } catch (const Error&) {
      continue;
    }
    auto r = mean_sentence_loglik(g, {*s});
    CHECK(r.records[0].log_marginal == doctest::Approx(std::log(total)).epsilon(1e-9));
  }
}

TEST_CASE("wilcoxon signed-rank") {
  std::vector<std::pair<double, double>> pos;
  for (int i = 1; i <= 10; ++i) pos.emplace_back(i + 0.5 * i, 0.0);
  auto r = wilcoxon_signed_rank(pos, Alternative::a_greater);
  CHECK(std::abs(r.p_value - std::pow(2.0, -10)) <= 1e-12);
  CHECK(r.rank_biserial == 1.0);
  CHECK(r.n == 10);
  CHECK(r.statistic == 55.0);
  CHECK(r.exact);
  auto flipped = wilcoxon_signed_rank(pos, Alternative::b_greater);
  CHECK(flipped.p_value == 1.0);

  std::vector<std::pair<double, double>> anti;
  for (int i = 1; i <= 5; ++i) {
    anti.emplace_back(i, 0.0);
    anti.emplace_back(0.0, i);
  }
  auto a = wilcoxon_signed_rank(anti, Alternative::a_greater);
  CHECK(a.rank_biserial == 0.0);
  CHECK(a.p_value > 0.4);
  CHECK(a.p_value < 0.65);
  CHECK(a.median_difference == 0.0);

  std::vector<std::pair<double, double>> tied = {{1, 1}, {2, 2}, {3, 3}};
  CHECK_THROWS_AS(wilcoxon_signed_rank(tied, Alternative::a_greater), Error);
}

TEST_CASE("wilcoxon exact p matches exhaustive enumeration") {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<int> d(-4, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 12;
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(d(rng), d(rng));
    bool all_tied = std::all_of(pairs.begin(), pairs.end(), [](auto p) { return p.first == p.second; });
    if (all_tied) continue;
    for (auto alt : {Alternative::a_greater, Alternative::b_greater}) {
      auto r = wilcoxon_signed_rank(pairs, alt);
      CHECK(std::abs(r.p_value - testing::wilcoxon_exhaustive(pairs, alt == Alternative::a_greater)) <= 1e-12);
      CHECK(r.p_value > 0.0);
      CHECK(r.p_value <= 1.0);
      CHECK(std::abs(r.rank_biserial) <= 1.0);
    }
  }
}

TEST_CASE("wilcoxon normal approximation beyond the exact limit") {
  std::vector<std::pair<double, double>> pairs;
  for (int i = 1; i <= 40; ++i) pairs.emplace_back(i % 7 == 0 ? 0.0 : i, i % 7 == 0 ? i : 0.0);
  auto r = wilcoxon_signed_rank(pairs, Alternative::a_greater);
  CHECK_FALSE(r.exact);
  CHECK(r.p_value < 0.01);
  CHECK(r.p_value > 0.0);
}

TEST_CASE("report round trip") {
  StageMetrics m;
  m.stage = 1;
  m.name = "one";
  m.f1.f1 = 1.0 / 3.0;
  m.jsd.mean = 0.123456789012345678;
  m.jsd.per_nt = {{"NP", 0.1, true}, {"SBAR", 1.0, false}};
  m.parsed = 17;
  StageMetrics m2 = m;
  m2.stage = 2;
  LoglikReport ll;
  ll.mean = -6.18230000000001;
  ll.scored = 3;
  m2.loglik = ll;
  std::vector<StageMetrics> all = {m, m2};

  auto rows = read_metrics_csv(metrics_csv(all));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].stage == 1);
  CHECK(rows[0].f1 == 1.0 / 3.0);
  CHECK(rows[0].mean_jsd == m.jsd.mean);
  CHECK(std::isnan(rows[0].mean_loglik));
  CHECK(rows[0].parsed == 17);
  CHECK(rows[1].mean_loglik == ll.mean);
  CHECK(metrics_csv(all).rfind("stage,f1,mean_jsd,mean_loglik,N_parsed\n", 0) == 0);
  CHECK(jsd_per_nt_csv(all) == "stage,nt,jsd\n1,NP,0.10000000000000001\n1,SBAR,1\n2,NP,0.10000000000000001\n2,SBAR,1\n");

  auto dir = scratch("report");
  write_report(all, dir.string());
  for (const char* f : {"metrics.csv", "metrics.json", "jsd_per_nt.csv", "jsd_per_nt.json", "summary.json"})
    CHECK(std::filesystem::exists(dir / f));
  auto json = nlohmann::json::parse(read_file((dir / "metrics.json").string()));
  REQUIRE(json.size() == 2);
  CHECK(json[0]["f1"].get<double>() == 1.0 / 3.0);
  CHECK(json[1]["N_parsed"].get<int>() == 17);
  CHECK(json[0]["mean_loglik"].is_string());
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(write_report(all, "/proc/matgi-cannot-write-here"), Error);
}
