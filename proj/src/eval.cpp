#include "matgi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "matgi/binarize.hpp"
#include "matgi/chart.hpp"
#include "matgi/error.hpp"
#include "matgi/treebank.hpp"

namespace matgi {

F1Result unlabelled_f1(std::span<const Tree> gold, std::span<const std::optional<Tree>> predicted,
                       bool include_root) {
  if (gold.size() != predicted.size()) throw Error("gold and predicted sequences differ in length");
  F1Result r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = tree_to_brackets(gold[i], include_root).unlabelled();
    for (const auto& [span, c] : g) r.gold += c;
    if (!predicted[i]) continue;
    if (predicted[i]->yield() != gold[i].yield())
      throw Error("yield mismatch between gold and predicted tree at index " + std::to_string(i));
    const auto p = tree_to_brackets(*predicted[i], include_root).unlabelled();
    for (const auto& [span, c] : p) {
      r.predicted += c;
      if (auto it = g.find(span); it != g.end()) r.matched += std::min(c, it->second);
    }
  }
  r.precision = r.predicted ? static_cast<double>(r.matched) / static_cast<double>(r.predicted) : 0.0;
  r.recall = r.gold ? static_cast<double>(r.matched) / static_cast<double>(r.gold) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

namespace {

void check_distribution(std::span<const double> p, const char* which) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(std::string("jsd: invalid entry in ") + which);
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(std::string("jsd: ") + which + " does not sum to 1");
}

// Sum of x * log(x / m) in natural log, with 0 log 0 = 0.
double kl_to_mixture(std::span<const double> x, std::span<const double> m) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0) s += x[i] * std::log(x[i] / m[i]);
  return s;
}

}  // namespace

double jsd(std::span<const double> p, std::span<const double> q, double base) {
  if (p.size() != q.size()) throw Error("jsd: distributions have different supports");
  if (!(base > 1.0)) throw Error("jsd: log base must exceed 1");
  check_distribution(p, "p");
  check_distribution(q, "q");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  // Sum the two halves in a fixed symmetric order so jsd(p, q) == jsd(q, p).
  const double a = kl_to_mixture(p, m);
  const double b = kl_to_mixture(q, m);
  const double nats = 0.5 * (std::min(a, b) + std::max(a, b));
  // ln 2 nats is the maximum, attained by disjoint supports.
  return std::clamp(nats / std::log(base), 0.0, std::log(2.0) / std::log(base));
}

JsdReport per_nt_jsd(const Grammar& oracle, const Grammar& induced, const std::optional<std::vector<std::string>>& only,
                     const JsdOptions& options) {
  JsdReport report;
  report.base = options.base;
  std::vector<SymbolId> nts;
  if (only) {
    for (const auto& name : *only) {
      auto id = oracle.symbols().find(name);
      if (!id || !oracle.is_nonterminal(*id)) throw Error("nonterminal '" + name + "' not in the oracle grammar");
      nts.push_back(*id);
    }
  } else {
    for (SymbolId a : oracle.nonterminals()) {
      auto rules = oracle.rules_for(a);
      bool has_production = std::any_of(rules.begin(), rules.end(), [&](RuleIndex r) {
        return oracle.rule(r).rule.kind == RuleKind::production;
      });
      if (!rules.empty() && (has_production || options.include_preterminals)) nts.push_back(a);
    }
  }

  double sum = 0.0;
  for (SymbolId a : nts) {
    const std::string& name = oracle.name(a);
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<double> p, q;
    auto key_of = [](const Grammar& g, RuleIndex r) { return g.rule_string(r); };
    for (RuleIndex r : oracle.rules_for(a)) {
      slot.emplace(key_of(oracle, r), p.size());
      p.push_back(oracle.rule(r).weight);
      q.push_back(0.0);
    }
    double induced_mass = 0.0;
    if (auto ia = induced.symbols().find(name)) {
      for (RuleIndex r : induced.rules_for(*ia)) {
        auto [it, fresh] = slot.emplace(key_of(induced, r), p.size());
        if (fresh) {
          p.push_back(0.0);
          q.push_back(0.0);
        }
        q[it->second] += induced.rule(r).weight;
        induced_mass += induced.rule(r).weight;
      }
    }
    NtDivergence d{name, 1.0, induced_mass > 0.0};
    if (d.available) d.divergence = jsd(p, q, options.base);
    if (d.available || !options.exclude_unavailable) {
      sum += d.divergence;
      ++report.averaged;
    }
    report.per_nt.push_back(std::move(d));
  }
  report.mean = report.averaged ? sum / static_cast<double>(report.averaged) : std::nan("");
  return report;
}

LoglikReport mean_sentence_loglik(const Grammar& g, const Corpus& sentences) {
  LoglikReport report;
  const auto bg = binarize(g);
  double sum = 0.0;
  for (const auto& s : sentences) {
    if (s.empty()) throw Error("empty sentence in log-likelihood evaluation set");
    LoglikRecord rec;
    rec.length = s.size();
    const auto chart = inside(bg, s);
    if (chart.parsed()) {
      rec.scored = true;
      rec.log_marginal = chart.marginal();
      sum += rec.log_marginal / static_cast<double>(rec.length);
      ++report.scored;
    } else {
      rec.log_marginal = kLogZero;
      ++report.skipped;
    }
    report.records.push_back(rec);
  }
  report.mean = report.scored ? sum / static_cast<double>(report.scored) : std::nan("");
  return report;
}

// ---------------------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs, Alternative alternative) {
  std::vector<double> all, d;
  for (const auto& [a, b] : pairs) {
    all.push_back(a - b);
    if (a - b != 0.0) d.push_back(a - b);
  }
  if (d.empty()) throw Error("wilcoxon: all pairs are tied");
  WilcoxonResult r;
  r.n = d.size();
  r.median_difference = median(all);

  // Average ranks of |d|, stored doubled so tied ranks stay integral.
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
  std::vector<std::size_t> rank2(d.size());
  std::vector<std::size_t> tie_sizes;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    // Ranks i+1..j+1 averaged, doubled: (i + 1) + (j + 1).
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = i + j + 2;
    tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }
  std::size_t w_plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total2 += rank2[i];
    if (d[i] > 0.0) w_plus2 += rank2[i];
  }
  r.statistic = 0.5 * static_cast<double>(w_plus2);
  const double w_minus = 0.5 * static_cast<double>(total2 - w_plus2);
  r.rank_biserial = (r.statistic - w_minus) / (r.statistic + w_minus);

  if (r.n <= kWilcoxonExactLimit) {
    // Null distribution of the doubled W+ over all 2^n sign assignments.
    std::vector<double> ways(total2 + 1, 0.0);
    ways[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t rk : rank2) {
      for (std::size_t s = reach + 1; s-- > 0;)
        if (ways[s] != 0.0) ways[s + rk] += ways[s];
      reach += rk;
    }
    double tail = 0.0;
    for (std::size_t s = 0; s <= total2; ++s) {
      bool in_tail = alternative == Alternative::a_greater ? s >= w_plus2 : s <= w_plus2;
      if (in_tail) tail += ways[s];
    }
    r.p_value = std::ldexp(tail, -static_cast<int>(r.n));
    r.exact = true;
  } else {
    const double n = static_cast<double>(r.n);
    const double mean = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    for (std::size_t t : tie_sizes) {
      const double tt = static_cast<double>(t);
      var -= (tt * tt * tt - tt) / 48.0;
    }
    const double sd = std::sqrt(var);
    double z = alternative == Alternative::a_greater ? (r.statistic - mean - 0.5) / sd
                                                     : (mean - r.statistic - 0.5) / sd;
    r.p_value = normal_upper_tail(z);
    r.exact = false;
  }
  r.p_value = std::clamp(r.p_value, std::numeric_limits<double>::min(), 1.0);
  return r;
}

}  // namespace matgi
