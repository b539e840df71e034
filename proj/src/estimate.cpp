#include "matgi/estimate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "matgi/error.hpp"
#include "matgi/text.hpp"

namespace matgi {

namespace {

constexpr std::size_t kMaxChunks = 64;
constexpr std::size_t kMinChunk = 16;

void accumulate_sentence(const BinarizedGrammar& g, std::span<const SymbolId> sentence, EStepResult& into) {
  Chart c = inside(g, sentence);
  if (!c.parsed()) return;
  into.log_likelihood += c.marginal();
  c = outside(g, std::move(c));
  into.counts.merge(expected_counts(g, c));
}

std::vector<std::vector<SymbolId>> encode_corpus(const Grammar& g, const Corpus& corpus) {
  std::vector<std::vector<SymbolId>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    if (s.empty()) throw Error("corpus contains an empty sentence");
    out.push_back(encode_sentence(g, s));
  }
  return out;
}

unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

template <typename Fn>
void parallel_for(std::size_t tasks, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, tasks));
  if (threads <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) fn(t, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t t = next++; t < tasks; t = next++) fn(t, w);
    });
  }
}

void check_corpus(const Corpus& corpus) {
  if (corpus.empty()) throw Error("corpus is empty");
}

}  // namespace

EStepResult e_step(const BinarizedGrammar& g, std::span<const std::vector<SymbolId>> corpus,
                   const EstimatorConfig& cfg) {
  const std::size_t rules = g.base().size();
  const unsigned threads = resolve_threads(cfg.threads);
  EStepResult total{CountVector(rules), 0.0};

  if (cfg.reproducible) {
    const std::size_t chunk = std::max(kMinChunk, (corpus.size() + kMaxChunks - 1) / kMaxChunks);
    const std::size_t chunks = (corpus.size() + chunk - 1) / chunk;
    std::vector<EStepResult> partial(chunks, EStepResult{CountVector(rules), 0.0});
    parallel_for(chunks, threads, [&](std::size_t t, unsigned) {
      const std::size_t end = std::min(corpus.size(), (t + 1) * chunk);
      for (std::size_t s = t * chunk; s < end; ++s) accumulate_sentence(g, corpus[s], partial[t]);
    });
    for (const auto& p : partial) {
      total.counts.merge(p.counts);
      total.log_likelihood += p.log_likelihood;
    }
    return total;
  }

  std::vector<EStepResult> per_thread(threads, EStepResult{CountVector(rules), 0.0});
  parallel_for(corpus.size(), threads,
               [&](std::size_t s, unsigned w) { accumulate_sentence(g, corpus[s], per_thread[w]); });
  for (const auto& p : per_thread) {
    total.counts.merge(p.counts);
    total.log_likelihood += p.log_likelihood;
  }
  return total;
}

namespace {

bool converged(const std::vector<TraceRow>& trace, double tolerance) {
  if (tolerance <= 0.0 || trace.size() < 2) return false;
  double prev = trace[trace.size() - 2].log_likelihood;
  double cur = trace.back().log_likelihood;
  return std::abs(cur - prev) <= tolerance * std::abs(prev);
}

}  // namespace

EmResult run_em(const Grammar& g, const Corpus& corpus, const EstimatorConfig& cfg) {
  check_corpus(corpus);
  if (cfg.iterations < 1) throw Error("iterations must be at least 1");
  const auto encoded = encode_corpus(g, corpus);
  const BinarizedGrammar structure = binarize(g);
  std::vector<double> w = g.weights();
  std::vector<TraceRow> trace;

  for (int it = 1; it <= cfg.iterations; ++it) {
    auto e = e_step(structure.with_weights(w), encoded, cfg);
    if (e.counts.sentences == 0) throw NoParsableSentences("no sentence of the corpus can be parsed");
    trace.push_back({it, e.log_likelihood, e.counts.sentences});
    for (SymbolId a : g.nonterminals()) {
      auto rules = g.rules_for(a);
      double total = 0.0;
      for (RuleIndex r : rules) total += e.counts.counts[r];
      if (total <= 0.0) continue;
      for (RuleIndex r : rules) w[r] = e.counts.counts[r] / total;
    }
    if (converged(trace, cfg.tolerance)) break;
  }
  return {g.with_weights(w), std::move(trace)};
}

PosteriorSummary run_vb(const Grammar& g, const Corpus& corpus, const EstimatorConfig& cfg) {
  check_corpus(corpus);
  if (cfg.iterations < 1) throw Error("iterations must be at least 1");
  PosteriorSummary out;
  out.alphas = g.pseudocounts();
  for (std::size_t i = 0; i < out.alphas.size(); ++i)
    if (!(out.alphas[i] > 0.0)) throw GrammarError("nonpositive pseudocount for rule '" + g.rule_string(i) + "'");

  const auto encoded = encode_corpus(g, corpus);
  const BinarizedGrammar structure = binarize(g);
  out.weights = g.weights();

  for (int it = 1; it <= cfg.iterations; ++it) {
    auto e = e_step(structure.with_weights(out.weights), encoded, cfg);
    if (e.counts.sentences == 0) throw NoParsableSentences("no sentence of the corpus can be parsed");
    out.trace.push_back({it, e.log_likelihood, e.counts.sentences});
    out.counts = std::move(e.counts.counts);
    out.parsed = e.counts.sentences;
    out.weights = variational_weights(g, out.alphas, out.counts);
    if (converged(out.trace, cfg.tolerance)) break;
  }
  out.means = posterior_mean(g, out.alphas, out.counts);
  return out;
}

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw Error("digamma is defined here only for finite x > 0");
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic expansion: ln x - 1/(2x) - sum B_2k / (2k x^2k).
  static constexpr double kCoeff[] = {
      1.0 / 12.0,         -1.0 / 120.0,       1.0 / 252.0,           -1.0 / 240.0,        1.0 / 132.0,
      -691.0 / 32760.0,   1.0 / 12.0,         -3617.0 / 8160.0,      43867.0 / 14364.0,   -174611.0 / 6600.0,
  };
  const double inv2 = 1.0 / (x * x);
  double series = 0.0;
  double power = inv2;
  for (double c : kCoeff) {
    series += c * power;
    power *= inv2;
  }
  return result + std::log(x) - 0.5 / x - series;
}

std::vector<double> posterior_mean(const Grammar& g, std::span<const double> alphas, std::span<const double> counts) {
  if (alphas.size() != g.size() || counts.size() != g.size())
    throw Error("alpha/count vectors do not match the grammar's rule index space");
  std::vector<double> p(g.size(), 0.0);
  for (SymbolId a : g.nonterminals()) {
    auto rules = g.rules_for(a);
    double total = 0.0;
    for (RuleIndex r : rules) {
      if (!(alphas[r] > 0.0)) throw Error("alpha must be positive");
      if (counts[r] < 0.0) throw Error("counts must be nonnegative");
      total += alphas[r] + counts[r];
    }
    for (RuleIndex r : rules) p[r] = (alphas[r] + counts[r]) / total;
  }
  return p;
}

std::vector<double> variational_weights(const Grammar& g, std::span<const double> alphas,
                                        std::span<const double> counts) {
  if (alphas.size() != g.size() || counts.size() != g.size())
    throw Error("alpha/count vectors do not match the grammar's rule index space");
  std::vector<double> w(g.size(), 0.0);
  for (SymbolId a : g.nonterminals()) {
    auto rules = g.rules_for(a);
    if (rules.empty()) continue;
    double total = 0.0;
    for (RuleIndex r : rules) total += alphas[r] + counts[r];
    const double psi_total = digamma(total);
    for (RuleIndex r : rules) w[r] = std::exp(digamma(alphas[r] + counts[r]) - psi_total);
  }
  return w;
}

Grammar jitter_weights(const Grammar& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor(0.9, 1.1);
  std::vector<double> w = g.weights();
  for (double& x : w) x *= factor(rng);
  for (SymbolId a : g.nonterminals()) {
    auto rules = g.rules_for(a);
    double total = 0.0;
    for (RuleIndex r : rules) total += w[r];
    if (total > 0.0)
      for (RuleIndex r : rules) w[r] /= total;
  }
  return g.with_weights(w);
}

std::string trace_csv(std::span<const TraceRow> trace) {
  std::string out = "iteration,log_likelihood,parsed_sentences\n";
  for (const auto& row : trace)
    out += std::to_string(row.iteration) + "," + format_double(row.log_likelihood) + "," +
           std::to_string(row.parsed) + "\n";
  return out;
}

}  // namespace matgi
