#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "matgi/binarize.hpp"
#include "matgi/chart.hpp"
#include "matgi/grammar.hpp"

namespace matgi {

using Sentence = std::vector<std::string>;
using Corpus = std::vector<Sentence>;

enum class EstimatorMode { em, vb };

struct EstimatorConfig {
  EstimatorMode mode = EstimatorMode::vb;
  int iterations = 20;
  // Stop early once |L_t - L_{t-1}| <= tolerance * |L_{t-1}|. 0 disables.
  double tolerance = 0.0;
  // Fixed sentence chunking with an ordered merge, independent of thread
  // count and scheduling.
  bool reproducible = true;
  unsigned threads = 1;
};

struct TraceRow {
  int iteration = 0;
  double log_likelihood = 0.0;
  std::size_t parsed = 0;
};

struct EStepResult {
  CountVector counts;
  double log_likelihood = 0.0;
};

// Expected counts and corpus log marginal over the parsable sentences of an
// encoded corpus.
EStepResult e_step(const BinarizedGrammar& g, std::span<const std::vector<SymbolId>> corpus,
                   const EstimatorConfig& cfg);

struct EmResult {
  Grammar grammar;
  std::vector<TraceRow> trace;
};

EmResult run_em(const Grammar& g, const Corpus& corpus, const EstimatorConfig& cfg);

struct PosteriorSummary {
  std::vector<double> counts;
  std::vector<double> alphas;
  std::vector<double> means;
  std::vector<double> weights;
  std::size_t parsed = 0;
  std::vector<TraceRow> trace;
};

// Mean-field VB with Dirichlet priors taken from the grammar's pseudocounts.
// Parsing uses the exp-digamma weights; the summary reports posterior means.
PosteriorSummary run_vb(const Grammar& g, const Corpus& corpus, const EstimatorConfig& cfg);

double digamma(double x);

// (alpha_r + c_r) / sum over rules sharing r's lhs. Indexed like g.rules().
std::vector<double> posterior_mean(const Grammar& g, std::span<const double> alphas, std::span<const double> counts);

// exp(digamma(alpha_r + c_r) - digamma(sum over lhs(r) of alpha + c)).
std::vector<double> variational_weights(const Grammar& g, std::span<const double> alphas,
                                        std::span<const double> counts);

// Multiplies every weight by an independent factor in [0.9, 1.1] and
// renormalizes.
Grammar jitter_weights(const Grammar& g, std::uint64_t seed);

std::string trace_csv(std::span<const TraceRow> trace);

}  // namespace matgi
