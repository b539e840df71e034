#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matgi/binarize.hpp"
#include "matgi/grammar.hpp"
#include "matgi/tree.hpp"

namespace matgi {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();
inline constexpr SymbolId kOov = static_cast<SymbolId>(-1);

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// Terminal ids for the tokens of a sentence; kOov where a token is not a
// terminal of g.
std::vector<SymbolId> encode_sentence(const Grammar& g, std::span<const std::string> tokens);

// Log-domain inside (and optionally outside) scores for one sentence. Absent
// cells read as kLogZero.
class Chart {
 public:
  Chart() = default;
  Chart(std::vector<SymbolId> sentence, NtIndex nonterminals);

  std::size_t length() const noexcept { return sentence_.size(); }
  std::span<const SymbolId> sentence() const noexcept { return sentence_; }
  bool parsed() const noexcept { return marginal_ != kLogZero; }
  double marginal() const noexcept { return marginal_; }
  // First out-of-vocabulary token position, if any.
  std::optional<std::size_t> oov_position() const noexcept { return oov_; }
  bool has_outside() const noexcept { return !outside_.empty(); }

  double inside(std::size_t start, std::size_t end, NtIndex a) const { return inside_[at(start, end, a)]; }
  double outside(std::size_t start, std::size_t end, NtIndex a) const {
    return has_outside() ? outside_[at(start, end, a)] : kLogZero;
  }

 private:
  friend Chart inside(const BinarizedGrammar&, std::span<const SymbolId>);
  friend Chart outside(const BinarizedGrammar&, Chart);

  std::size_t at(std::size_t start, std::size_t end, NtIndex a) const {
    return (start * sentence_.size() + (end - 1)) * nts_ + a;
  }
  double* cell(std::vector<double>& v, std::size_t start, std::size_t end) { return &v[at(start, end, 0)]; }
  const double* cell(const std::vector<double>& v, std::size_t start, std::size_t end) const {
    return &v[at(start, end, 0)];
  }

  std::vector<SymbolId> sentence_;
  NtIndex nts_ = 0;
  std::vector<double> inside_;
  std::vector<double> outside_;
  double marginal_ = kLogZero;
  std::optional<std::size_t> oov_;
};

// Expected rule counts indexed like the base grammar's rules.
struct CountVector {
  std::vector<double> counts;
  std::size_t sentences = 0;

  CountVector() = default;
  explicit CountVector(std::size_t rules) : counts(rules, 0.0) {}
  CountVector& merge(const CountVector& other);
};

Chart inside(const BinarizedGrammar& g, std::span<const SymbolId> sentence);
Chart inside(const BinarizedGrammar& g, std::span<const std::string> tokens);

// Throws Error if the chart has no parse.
Chart outside(const BinarizedGrammar& g, Chart chart);

// Posterior expected counts of the original rules (chain links folded onto
// their originating rule). Requires inside and outside passes.
CountVector expected_counts(const BinarizedGrammar& g, const Chart& chart);

struct ViterbiResult {
  std::optional<Tree> tree;
  double log_prob = kLogZero;
  bool parsed() const noexcept { return tree.has_value(); }
};

// Max-product parse. Exact score ties go to the lowest original rule index,
// then the leftmost split point.
ViterbiResult viterbi_parse(const BinarizedGrammar& g, std::span<const SymbolId> sentence);
ViterbiResult viterbi_parse(const BinarizedGrammar& g, std::span<const std::string> tokens);

struct EnumeratedParse {
  Tree tree;
  double probability;
  double log_prob;
};

inline constexpr std::size_t kDefaultEnumerationCap = 100000;

// Exhaustive parse enumeration over the unbinarized grammar. Test oracle;
// throws Error when the number of parses exceeds cap.
std::vector<EnumeratedParse> enumerate_parses(const Grammar& g, std::span<const std::string> tokens,
                                              std::size_t cap = kDefaultEnumerationCap);

}  // namespace matgi
