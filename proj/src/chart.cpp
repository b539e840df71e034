#include "matgi/chart.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <tuple>

#include "matgi/error.hpp"

namespace matgi {

std::vector<SymbolId> encode_sentence(const Grammar& g, std::span<const std::string> tokens) {
  std::vector<SymbolId> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    auto id = g.symbols().find(tok);
    out.push_back(id && !g.is_nonterminal(*id) ? *id : kOov);
  }
  return out;
}

Chart::Chart(std::vector<SymbolId> sentence, NtIndex nonterminals)
    : sentence_(std::move(sentence)), nts_(nonterminals) {
  const std::size_t n = sentence_.size();
  inside_.assign(n * n * nts_, kLogZero);
}

CountVector& CountVector::merge(const CountVector& other) {
  if (counts.empty()) counts.assign(other.counts.size(), 0.0);
  if (counts.size() != other.counts.size()) throw Error("merging count vectors of different rule spaces");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  sentences += other.sentences;
  return *this;
}

namespace {

void apply_unary_inside(const BinarizedGrammar& g, double* cell) {
  const auto unary = g.unary();
  for (std::size_t idx : g.unary_bottom_up()) {
    const auto& u = unary[idx];
    double child = cell[u.child];
    if (child == kLogZero || u.log_weight == kLogZero) continue;
    cell[u.parent] = log_add(cell[u.parent], u.log_weight + child);
  }
}

}  // namespace

Chart inside(const BinarizedGrammar& g, std::span<const SymbolId> sentence) {
  if (sentence.empty()) throw Error("cannot parse an empty sentence");
  Chart c({sentence.begin(), sentence.end()}, g.nonterminal_count());
  const std::size_t n = sentence.size();
  const NtIndex nts = g.nonterminal_count();
  const auto lexical = g.lexical();
  const auto binary = g.binary();

  for (std::size_t i = 0; i < n; ++i) {
    if (sentence[i] == kOov) {
      c.oov_ = i;
      return c;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double* cell = c.cell(c.inside_, i, i + 1);
    for (std::size_t li : g.lexical_for(sentence[i])) {
      const auto& r = lexical[li];
      if (r.log_weight == kLogZero) continue;
      cell[r.parent] = log_add(cell[r.parent], r.log_weight);
    }
    apply_unary_inside(g, cell);
  }
  for (std::size_t len = 2; len <= n; ++len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      const std::size_t j = i + len;
      double* cell = c.cell(c.inside_, i, j);
      for (std::size_t k = i + 1; k < j; ++k) {
        const double* left = c.cell(c.inside_, i, k);
        const double* right = c.cell(c.inside_, k, j);
        for (NtIndex b = 0; b < nts; ++b) {
          const double lb = left[b];
          if (lb == kLogZero) continue;
          for (std::size_t bi : g.binary_by_left(b)) {
            const auto& r = binary[bi];
            const double rc = right[r.right];
            if (rc == kLogZero || r.log_weight == kLogZero) continue;
            cell[r.parent] = log_add(cell[r.parent], r.log_weight + lb + rc);
          }
        }
      }
      apply_unary_inside(g, cell);
    }
  }
  c.marginal_ = c.inside(0, n, g.start());
  return c;
}

Chart inside(const BinarizedGrammar& g, std::span<const std::string> tokens) {
  return inside(g, encode_sentence(g.base(), tokens));
}

Chart outside(const BinarizedGrammar& g, Chart c) {
  if (!c.parsed()) throw Error("outside pass requested on an unparsed chart");
  const std::size_t n = c.length();
  const NtIndex nts = g.nonterminal_count();
  const auto unary = g.unary();
  const auto binary = g.binary();
  const auto order = g.unary_bottom_up();
  c.outside_.assign(c.inside_.size(), kLogZero);
  c.cell(c.outside_, 0, n)[g.start()] = 0.0;

  for (std::size_t len = n; len >= 1; --len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      const std::size_t j = i + len;
      double* out = c.cell(c.outside_, i, j);
      const double* in = c.cell(c.inside_, i, j);
      // Parents before children.
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto& u = unary[*it];
        const double o = out[u.parent];
        if (o == kLogZero || in[u.child] == kLogZero || u.log_weight == kLogZero) continue;
        out[u.child] = log_add(out[u.child], o + u.log_weight);
      }
      for (std::size_t k = i + 1; k < j; ++k) {
        const double* left_in = c.cell(c.inside_, i, k);
        const double* right_in = c.cell(c.inside_, k, j);
        double* left_out = c.cell(c.outside_, i, k);
        double* right_out = c.cell(c.outside_, k, j);
        for (NtIndex b = 0; b < nts; ++b) {
          const double lb = left_in[b];
          if (lb == kLogZero) continue;
          for (std::size_t bi : g.binary_by_left(b)) {
            const auto& r = binary[bi];
            const double o = out[r.parent];
            const double rc = right_in[r.right];
            if (o == kLogZero || rc == kLogZero || r.log_weight == kLogZero) continue;
            left_out[b] = log_add(left_out[b], o + r.log_weight + rc);
            right_out[r.right] = log_add(right_out[r.right], o + r.log_weight + lb);
          }
        }
      }
    }
  }
  return c;
}

CountVector expected_counts(const BinarizedGrammar& g, const Chart& c) {
  if (!c.parsed()) throw Error("expected counts requested on an unparsed chart");
  if (!c.has_outside()) throw Error("expected counts require an outside pass");
  CountVector counts(g.base().size());
  counts.sentences = 1;
  const std::size_t n = c.length();
  const NtIndex nts = g.nonterminal_count();
  const double z = c.marginal();
  const auto lexical = g.lexical();
  const auto unary = g.unary();
  const auto binary = g.binary();
  auto& cv = counts.counts;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t li : g.lexical_for(c.sentence()[i])) {
      const auto& r = lexical[li];
      const double o = c.outside(i, i + 1, r.parent);
      if (o == kLogZero || r.log_weight == kLogZero) continue;
      cv[r.origin] += std::exp(o + r.log_weight - z);
    }
  }
  for (std::size_t len = 1; len <= n; ++len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      const std::size_t j = i + len;
      for (const auto& u : unary) {
        const double o = c.outside(i, j, u.parent);
        const double in = c.inside(i, j, u.child);
        if (o == kLogZero || in == kLogZero || u.log_weight == kLogZero) continue;
        cv[u.origin] += std::exp(o + u.log_weight + in - z);
      }
      for (std::size_t k = i + 1; k < j; ++k) {
        for (NtIndex b = 0; b < nts; ++b) {
          const double lb = c.inside(i, k, b);
          if (lb == kLogZero) continue;
          for (std::size_t bi : g.binary_by_left(b)) {
            const auto& r = binary[bi];
            if (r.chain_internal) continue;
            const double o = c.outside(i, j, r.parent);
            const double rc = c.inside(k, j, r.right);
            if (o == kLogZero || rc == kLogZero || r.log_weight == kLogZero) continue;
            cv[r.origin] += std::exp(o + r.log_weight + lb + rc - z);
          }
        }
      }
    }
  }
  return counts;
}

// ---------------------------------------------------------------------------

namespace {

enum class BackKind : unsigned char { none, lexical, unary, binary };

struct Back {
  BackKind kind = BackKind::none;
  std::size_t rule = 0;
  std::size_t split = 0;
  RuleIndex origin = 0;
};

bool near_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(b)); }

// Strictly better score wins; near-equal scores go to the lowest origin rule,
// then the leftmost split.
bool improves(double score, RuleIndex origin, std::size_t split, double best, const Back& back) {
  if (score == kLogZero) return false;
  if (back.kind == BackKind::none) return true;
  if (near_equal(score, best)) {
    if (origin != back.origin) return origin < back.origin;
    return split < back.split;
  }
  return score > best;
}

class ViterbiChart {
 public:
  ViterbiChart(const BinarizedGrammar& g, std::span<const SymbolId> sentence)
      : g_(g), sentence_(sentence), n_(sentence.size()), nts_(g.nonterminal_count()) {
    best_.assign(n_ * n_ * nts_, kLogZero);
    back_.assign(n_ * n_ * nts_, Back{});
  }

  void fill() {
    const auto lexical = g_.lexical();
    const auto binary = g_.binary();
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t li : g_.lexical_for(sentence_[i])) {
        const auto& r = lexical[li];
        offer(i, i + 1, r.parent, r.log_weight, {BackKind::lexical, li, 0, r.origin});
      }
      unary_pass(i, i + 1);
    }
    for (std::size_t len = 2; len <= n_; ++len) {
      for (std::size_t i = 0; i + len <= n_; ++i) {
        const std::size_t j = i + len;
        for (std::size_t k = i + 1; k < j; ++k) {
          for (NtIndex b = 0; b < nts_; ++b) {
            const double lb = best_[at(i, k, b)];
            if (lb == kLogZero) continue;
            for (std::size_t bi : g_.binary_by_left(b)) {
              const auto& r = binary[bi];
              const double rc = best_[at(k, j, r.right)];
              if (rc == kLogZero || r.log_weight == kLogZero) continue;
              offer(i, j, r.parent, r.log_weight + lb + rc, {BackKind::binary, bi, k, r.origin});
            }
          }
        }
        unary_pass(i, j);
      }
    }
  }

  double score(std::size_t i, std::size_t j, NtIndex a) const { return best_[at(i, j, a)]; }

  // Subtrees for (i, j, a); intermediate chain symbols are spliced into
  // their parent's child list.
  void build(std::size_t i, std::size_t j, NtIndex a, std::vector<Tree>& out) const {
    const Back& bp = back_[at(i, j, a)];
    std::vector<Tree> kids;
    switch (bp.kind) {
      case BackKind::lexical:
        kids.push_back(Tree::leaf(g_.base().name(sentence_[i])));
        break;
      case BackKind::unary:
        build(i, j, g_.unary()[bp.rule].child, kids);
        break;
      case BackKind::binary: {
        const auto& r = g_.binary()[bp.rule];
        build(i, bp.split, r.left, kids);
        build(bp.split, j, r.right, kids);
        break;
      }
      case BackKind::none:
        throw Error("viterbi backpointer missing");
    }
    if (g_.is_intermediate(a)) {
      for (auto& k : kids) out.push_back(std::move(k));
    } else {
      out.push_back(Tree::node(g_.nt_name(a), std::move(kids)));
    }
  }

 private:
  std::size_t at(std::size_t i, std::size_t j, NtIndex a) const { return (i * n_ + (j - 1)) * nts_ + a; }

  void offer(std::size_t i, std::size_t j, NtIndex a, double score, Back bp) {
    const std::size_t idx = at(i, j, a);
    if (improves(score, bp.origin, bp.split, best_[idx], back_[idx])) {
      best_[idx] = score;
      back_[idx] = bp;
    }
  }

  void unary_pass(std::size_t i, std::size_t j) {
    const auto unary = g_.unary();
    for (std::size_t idx : g_.unary_bottom_up()) {
      const auto& u = unary[idx];
      const double child = best_[at(i, j, u.child)];
      if (child == kLogZero || u.log_weight == kLogZero) continue;
      offer(i, j, u.parent, u.log_weight + child, {BackKind::unary, idx, 0, u.origin});
    }
  }

  const BinarizedGrammar& g_;
  std::span<const SymbolId> sentence_;
  std::size_t n_;
  NtIndex nts_;
  std::vector<double> best_;
  std::vector<Back> back_;
};

}  // namespace

ViterbiResult viterbi_parse(const BinarizedGrammar& g, std::span<const SymbolId> sentence) {
  if (sentence.empty()) throw Error("cannot parse an empty sentence");
  ViterbiResult result;
  if (std::find(sentence.begin(), sentence.end(), kOov) != sentence.end()) return result;
  ViterbiChart chart(g, sentence);
  chart.fill();
  const double score = chart.score(0, sentence.size(), g.start());
  if (score == kLogZero) return result;
  std::vector<Tree> roots;
  chart.build(0, sentence.size(), g.start(), roots);
  result.tree = std::move(roots.front());
  result.log_prob = score;
  return result;
}

ViterbiResult viterbi_parse(const BinarizedGrammar& g, std::span<const std::string> tokens) {
  return viterbi_parse(g, encode_sentence(g.base(), tokens));
}

// ---------------------------------------------------------------------------

namespace {

class Enumerator {
 public:
  Enumerator(const Grammar& g, std::span<const SymbolId> sentence, std::size_t cap)
      : g_(g), sentence_(sentence), cap_(cap) {}

  std::size_t count(SymbolId a, std::size_t i, std::size_t j) {
    auto key = std::make_tuple(a, i, j);
    if (auto it = counts_.find(key); it != counts_.end()) {
      if (it->second == kInProgress) throw GrammarError("unary cycle reached during enumeration");
      return it->second;
    }
    counts_[key] = kInProgress;
    std::size_t total = 0;
    for (RuleIndex ri : g_.rules_for(a)) {
      const auto& wr = g_.rule(ri);
      if (wr.weight <= 0.0) continue;
      total = saturating_add(total, count_rhs(wr.rule, 0, i, j));
    }
    counts_[key] = total;
    return total;
  }

  const std::vector<EnumeratedParse>& parses(SymbolId a, std::size_t i, std::size_t j) {
    auto key = std::make_tuple(a, i, j);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    std::vector<EnumeratedParse> out;
    for (RuleIndex ri : g_.rules_for(a)) {
      const auto& wr = g_.rule(ri);
      if (wr.weight <= 0.0) continue;
      const double lw = std::log(wr.weight);
      if (wr.rule.kind == RuleKind::lexicalisation) {
        if (j == i + 1 && sentence_[i] == wr.rule.rhs[0])
          out.push_back({Tree::node(g_.name(a), {Tree::leaf(g_.name(sentence_[i]))}), wr.weight, lw});
        continue;
      }
      std::vector<const EnumeratedParse*> chosen;
      expand(wr.rule, 0, i, j, chosen, [&](const std::vector<const EnumeratedParse*>& kids) {
        std::vector<Tree> children;
        double p = wr.weight, lp = lw;
        for (const auto* k : kids) {
          children.push_back(k->tree);
          p *= k->probability;
          lp += k->log_prob;
        }
        out.push_back({Tree::node(g_.name(a), std::move(children)), p, lp});
      });
    }
    return memo_.emplace(key, std::move(out)).first->second;
  }

  std::size_t cap() const { return cap_; }

 private:
  static constexpr std::size_t kInProgress = static_cast<std::size_t>(-1);

  std::size_t saturating_add(std::size_t a, std::size_t b) const { return std::min(cap_ + 1, a + b); }
  std::size_t saturating_mul(std::size_t a, std::size_t b) const {
    if (a == 0 || b == 0) return 0;
    if (a > (cap_ + 1) / b + 1) return cap_ + 1;
    return std::min(cap_ + 1, a * b);
  }

  // Number of ways rule.rhs[pos..] derives sentence[i, j).
  std::size_t count_rhs(const Rule& r, std::size_t pos, std::size_t i, std::size_t j) {
    if (r.kind == RuleKind::lexicalisation) return (j == i + 1 && sentence_[i] == r.rhs[0]) ? 1 : 0;
    const std::size_t remaining = r.rhs.size() - pos;
    if (remaining == 1) return count(r.rhs[pos], i, j);
    std::size_t total = 0;
    for (std::size_t k = i + 1; k + (remaining - 1) <= j; ++k) {
      std::size_t head = count(r.rhs[pos], i, k);
      if (head == 0) continue;
      total = saturating_add(total, saturating_mul(head, count_rhs(r, pos + 1, k, j)));
    }
    return total;
  }

  template <typename Emit>
  void expand(const Rule& r, std::size_t pos, std::size_t i, std::size_t j, std::vector<const EnumeratedParse*>& chosen,
              Emit&& emit) {
    const std::size_t remaining = r.rhs.size() - pos;
    auto recurse = [&](std::size_t k) {
      const auto& options = parses(r.rhs[pos], i, k);
      for (const auto& opt : options) {
        chosen.push_back(&opt);
        if (remaining == 1)
          emit(chosen);
        else
          expand(r, pos + 1, k, j, chosen, emit);
        chosen.pop_back();
      }
    };
    if (remaining == 1) {
      recurse(j);
      return;
    }
    for (std::size_t k = i + 1; k + (remaining - 1) <= j; ++k) recurse(k);
  }

  const Grammar& g_;
  std::span<const SymbolId> sentence_;
  std::size_t cap_;
  std::map<std::tuple<SymbolId, std::size_t, std::size_t>, std::size_t> counts_;
  std::map<std::tuple<SymbolId, std::size_t, std::size_t>, std::vector<EnumeratedParse>> memo_;
};

}  // namespace

std::vector<EnumeratedParse> enumerate_parses(const Grammar& g, std::span<const std::string> tokens, std::size_t cap) {
  if (tokens.empty()) throw Error("cannot parse an empty sentence");
  auto sentence = encode_sentence(g, tokens);
  if (std::find(sentence.begin(), sentence.end(), kOov) != sentence.end()) return {};
  Enumerator e(g, sentence, cap);
  if (e.count(g.start(), 0, sentence.size()) > cap)
    throw Error("parse count exceeds enumeration cap of " + std::to_string(cap));
  return e.parses(g.start(), 0, sentence.size());
}

}  // namespace matgi
