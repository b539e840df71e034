#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "matgi/curriculum.hpp"
#include "matgi/eval.hpp"
#include "matgi/grammar.hpp"
#include "matgi/report.hpp"
#include "matgi/treebank.hpp"

namespace matgi {

// Everything a run needs. Paths left empty are not used.
struct RunConfig {
  std::string treebank;
  std::string grammar;       // oracle grammar; extracted from the treebank when empty
  std::string sentences;     // training corpus; treebank yields when empty
  std::string child_speech;  // log-likelihood evaluation set
  std::string curriculum = "growing";
  std::optional<double> s_p, s_l, eta;  // override the plan's values
  std::optional<std::size_t> f_m;
  std::size_t f_max = 20;
  int iterations = 20;
  double tolerance = 0.0;
  std::size_t eval_sample = 1000;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool reproducible = false;
  bool include_root = true;
  double jsd_base = 2.0;
  bool jsd_preterminals = false;
  bool force = false;
  unsigned threads = 1;
  bool oracle_init = false;
  std::optional<std::uint64_t> jitter_seed;
};

// Flat `key = value` config; keys are the long flag names without dashes
// (`s-p`, `child-speech`, ...). Values already set in `into` by flags win
// only when the caller applies flags afterwards.
void apply_config_text(RunConfig& into, const std::string& text);

// Refuses an existing non-empty directory unless force; creates it.
void prepare_output_directory(const std::string& dir, bool force);

struct ExtractOutcome {
  Grammar oracle;
  std::size_t f_m = 0;
  std::vector<CoverageRow> coverage;
  std::size_t trees = 0;
  std::size_t vocabulary = 0;
};

// Filters one-word sentences, sweeps f_m = 1..f_max and keeps the smallest
// grammar with full coverage (or the forced f_m). Writes oracle.gr and
// coverage.csv when cfg.out is set.
ExtractOutcome cmd_extract(const RunConfig& cfg);

struct TrainOutcome {
  std::vector<StageResult> stages;
  std::vector<StageMetrics> metrics;
};

// Runs the curriculum and evaluates every stage grammar. Writes G_<k>.gr,
// trace_<k>.csv, parses_<k>.txt, stages.csv and the report files.
TrainOutcome cmd_train(const RunConfig& cfg);

struct ParseOutcome {
  std::size_t sentences = 0;
  std::size_t unparsed = 0;
};

std::string noparse_sentinel(const std::vector<std::string>& tokens);

// One bracketed Viterbi tree (or NOPARSE sentinel) per input sentence.
ParseOutcome cmd_parse(const std::string& grammar_path, const std::string& sentences_path, std::ostream& out);

// Scores one grammar against the oracle (cfg.grammar) and the treebank.
StageMetrics cmd_eval(const RunConfig& cfg, const std::string& induced_path);

struct SweepGrid {
  std::vector<std::string> curricula;
  std::vector<double> s_l, s_p, eta;
};

SweepGrid load_sweep_grid(const std::string& text);

struct SweepRow {
  std::string curriculum;
  double s_l = 0, s_p = 0, eta = 0;
  double f1 = 0, loglik = 0, mean_jsd = 0;
  std::string error;  // empty on success
  bool ok() const noexcept { return error.empty(); }
};

struct WilcoxonRow {
  std::string metric;
  Alternative alternative = Alternative::a_greater;
  WilcoxonResult result;
};

struct SweepOutcome {
  std::vector<SweepRow> rows;
  std::vector<WilcoxonRow> wilcoxon;  // empty unless exactly two curricula
};

// Runs cmd_train for each (curriculum, s_l, s_p, eta) cell under
// cfg.out/<cell>. Failing cells are recorded and skipped. With two curricula
// A and B: F1 and log-likelihood test A > B, JSD tests A < B.
SweepOutcome cmd_sweep(const RunConfig& cfg, const SweepGrid& grid, unsigned jobs = 1);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string wilcoxon_csv(const std::vector<WilcoxonRow>& rows);

}  // namespace matgi
