#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matgi/estimate.hpp"
#include "matgi/grammar.hpp"

namespace matgi {

struct Stage {
  std::string name;
  // Categories newly made available by this stage (may repeat earlier ones).
  std::vector<std::string> categories;
};

struct CurriculumPlan {
  std::string name;
  std::vector<Stage> stages;
  double s_p = 0.01;  // production prior scale
  double s_l = 0.1;   // lexicalisation prior scale
  double eta = 0.001; // mass reserved for newly available rules
};

// Stage config text: optional `plan = <builtin>` line, scalars `s_p`, `s_l`,
// `eta`, and ordered [stage] blocks with `name` and `categories`. A config
// with its own [stage] blocks may not also name a builtin plan.
CurriculumPlan load_stage_config(std::string_view text);

// "growing", "inward" or "continuity".
CurriculumPlan builtin_plan(std::string_view name);
std::vector<std::string> builtin_plan_names();

// Builtin name or path to a config file.
CurriculumPlan resolve_plan(const std::string& name_or_path);

struct StageAssignment {
  std::vector<std::string> stage_names;
  // 1-based stage per oracle rule.
  std::vector<int> stage_of_rule;
  // cumulative[k - 1]: ascending oracle rule indices available at stage k.
  std::vector<std::vector<RuleIndex>> cumulative;

  int stage_count() const noexcept { return static_cast<int>(cumulative.size()); }
  std::span<const RuleIndex> available(int k) const { return cumulative.at(static_cast<std::size_t>(k - 1)); }
  std::vector<RuleIndex> introduced(int k) const;
};

// A rule belongs to the earliest stage at which its lhs and every
// nonterminal on its rhs are available. Throws GrammarError naming the rules
// that no stage covers.
StageAssignment assign_rules(const Grammar& g, const CurriculumPlan& plan);

// Dirichlet parameters for stage k + 1, aligned with assignment.available(k + 1).
// prev is the completed stage-k summary, aligned with assignment.available(k).
//   carried-over rule:  N^k * s * p^k + 0.1
//   new rule with lhs A: N^k * s * eta / (new rules of A at stage k + 1) + 0.1
// with s = s_p for productions and s_l for lexicalisations.
std::vector<double> transfer_pseudocounts(const Grammar& g, const PosteriorSummary& prev,
                                          const StageAssignment& assignment, int k, const CurriculumPlan& plan);

inline constexpr double kBasePseudocount = 0.1;

struct StageResult {
  int stage = 0;
  std::string name;
  std::vector<RuleIndex> rules;  // oracle indices, ascending
  Grammar grammar;               // posterior means over `rules`
  PosteriorSummary posterior;
  std::size_t parsed() const noexcept { return posterior.parsed; }
};

struct CurriculumOptions {
  std::optional<std::uint64_t> jitter_seed;
  // Start stage 1 from the oracle weights (renormalized over the stage's
  // rules) instead of uniform weights.
  bool oracle_init = false;
};

// Runs VB stage by stage. Stage 1 uses the constant prior 0.1 and uniform
// initial weights; later stages start from the prior mean of the transferred
// pseudocounts. Throws StageAbort when a stage parses nothing.
std::vector<StageResult> run_curriculum(const Grammar& g, const Corpus& corpus, const CurriculumPlan& plan,
                                        const EstimatorConfig& cfg, const CurriculumOptions& options = {});

std::string stages_csv(std::span<const StageResult> results);

}  // namespace matgi
