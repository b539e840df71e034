#include "matgi/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "matgi/error.hpp"
#include "matgi/text.hpp"

namespace matgi {

namespace builtin {
extern const std::string_view kGrowing;
extern const std::string_view kInward;
extern const std::string_view kContinuity;
}  // namespace builtin

namespace {

std::vector<std::string> split_list(std::string_view value) {
  std::string copy(value);
  std::replace(copy.begin(), copy.end(), ',', ' ');
  return split_whitespace(copy);
}

double parse_scalar(const std::string& key, std::string_view value, std::size_t line) {
  double v = 0.0;
  if (!parse_double(trim(value), v) || !std::isfinite(v)) throw ParseError(line, "bad value for '" + key + "'");
  if (v < 0.0) throw ParseError(line, "'" + key + "' must be nonnegative");
  return v;
}

void check_plan(const CurriculumPlan& plan) {
  if (plan.stages.empty()) throw Error("curriculum has no stages");
  std::set<std::string> names;
  for (const auto& s : plan.stages) {
    if (s.name.empty()) throw Error("curriculum stage without a name");
    if (!names.insert(s.name).second) throw Error("duplicate stage name '" + s.name + "'");
    if (s.categories.empty()) throw Error("stage '" + s.name + "' has no categories");
  }
  if (plan.s_p < 0.0 || plan.s_l < 0.0 || plan.eta < 0.0) throw Error("s_p, s_l and eta must be nonnegative");
}

}  // namespace

CurriculumPlan load_stage_config(std::string_view text) {
  CurriculumPlan plan;
  std::optional<std::string> base;
  std::optional<double> s_p, s_l, eta;
  bool in_stage = false;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (line == "[stage]") {
      plan.stages.emplace_back();
      in_stage = true;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value' or '[stage]'");
    std::string key(trim(line.substr(0, eq)));
    auto value = trim(line.substr(eq + 1));
    if (key == "s_p") {
      s_p = parse_scalar(key, value, line_no);
    } else if (key == "s_l") {
      s_l = parse_scalar(key, value, line_no);
    } else if (key == "eta") {
      eta = parse_scalar(key, value, line_no);
    } else if (key == "plan" && !in_stage) {
      base = std::string(value);
    } else if (key == "name" && in_stage) {
      plan.stages.back().name = std::string(value);
    } else if (key == "categories" && in_stage) {
      plan.stages.back().categories = split_list(value);
    } else {
      throw ParseError(line_no, "unknown key '" + key + "'");
    }
  }
  if (base) {
    if (!plan.stages.empty()) throw Error("config names builtin plan '" + *base + "' and also defines stages");
    auto stages = builtin_plan(*base).stages;
    plan.stages = std::move(stages);
    plan.name = *base;
  }
  if (s_p) plan.s_p = *s_p;
  if (s_l) plan.s_l = *s_l;
  if (eta) plan.eta = *eta;
  check_plan(plan);
  return plan;
}

std::vector<std::string> builtin_plan_names() { return {"growing", "inward", "continuity"}; }

CurriculumPlan builtin_plan(std::string_view name) {
  std::string_view text;
  if (name == "growing")
    text = builtin::kGrowing;
  else if (name == "inward")
    text = builtin::kInward;
  else if (name == "continuity")
    text = builtin::kContinuity;
  else
    throw Error("unknown builtin curriculum '" + std::string(name) + "'");
  auto plan = load_stage_config(text);
  plan.name = std::string(name);
  return plan;
}

CurriculumPlan resolve_plan(const std::string& name_or_path) {
  auto names = builtin_plan_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin_plan(name_or_path);
  auto plan = load_stage_config(read_file(name_or_path));
  if (plan.name.empty()) plan.name = name_or_path;
  return plan;
}

// ---------------------------------------------------------------------------

std::vector<RuleIndex> StageAssignment::introduced(int k) const {
  std::vector<RuleIndex> out;
  for (RuleIndex r : available(k))
    if (stage_of_rule[r] == k) out.push_back(r);
  return out;
}

StageAssignment assign_rules(const Grammar& g, const CurriculumPlan& plan) {
  check_plan(plan);
  constexpr int kNever = std::numeric_limits<int>::max();
  std::unordered_map<std::string, int> first_stage;
  for (std::size_t k = 0; k < plan.stages.size(); ++k)
    for (const auto& c : plan.stages[k].categories) first_stage.emplace(c, static_cast<int>(k) + 1);
  auto stage_of_symbol = [&](SymbolId s) {
    auto it = first_stage.find(g.name(s));
    return it == first_stage.end() ? kNever : it->second;
  };

  StageAssignment a;
  for (const auto& s : plan.stages) a.stage_names.push_back(s.name);
  a.stage_of_rule.assign(g.size(), 0);
  std::vector<std::string> missing;
  for (RuleIndex i = 0; i < g.size(); ++i) {
    const auto& r = g.rule(i).rule;
    int k = stage_of_symbol(r.lhs);
    if (r.kind == RuleKind::production)
      for (SymbolId s : r.rhs) k = std::max(k, stage_of_symbol(s));
    if (k == kNever)
      missing.push_back(g.rule_string(i));
    else
      a.stage_of_rule[i] = k;
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += "\n  " + missing[i];
    if (missing.size() > 20) list += "\n  ... (" + std::to_string(missing.size() - 20) + " more)";
    throw GrammarError(std::to_string(missing.size()) + " rule(s) not covered by curriculum '" + plan.name +
                       "':" + list);
  }
  a.cumulative.resize(plan.stages.size());
  for (std::size_t k = 0; k < plan.stages.size(); ++k)
    for (RuleIndex i = 0; i < g.size(); ++i)
      if (a.stage_of_rule[i] <= static_cast<int>(k) + 1) a.cumulative[k].push_back(i);
  return a;
}

std::vector<double> transfer_pseudocounts(const Grammar& g, const PosteriorSummary& prev,
                                          const StageAssignment& assignment, int k, const CurriculumPlan& plan) {
  if (k < 1 || k >= assignment.stage_count()) throw Error("transfer requested past the last stage");
  const auto before = assignment.available(k);
  const auto after = assignment.available(k + 1);
  if (prev.means.size() != before.size())
    throw Error("stage " + std::to_string(k) + " summary does not cover its cumulative rule set");

  const double n = static_cast<double>(prev.parsed);
  std::unordered_map<SymbolId, std::size_t> new_per_lhs;
  for (RuleIndex r : after)
    if (assignment.stage_of_rule[r] == k + 1) ++new_per_lhs[g.rule(r).rule.lhs];

  std::vector<double> alphas;
  alphas.reserve(after.size());
  std::size_t j = 0;
  for (RuleIndex r : after) {
    const auto& rule = g.rule(r).rule;
    const double s = rule.kind == RuleKind::production ? plan.s_p : plan.s_l;
    while (j < before.size() && before[j] < r) ++j;
    if (j < before.size() && before[j] == r) {
      alphas.push_back(n * s * prev.means[j] + kBasePseudocount);
    } else {
      const double fresh = static_cast<double>(new_per_lhs.at(rule.lhs));
      alphas.push_back(n * s * plan.eta / fresh + kBasePseudocount);
    }
  }
  return alphas;
}

std::vector<StageResult> run_curriculum(const Grammar& g, const Corpus& corpus, const CurriculumPlan& plan,
                                        const EstimatorConfig& cfg, const CurriculumOptions& options) {
  const auto assignment = assign_rules(g, plan);
  std::vector<StageResult> results;
  for (int k = 1; k <= assignment.stage_count(); ++k) {
    const auto& stage = plan.stages[static_cast<std::size_t>(k - 1)];
    const auto rules = assignment.available(k);
    Grammar sub = g.restricted_to(rules);
    if (k == 1) {
      sub = sub.with_pseudocounts(std::vector<double>(rules.size(), kBasePseudocount));
      sub = options.oracle_init ? normalize(sub) : uniform_weights(sub);
      if (options.jitter_seed) sub = jitter_weights(sub, *options.jitter_seed);
    } else {
      auto alphas = transfer_pseudocounts(g, results.back().posterior, assignment, k - 1, plan);
      sub = sub.with_pseudocounts(alphas);
      sub = sub.with_weights(posterior_mean(sub, alphas, std::vector<double>(alphas.size(), 0.0)));
    }
    PosteriorSummary summary;
    try {
      summary = run_vb(sub, corpus, cfg);
    } catch (const NoParsableSentences&) {
      throw StageAbort(stage.name, "no corpus sentence can be parsed with the " + std::to_string(rules.size()) +
                                       " rules available at stage " + std::to_string(k));
    }
    StageResult result;
    result.stage = k;
    result.name = stage.name;
    result.rules.assign(rules.begin(), rules.end());
    result.grammar = sub.with_weights(summary.means);
    result.posterior = std::move(summary);
    results.push_back(std::move(result));
  }
  return results;
}

std::string stages_csv(std::span<const StageResult> results) {
  std::string out = "stage,rules_available,N_parsed,final_loglik\n";
  for (const auto& r : results) {
    double final_ll = r.posterior.trace.empty() ? std::nan("") : r.posterior.trace.back().log_likelihood;
    out += std::to_string(r.stage) + "," + std::to_string(r.rules.size()) + "," + std::to_string(r.parsed()) + "," +
           format_double(final_ll) + "\n";
  }
  return out;
}

}  // namespace matgi
