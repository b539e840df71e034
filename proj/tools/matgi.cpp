// matgi: staged grammar induction from a treebank.
//
//   matgi extract --treebank tb.txt --out run/
//   matgi train   --treebank tb.txt --curriculum growing --seed 1 --out run/
//   matgi parse   --grammar G.gr --sentences s.txt
//   matgi eval    --grammar oracle.gr --induced G_5.gr --treebank tb.txt --seed 1
//   matgi sweep   --treebank tb.txt --grid grid.cfg --seed 1 --out sweep/

#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "matgi/error.hpp"
#include "matgi/pipeline.hpp"
#include "matgi/text.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAbort = 2;

// Flag values are collected apart from the config so that flags given on
// the command line override the config file.
class Flags {
 public:
  void add_to(CLI::App& cmd, bool training) {
    cmd.add_option("--config", config_path_, "flat key = value run config");
    str(cmd, "--treebank", &matgi::RunConfig::treebank, "bracketed treebank, one tree per line");
    str(cmd, "--grammar", &matgi::RunConfig::grammar, "oracle grammar file");
    str(cmd, "--sentences", &matgi::RunConfig::sentences, "training sentences, one per line");
    str(cmd, "--child-speech", &matgi::RunConfig::child_speech, "sentences scored for log-likelihood");
    str(cmd, "--out", &matgi::RunConfig::out, "output directory");
    num<std::size_t>(cmd, "--f-m", "production frequency threshold", [](auto& c, auto v) { c.f_m = v; });
    num<std::size_t>(cmd, "--f-max", "largest f_m in the coverage sweep (default 20)",
                     [](auto& c, auto v) { c.f_max = v; });
    num<std::size_t>(cmd, "--eval-sample", "F1 evaluation sample size (default 1000)",
                     [](auto& c, auto v) { c.eval_sample = v; });
    num<std::uint64_t>(cmd, "--seed", "random seed for sampling", [](auto& c, auto v) { c.seed = v; });
    num<double>(cmd, "--jsd-base", "logarithm base for JSD (default 2)", [](auto& c, auto v) { c.jsd_base = v; });
    flag(cmd, "--include-root,!--exclude-root", "score the whole-sentence bracket",
         [](auto& c, bool v) { c.include_root = v; });
    flag(cmd, "--jsd-preterminals", "also score preterminal distributions",
         [](auto& c, bool v) { c.jsd_preterminals = v; });
    flag(cmd, "--force", "overwrite an existing output directory", [](auto& c, bool v) { c.force = v; });
    if (!training) return;
    str(cmd, "--curriculum", &matgi::RunConfig::curriculum, "growing, inward, continuity or a stage config file");
    num<double>(cmd, "--s-p", "production prior scale", [](auto& c, auto v) { c.s_p = v; });
    num<double>(cmd, "--s-l", "lexicalisation prior scale", [](auto& c, auto v) { c.s_l = v; });
    num<double>(cmd, "--eta", "prior mass for newly available rules", [](auto& c, auto v) { c.eta = v; });
    num<int>(cmd, "--iterations", "VB iterations per stage (default 20)", [](auto& c, auto v) { c.iterations = v; });
    num<double>(cmd, "--tolerance", "relative log-likelihood change that stops a stage early",
                [](auto& c, auto v) { c.tolerance = v; });
    num<unsigned>(cmd, "--threads", "E-step worker threads", [](auto& c, auto v) { c.threads = v; });
    num<std::uint64_t>(cmd, "--jitter", "perturb stage-1 weights with this seed",
                       [](auto& c, auto v) { c.jitter_seed = v; });
    flag(cmd, "--reproducible", "fixed-order parallel reductions", [](auto& c, bool v) { c.reproducible = v; });
    auto* init = cmd.add_option("--init", init_, "stage-1 weights: uniform or oracle")
                     ->check(CLI::IsMember({"uniform", "oracle"}));
    setters_.push_back([init, this](matgi::RunConfig& c) {
      if (init->count()) c.oracle_init = init_ == "oracle";
    });
  }

  matgi::RunConfig resolve() const {
    matgi::RunConfig cfg;
    if (!config_path_.empty()) matgi::apply_config_text(cfg, matgi::read_file(config_path_));
    for (const auto& set : setters_) set(cfg);
    return cfg;
  }

 private:
  using Setter = std::function<void(matgi::RunConfig&)>;

  void str(CLI::App& cmd, const std::string& name, std::string matgi::RunConfig::*field, const std::string& help) {
    auto& slot = strings_.emplace_back(std::make_unique<std::string>());
    auto* opt = cmd.add_option(name, *slot, help);
    setters_.push_back([opt, field, value = slot.get()](matgi::RunConfig& c) {
      if (opt->count()) c.*field = *value;
    });
  }

  template <typename T, typename F>
  void num(CLI::App& cmd, const std::string& name, const std::string& help, F apply) {
    auto value = std::make_shared<T>();
    auto* opt = cmd.add_option(name, *value, help);
    setters_.push_back([opt, value, apply](matgi::RunConfig& c) {
      if (opt->count()) apply(c, *value);
    });
  }

  template <typename F>
  void flag(CLI::App& cmd, const std::string& name, const std::string& help, F apply) {
    auto value = std::make_shared<bool>(false);
    auto* opt = cmd.add_flag(name, *value, help);
    setters_.push_back([opt, value, apply](matgi::RunConfig& c) {
      if (opt->count()) apply(c, *value);
    });
  }

  std::string config_path_;
  std::string init_;
  std::vector<std::unique_ptr<std::string>> strings_;
  std::vector<Setter> setters_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staged PCFG induction with Dirichlet priors"};
  app.require_subcommand(1);

  auto* extract = app.add_subcommand("extract", "read an oracle grammar off a treebank");
  Flags extract_flags;
  extract_flags.add_to(*extract, false);

  auto* train = app.add_subcommand("train", "run a curriculum and evaluate every stage");
  Flags train_flags;
  train_flags.add_to(*train, true);

  auto* parse = app.add_subcommand("parse", "Viterbi parse sentences with a grammar");
  std::string parse_grammar, parse_sentences;
  parse->add_option("--grammar", parse_grammar, "grammar file")->required();
  parse->add_option("--sentences", parse_sentences, "sentences, one per line")->required();

  auto* eval = app.add_subcommand("eval", "score a grammar against the oracle");
  Flags eval_flags;
  eval_flags.add_to(*eval, false);
  std::string induced;
  eval->add_option("--induced", induced, "grammar to evaluate")->required();

  auto* sweep = app.add_subcommand("sweep", "train every cell of a hyperparameter grid");
  Flags sweep_flags;
  sweep_flags.add_to(*sweep, true);
  std::string grid_path;
  unsigned jobs = 1;
  sweep->add_option("--grid", grid_path, "grid file: curricula, s_l, s_p and eta lists")->required();
  sweep->add_option("--jobs", jobs, "cells run concurrently (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*extract) {
      auto cfg = extract_flags.resolve();
      auto out = matgi::cmd_extract(cfg);
      std::cerr << "f_m=" << out.f_m << " productions=" << out.oracle.production_count()
                << " lexicalisations=" << out.oracle.lexicalisation_count() << " vocabulary=" << out.vocabulary
                << " trees=" << out.trees << "\n";
      if (cfg.out.empty()) std::cout << matgi::write_grammar_file(out.oracle);
    } else if (*train) {
      auto out = matgi::cmd_train(train_flags.resolve());
      for (const auto& m : out.metrics)
        std::cerr << "stage " << m.stage << " (" << m.name << "): parsed=" << m.parsed
                  << " f1=" << matgi::format_double(m.f1.f1) << " jsd=" << matgi::format_double(m.jsd.mean) << "\n";
    } else if (*parse) {
      auto out = matgi::cmd_parse(parse_grammar, parse_sentences, std::cout);
      if (out.sentences == 0) std::cerr << "warning: no sentences in " << parse_sentences << "\n";
      std::cerr << out.unparsed << " of " << out.sentences << " sentences had no parse\n";
    } else if (*eval) {
      auto m = matgi::cmd_eval(eval_flags.resolve(), induced);
      std::cout << matgi::metrics_csv(std::span<const matgi::StageMetrics>(&m, 1));
    } else if (*sweep) {
      auto cfg = sweep_flags.resolve();
      auto out = matgi::cmd_sweep(cfg, matgi::load_sweep_grid(matgi::read_file(grid_path)), jobs);
      std::size_t failed = 0;
      for (const auto& row : out.rows)
        if (!row.ok()) {
          ++failed;
          std::cerr << "cell " << row.curriculum << " s_l=" << row.s_l << " s_p=" << row.s_p << " eta=" << row.eta
                    << " failed: " << row.error << "\n";
        }
      std::cerr << out.rows.size() - failed << " of " << out.rows.size() << " cells completed\n";
    }
  } catch (const matgi::StageAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
