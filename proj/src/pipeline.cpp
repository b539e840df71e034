#include "matgi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

#include <json.hpp>

#include "matgi/binarize.hpp"
#include "matgi/chart.hpp"
#include "matgi/error.hpp"
#include "matgi/text.hpp"
#include "matgi/tree.hpp"

namespace matgi {

namespace fs = std::filesystem;

namespace {

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!parse_double(value, v)) throw Error("config key '" + key + "': bad number '" + value + "'");
  return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw Error("config key '" + key + "': bad integer '" + value + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw Error("config key '" + key + "': bad boolean '" + value + "'");
}

std::vector<Tree> load_filtered_treebank(const std::string& path) {
  auto trees = parse_trees(read_file(path));
  auto kept = filter_sentences(trees, 1);
  if (kept.empty()) throw Error("treebank '" + path + "' has no sentence longer than one token");
  return kept;
}

ExtractOutcome select_oracle(const std::vector<Tree>& trees, const RunConfig& cfg) {
  std::size_t top = std::max<std::size_t>(cfg.f_max, cfg.f_m.value_or(1));
  std::vector<std::size_t> f_values;
  for (std::size_t f = 1; f <= top; ++f) f_values.push_back(f);

  ExtractOutcome out;
  out.coverage = coverage_sweep(trees, f_values);
  out.trees = trees.size();
  if (cfg.f_m) {
    out.f_m = *cfg.f_m;
  } else {
    const CoverageRow* best = nullptr;
    for (const auto& row : out.coverage)
      if (row.coverage == 1.0) best = &row;
    if (!best) {
      auto it = std::max_element(out.coverage.begin(), out.coverage.end(),
                                 [](const auto& a, const auto& b) { return a.coverage < b.coverage; });
      throw Error("no f_m reaches full coverage; best is " + format_double(it->coverage) + " at f_m=" +
                  std::to_string(it->f_m));
    }
    out.f_m = best->f_m;
  }
  auto counts = count_rules(trees);
  out.vocabulary = counts.vocabulary;
  out.oracle = grammar_from_counts(counts, out.f_m);
  return out;
}

std::vector<Tree> evaluation_sample(const std::vector<Tree>& trees, std::size_t n, std::optional<std::uint64_t> seed) {
  if (trees.size() <= n) return trees;
  if (!seed) throw Error("--seed is required to sample " + std::to_string(n) + " of " + std::to_string(trees.size()) +
                         " evaluation trees");
  std::vector<Tree> sample;
  sample.reserve(n);
  std::mt19937_64 rng(*seed);
  std::sample(trees.begin(), trees.end(), std::back_inserter(sample), n, rng);
  return sample;
}

struct Inputs {
  Grammar oracle;
  std::vector<Tree> gold;  // evaluation sample
  Corpus corpus;
  std::optional<Corpus> child;
};

Inputs load_inputs(const RunConfig& cfg, const std::string& out_dir) {
  Inputs in;
  std::vector<Tree> trees;
  if (!cfg.treebank.empty()) trees = load_filtered_treebank(cfg.treebank);
  if (!cfg.grammar.empty()) {
    in.oracle = parse_grammar_file(read_file(cfg.grammar));
  } else {
    if (trees.empty()) throw Error("either --grammar or --treebank is required");
    in.oracle = select_oracle(trees, cfg).oracle;
    if (!out_dir.empty()) write_file((fs::path(out_dir) / "oracle.gr").string(), write_grammar_file(in.oracle));
  }
  if (!cfg.sentences.empty()) {
    in.corpus = parse_sentences(read_file(cfg.sentences));
  } else {
    for (const auto& t : trees) in.corpus.push_back(t.yield());
  }
  if (in.corpus.empty()) throw Error("training corpus is empty");
  if (!trees.empty()) in.gold = evaluation_sample(trees, cfg.eval_sample, cfg.seed);
  if (!cfg.child_speech.empty()) in.child = parse_sentences(read_file(cfg.child_speech));
  return in;
}

CurriculumPlan plan_for(const RunConfig& cfg) {
  auto plan = resolve_plan(cfg.curriculum);
  if (cfg.s_p) plan.s_p = *cfg.s_p;
  if (cfg.s_l) plan.s_l = *cfg.s_l;
  if (cfg.eta) plan.eta = *cfg.eta;
  if (plan.s_p < 0 || plan.s_l < 0 || plan.eta < 0) throw Error("s_p, s_l and eta must be non-negative");
  return plan;
}

EstimatorConfig estimator_for(const RunConfig& cfg) {
  EstimatorConfig e;
  e.mode = EstimatorMode::vb;
  e.iterations = cfg.iterations;
  e.tolerance = cfg.tolerance;
  e.reproducible = cfg.reproducible;
  e.threads = cfg.threads;
  return e;
}

struct Evaluation {
  StageMetrics metrics;
  std::string parses;
};

Evaluation evaluate(const Grammar& g, const Inputs& in, const RunConfig& cfg) {
  Evaluation ev;
  const auto bg = binarize(g);
  std::vector<std::optional<Tree>> predicted;
  predicted.reserve(in.gold.size());
  for (const auto& gold : in.gold) {
    auto tokens = gold.yield();
    auto result = viterbi_parse(bg, std::span<const std::string>(tokens));
    ev.parses += result.tree ? to_string(*result.tree) : noparse_sentinel(tokens);
    ev.parses += '\n';
    predicted.push_back(std::move(result.tree));
  }
  if (!in.gold.empty()) ev.metrics.f1 = unlabelled_f1(in.gold, predicted, cfg.include_root);
  else ev.metrics.f1.f1 = std::nan("");
  JsdOptions jo;
  jo.base = cfg.jsd_base;
  jo.include_preterminals = cfg.jsd_preterminals;
  ev.metrics.jsd = per_nt_jsd(in.oracle, g, std::nullopt, jo);
  if (in.child) ev.metrics.loglik = mean_sentence_loglik(g, *in.child);
  return ev;
}

std::string cell_name(const std::string& curriculum, double s_l, double s_p, double eta) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "_sl%g_sp%g_eta%g", s_l, s_p, eta);
  return fs::path(curriculum).stem().string() + buf;
}

}  // namespace

void apply_config_text(RunConfig& c, const std::string& text) {
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    std::replace(key.begin(), key.end(), '_', '-');
    try {
      if (key == "treebank") c.treebank = value;
      else if (key == "grammar") c.grammar = value;
      else if (key == "sentences") c.sentences = value;
      else if (key == "child-speech") c.child_speech = value;
      else if (key == "curriculum") c.curriculum = value;
      else if (key == "s-p") c.s_p = to_double(key, value);
      else if (key == "s-l") c.s_l = to_double(key, value);
      else if (key == "eta") c.eta = to_double(key, value);
      else if (key == "f-m") c.f_m = to_unsigned(key, value);
      else if (key == "f-max") c.f_max = to_unsigned(key, value);
      else if (key == "iterations") c.iterations = static_cast<int>(to_unsigned(key, value));
      else if (key == "tolerance") c.tolerance = to_double(key, value);
      else if (key == "eval-sample") c.eval_sample = to_unsigned(key, value);
      else if (key == "seed") c.seed = to_unsigned(key, value);
      else if (key == "out") c.out = value;
      else if (key == "reproducible") c.reproducible = to_bool(key, value);
      else if (key == "include-root") c.include_root = to_bool(key, value);
      else if (key == "jsd-base") c.jsd_base = to_double(key, value);
      else if (key == "jsd-preterminals") c.jsd_preterminals = to_bool(key, value);
      else if (key == "force") c.force = to_bool(key, value);
      else if (key == "threads") c.threads = static_cast<unsigned>(to_unsigned(key, value));
      else if (key == "init") {
        if (value != "uniform" && value != "oracle") throw Error("init must be 'uniform' or 'oracle'");
        c.oracle_init = value == "oracle";
      } else if (key == "jitter") c.jitter_seed = to_unsigned(key, value);
      else throw Error("unknown config key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

void prepare_output_directory(const std::string& dir, bool force) {
  if (dir.empty()) throw Error("--out is required");
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !force)
    throw Error("output directory '" + dir + "' already exists; use --force to overwrite");
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

ExtractOutcome cmd_extract(const RunConfig& cfg) {
  if (cfg.treebank.empty()) throw Error("--treebank is required");
  auto trees = load_filtered_treebank(cfg.treebank);
  if (!cfg.out.empty()) prepare_output_directory(cfg.out, cfg.force);
  auto out = select_oracle(trees, cfg);
  if (!cfg.out.empty()) {
    write_file((fs::path(cfg.out) / "oracle.gr").string(), write_grammar_file(out.oracle));
    write_csv_pair(cfg.out, "coverage", coverage_csv(out.coverage));
  }
  return out;
}

TrainOutcome cmd_train(const RunConfig& cfg) {
  prepare_output_directory(cfg.out, cfg.force);
  const auto in = load_inputs(cfg, cfg.out);
  const auto plan = plan_for(cfg);

  CurriculumOptions options;
  options.jitter_seed = cfg.jitter_seed;
  options.oracle_init = cfg.oracle_init;

  TrainOutcome out;
  out.stages = run_curriculum(in.oracle, in.corpus, plan, estimator_for(cfg), options);

  const fs::path dir(cfg.out);
  for (const auto& stage : out.stages) {
    const auto k = std::to_string(stage.stage);
    write_file((dir / ("G_" + k + ".gr")).string(), write_grammar_file(stage.grammar));
    write_csv_pair(cfg.out, "trace_" + k, trace_csv(stage.posterior.trace));
    auto ev = evaluate(stage.grammar, in, cfg);
    write_file((dir / ("parses_" + k + ".txt")).string(), ev.parses);
    ev.metrics.stage = stage.stage;
    ev.metrics.name = stage.name;
    ev.metrics.parsed = stage.parsed();
    out.metrics.push_back(std::move(ev.metrics));
  }
  write_csv_pair(cfg.out, "stages", stages_csv(out.stages));
  write_report(out.metrics, cfg.out);
  return out;
}

std::string noparse_sentinel(const std::vector<std::string>& tokens) {
  return "(NOPARSE " + join(tokens, " ") + ")";
}

ParseOutcome cmd_parse(const std::string& grammar_path, const std::string& sentences_path, std::ostream& os) {
  const auto g = parse_grammar_file(read_file(grammar_path));
  const auto sentences = parse_sentences(read_file(sentences_path));
  const auto bg = binarize(g);
  ParseOutcome out;
  for (const auto& tokens : sentences) {
    ++out.sentences;
    auto result = viterbi_parse(bg, std::span<const std::string>(tokens));
    if (result.tree) {
      os << to_string(*result.tree) << '\n';
    } else {
      ++out.unparsed;
      os << noparse_sentinel(tokens) << '\n';
    }
  }
  return out;
}

StageMetrics cmd_eval(const RunConfig& cfg, const std::string& induced_path) {
  if (cfg.grammar.empty()) throw Error("--grammar (the oracle) is required");
  const auto in = load_inputs(cfg, "");
  const auto induced = parse_grammar_file(read_file(induced_path));
  auto ev = evaluate(induced, in, cfg);
  ev.metrics.stage = 1;
  ev.metrics.name = fs::path(induced_path).stem().string();
  if (!cfg.out.empty()) {
    prepare_output_directory(cfg.out, cfg.force);
    write_report(std::span<const StageMetrics>(&ev.metrics, 1), cfg.out);
    write_file((fs::path(cfg.out) / "parses.txt").string(), ev.parses);
  }
  return ev.metrics;
}

SweepGrid load_sweep_grid(const std::string& text) {
  SweepGrid grid;
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value list");
    std::string key(trim(line.substr(0, eq)));
    std::string values(line.substr(eq + 1));
    std::replace(values.begin(), values.end(), ',', ' ');
    auto items = split_whitespace(values);
    if (items.empty()) throw ParseError(line_no, "empty value list for '" + key + "'");
    std::replace(key.begin(), key.end(), '-', '_');
    auto numbers = [&](std::vector<double>& into) {
      for (const auto& item : items) {
        double v = 0;
        if (!parse_double(item, v) || v < 0) throw ParseError(line_no, "bad value '" + item + "' for " + key);
        into.push_back(v);
      }
    };
    if (key == "curricula" || key == "curriculum") grid.curricula = items;
    else if (key == "s_l") numbers(grid.s_l);
    else if (key == "s_p") numbers(grid.s_p);
    else if (key == "eta") numbers(grid.eta);
    else throw ParseError(line_no, "unknown grid key '" + key + "'");
  }
  if (grid.curricula.empty()) throw Error("grid lists no curricula");
  if (grid.s_l.empty() || grid.s_p.empty() || grid.eta.empty()) throw Error("grid needs s_l, s_p and eta values");
  return grid;
}

SweepOutcome cmd_sweep(const RunConfig& cfg, const SweepGrid& grid, unsigned jobs) {
  prepare_output_directory(cfg.out, cfg.force);
  SweepOutcome out;
  for (const auto& c : grid.curricula)
    for (double s_l : grid.s_l)
      for (double s_p : grid.s_p)
        for (double eta : grid.eta) {
          SweepRow row;
          row.curriculum = c;
          row.s_l = s_l;
          row.s_p = s_p;
          row.eta = eta;
          out.rows.push_back(row);
        }

  auto run_cell = [&](SweepRow& row) {
    RunConfig cell = cfg;
    cell.curriculum = row.curriculum;
    cell.s_l = row.s_l;
    cell.s_p = row.s_p;
    cell.eta = row.eta;
    cell.out = (fs::path(cfg.out) / cell_name(row.curriculum, row.s_l, row.s_p, row.eta)).string();
    cell.force = true;
    try {
      auto result = cmd_train(cell);
      const auto& last = result.metrics.back();
      row.f1 = last.f1.f1;
      row.mean_jsd = last.jsd.mean;
      row.loglik = last.loglik ? last.loglik->mean : std::nan("");
    } catch (const std::exception& e) {
      row.error = e.what();
      row.f1 = row.mean_jsd = row.loglik = std::nan("");
    }
  };

  if (jobs <= 1) {
    for (auto& row : out.rows) run_cell(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < out.rows.size();) run_cell(out.rows[i]);
      });
  }

  if (grid.curricula.size() == 2) {
    struct Metric {
      const char* name;
      double SweepRow::*field;
      Alternative alternative;
    };
    const Metric metrics[] = {{"f1", &SweepRow::f1, Alternative::a_greater},
                              {"loglik", &SweepRow::loglik, Alternative::a_greater},
                              {"mean_jsd", &SweepRow::mean_jsd, Alternative::b_greater}};
    const std::size_t half = out.rows.size() / 2;
    for (const auto& m : metrics) {
      std::vector<std::pair<double, double>> pairs;
      for (std::size_t i = 0; i < half; ++i) {
        const auto& a = out.rows[i];
        const auto& b = out.rows[half + i];
        double x = a.*m.field, y = b.*m.field;
        if (a.ok() && b.ok() && std::isfinite(x) && std::isfinite(y)) pairs.emplace_back(x, y);
      }
      WilcoxonRow w;
      w.metric = m.name;
      w.alternative = m.alternative;
      try {
        w.result = wilcoxon_signed_rank(pairs, m.alternative);
      } catch (const Error&) {
        w.result.n = 0;
        w.result.statistic = w.result.p_value = w.result.rank_biserial = w.result.median_difference = std::nan("");
      }
      out.wilcoxon.push_back(w);
    }
  }

  write_csv_pair(cfg.out, "sweep", sweep_csv(out.rows));
  if (!out.wilcoxon.empty()) write_csv_pair(cfg.out, "wilcoxon", wilcoxon_csv(out.wilcoxon));

  nlohmann::json failures = nlohmann::json::array();
  for (const auto& row : out.rows)
    if (!row.ok())
      failures.push_back({{"cell", cell_name(row.curriculum, row.s_l, row.s_p, row.eta)}, {"error", row.error}});
  nlohmann::json summary = {{"cells", out.rows.size()}, {"failed", failures.size()}, {"failures", failures}};
  write_file((fs::path(cfg.out) / "sweep_summary.json").string(), summary.dump(2) + "\n");
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "curriculum,s_l,s_p,eta,f1,loglik,mean_jsd,status\n";
  for (const auto& r : rows)
    out += r.curriculum + "," + format_double(r.s_l) + "," + format_double(r.s_p) + "," + format_double(r.eta) + "," +
           format_double(r.f1) + "," + format_double(r.loglik) + "," + format_double(r.mean_jsd) + "," +
           (r.ok() ? "ok" : "failed") + "\n";
  return out;
}

std::string wilcoxon_csv(const std::vector<WilcoxonRow>& rows) {
  std::string out = "metric,alternative,n,statistic,p_value,rank_biserial,median_difference,exact\n";
  for (const auto& w : rows)
    out += w.metric + "," + (w.alternative == Alternative::a_greater ? "greater" : "less") + "," +
           std::to_string(w.result.n) + "," + format_double(w.result.statistic) + "," +
           format_double(w.result.p_value) + "," + format_double(w.result.rank_biserial) + "," +
           format_double(w.result.median_difference) + "," + (w.result.exact ? "true" : "false") + "\n";
  return out;
}

}  // namespace matgi
