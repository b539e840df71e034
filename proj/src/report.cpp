#include "matgi/report.hpp"

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "matgi/error.hpp"
#include "matgi/text.hpp"

namespace matgi {

namespace {

double loglik_of(const StageMetrics& m) { return m.loglik ? m.loglik->mean : std::nan(""); }

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

std::string metrics_csv(std::span<const StageMetrics> results) {
  std::string out = "stage,f1,mean_jsd,mean_loglik,N_parsed\n";
  for (const auto& m : results)
    out += std::to_string(m.stage) + "," + format_double(m.f1.f1) + "," + format_double(m.jsd.mean) + "," +
           format_double(loglik_of(m)) + "," + std::to_string(m.parsed) + "\n";
  return out;
}

std::string jsd_per_nt_csv(std::span<const StageMetrics> results) {
  std::string out = "stage,nt,jsd\n";
  for (const auto& m : results)
    for (const auto& d : m.jsd.per_nt) out += std::to_string(m.stage) + "," + d.nt + "," + format_double(d.divergence) + "\n";
  return out;
}

void write_report(std::span<const StageMetrics> results, const std::string& directory) {
  if (results.empty()) throw Error("no stage results to report");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error("cannot create output directory '" + directory + "': " + ec.message());
  const fs::path dir(directory);

  write_csv_pair(directory, "metrics", metrics_csv(results));
  write_csv_pair(directory, "jsd_per_nt", jsd_per_nt_csv(results));

  nlohmann::json summary = nlohmann::json::array();
  for (const auto& m : results) {
    nlohmann::json nts = nlohmann::json::array();
    for (const auto& d : m.jsd.per_nt) {
      nts.push_back({{"nt", d.nt}, {"jsd", number(d.divergence)}, {"available", d.available}});
    }
    nlohmann::json entry = {
        {"stage", m.stage},
        {"name", m.name},
        {"N_parsed", m.parsed},
        {"f1",
         {{"f1", number(m.f1.f1)},
          {"precision", number(m.f1.precision)},
          {"recall", number(m.f1.recall)},
          {"matched", m.f1.matched},
          {"gold", m.f1.gold},
          {"predicted", m.f1.predicted}}},
        {"jsd", {{"mean", number(m.jsd.mean)}, {"averaged", m.jsd.averaged}, {"base", m.jsd.base}, {"per_nt", nts}}},
    };
    if (m.loglik)
      entry["loglik"] = {{"mean", number(m.loglik->mean)}, {"scored", m.loglik->scored}, {"skipped", m.loglik->skipped}};
    summary.push_back(std::move(entry));
  }
  write_file((dir / "summary.json").string(), nlohmann::json{{"stages", summary}}.dump(2) + "\n");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (std::size_t c = 0; c <= line.size(); ++c)
    if (c == line.size() || line[c] == ',') {
      f.push_back(line.substr(start, c - start));
      start = c + 1;
    }
  return f;
}

}  // namespace

std::string csv_to_json(const std::string& csv) {
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::string> header;
  for (const auto& line : split_lines(csv)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (header.empty()) {
      header = std::move(fields);
      continue;
    }
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t i = 0; i < header.size() && i < fields.size(); ++i) {
      double v = 0.0;
      if (parse_double(fields[i], v))
        row[header[i]] = number(v);
      else
        row[header[i]] = fields[i];
    }
    rows.push_back(std::move(row));
  }
  return rows.dump(2) + "\n";
}

void write_csv_pair(const std::string& directory, const std::string& stem, const std::string& csv) {
  const auto base = std::filesystem::path(directory) / stem;
  write_file(base.string() + ".csv", csv);
  write_file(base.string() + ".json", csv_to_json(csv));
}

std::vector<MetricsRow> read_metrics_csv(const std::string& text) {
  std::vector<MetricsRow> rows;
  std::size_t pos = 0, line = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    auto body = std::string(trim(std::string_view(text).substr(pos, nl - pos)));
    pos = nl + 1;
    ++line;
    if (body.empty()) continue;
    if (line == 1) {
      if (body != "stage,f1,mean_jsd,mean_loglik,N_parsed") throw ParseError(1, "unexpected metrics.csv header");
      continue;
    }
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t c = 0; c <= body.size(); ++c)
      if (c == body.size() || body[c] == ',') {
        f.push_back(body.substr(start, c - start));
        start = c + 1;
      }
    if (f.size() != 5) throw ParseError(line, "expected 5 fields");
    MetricsRow r;
    double stage = 0, parsed = 0;
    auto num = [&](const std::string& s, double& out) {
      if (s == "nan") {
        out = std::nan("");
        return;
      }
      if (!parse_double(s, out)) throw ParseError(line, "bad number '" + s + "'");
    };
    num(f[0], stage);
    num(f[1], r.f1);
    num(f[2], r.mean_jsd);
    num(f[3], r.mean_loglik);
    num(f[4], parsed);
    r.stage = static_cast<int>(stage);
    r.parsed = static_cast<std::size_t>(parsed);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace matgi
