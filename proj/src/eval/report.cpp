#include "mensp/eval/report.hpp"

#include <cstdio>
#include <sstream>

#include "mensp/errors.hpp"

namespace mensp {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  // A tiny negative value must not print as "-0.0".
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string strategy_label(const CellKey& key) { return key.strategy ? strategy_name(*key.strategy) : "-"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& text, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          cur += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw DataError("unterminated quoted field in report CSV");
  fields.push_back(std::move(cur));
  return fields;
}

const char* kCsvHeader = "item,shot,strategy,model,seeds,kappa_mean,kappa_std,f1_mean,f1_std,error";

std::string render_markdown(const MetricReport& r) {
  std::ostringstream out;
  out << "# Scoring performance\n\n";
  out << "- config digest: `" << r.config_digest << "`\n";
  out << "- backend: `" << r.backend_identifier << "`\n";
  out << "- seeds:";
  for (std::size_t i = 0; i < r.seeds.size(); ++i) out << (i ? ", " : " ") << r.seeds[i];
  out << "\n- F1: " << (r.f1 == F1Kind::weighted ? "support-weighted" : "macro") << "\n\n";

  out << "| Shot | Sample | Model |";
  for (const auto& item : r.items) out << " " << item << " Kappa(%) | " << item << " F1(%) |";
  out << "\n|---:|:---|:---|";
  for (std::size_t i = 0; i < r.items.size(); ++i) out << "---:|---:|";
  out << "\n";
  for (std::size_t row = 0; row < r.rows.size(); ++row) {
    const auto& key = r.rows[row];
    out << "| " << key.shot << " | " << strategy_label(key) << " | " << model_name(key.model) << " |";
    for (const auto& item : r.items) {
      const auto& c = r.results.at(item)[row];
      if (c.ok())
        out << " " << format_percent_cell(c.kappa_mean, c.kappa_std) << " | "
            << format_percent_cell(c.f1_mean, c.f1_std) << " |";
      else
        out << " error | error |";
    }
    out << "\n";
  }

  bool header = false;
  for (const auto& item : r.items) {
    for (std::size_t row = 0; row < r.rows.size(); ++row) {
      const auto& c = r.results.at(item)[row];
      if (c.ok()) continue;
      if (!header) out << "\n## Failed cells\n\n";
      header = true;
      const auto& key = r.rows[row];
      out << "- " << item << ", shot " << key.shot << ", " << strategy_label(key) << ", " << model_name(key.model)
          << ": " << *c.error << "\n";
    }
  }
  return out.str();
}

std::string render_csv(const MetricReport& r) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const auto& item : r.items) {
    for (std::size_t row = 0; row < r.rows.size(); ++row) {
      const auto& key = r.rows[row];
      const auto& c = r.results.at(item)[row];
      out << csv_field(item) << "," << key.shot << "," << strategy_label(key) << "," << model_name(key.model) << ",";
      if (c.ok()) {
        out << c.kappas.size() << "," << fixed(c.kappa_mean, 6) << "," << fixed(c.kappa_std, 6) << ","
            << fixed(c.f1_mean, 6) << "," << fixed(c.f1_std, 6) << ",";
      } else {
        out << c.kappas.size() << ",,,,," << csv_field(*c.error);
      }
      out << "\n";
    }
  }
  return out.str();
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError("bad number '" + s + "' in report CSV");
  }
  if (used != s.size()) throw DataError("bad number '" + s + "' in report CSV");
  return v;
}

int parse_int(const std::string& s) {
  const auto v = parse_number(s);
  if (!v || *v != static_cast<int>(*v)) throw DataError("bad integer '" + s + "' in report CSV");
  return static_cast<int>(*v);
}

}  // namespace

std::string format_percent_cell(double mean, double std) {
  return fixed(mean * 100.0, 1) + "±" + fixed(std * 100.0, 1);
}

std::string render_report(const MetricReport& report, ReportFormat format) {
  if (report.items.empty() || report.rows.empty()) throw DataError("cannot render an empty report");
  return format == ReportFormat::markdown ? render_markdown(report) : render_csv(report);
}

std::vector<CsvCell> parse_report_csv(const std::string& text) {
  std::size_t pos = 0;
  const auto header = split_csv_line(text, pos);
  std::string joined;
  for (std::size_t i = 0; i < header.size(); ++i) joined += (i ? "," : "") + header[i];
  if (joined != kCsvHeader) throw DataError("report CSV header mismatch");
  std::vector<CsvCell> cells;
  while (pos < text.size()) {
    const auto f = split_csv_line(text, pos);
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 10) throw DataError("report CSV row has " + std::to_string(f.size()) + " fields, expected 10");
    CsvCell c;
    c.item = f[0];
    c.shot = parse_int(f[1]);
    c.strategy = f[2];
    c.model = f[3];
    c.seeds = parse_int(f[4]);
    c.kappa_mean = parse_number(f[5]);
    c.kappa_std = parse_number(f[6]);
    c.f1_mean = parse_number(f[7]);
    c.f1_std = parse_number(f[8]);
    c.error = f[9];
    cells.push_back(std::move(c));
  }
  return cells;
}

}  // namespace mensp
