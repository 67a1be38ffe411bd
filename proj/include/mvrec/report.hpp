#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrec/error.hpp"
#include "mvrec/features_csv.hpp"
#include "mvrec/harness.hpp"

namespace mvrec {

enum class ReportFormat { Json, Csv, Text };

constexpr std::string_view to_string(ReportFormat f) noexcept {
  switch (f) {
    case ReportFormat::Json: return "json";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Text: return "text";
  }
  return "unknown";
}

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "text" || s == "text-table") return ReportFormat::Text;
  fail(ErrorCode::InvalidArgument, "unknown report format '" + std::string(s) + "'");
}

inline std::string_view file_extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::Json: return ".json";
    case ReportFormat::Csv: return ".csv";
    case ReportFormat::Text: return ".txt";
  }
  return "";
}

inline constexpr std::string_view kAverageColumn = "Average";

// JSON layout: axes, then one cell per (method, K, dataset) and one average
// per (method, K), all in percent, then the raw per-seed rows.
inline std::string report_json(const ResultTable& t) {
  require(!t.empty(), ErrorCode::EmptyTable, "report '" + t.name + "' has no rows");
  nlohmann::ordered_json j;
  j["table"] = t.name;
  j["datasets"] = t.datasets;
  j["methods"] = t.methods;
  j["ks"] = t.ks;
  j["seeds"] = t.seeds;
  auto cells = nlohmann::ordered_json::array();
  auto averages = nlohmann::ordered_json::array();
  for (const auto& m : t.methods)
    for (auto k : t.ks) {
      for (const auto& d : t.datasets) {
        nlohmann::ordered_json c;
        c["method"] = m;
        c["k"] = k;
        c["dataset"] = d;
        c["accuracy"] = t.cell(d, m, k);
        cells.push_back(std::move(c));
      }
      nlohmann::ordered_json a;
      a["method"] = m;
      a["k"] = k;
      a["accuracy"] = t.average(m, k);
      averages.push_back(std::move(a));
    }
  j["cells"] = std::move(cells);
  j["averages"] = std::move(averages);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json o;
    o["dataset"] = r.dataset;
    o["method"] = r.method;
    o["k"] = r.k;
    o["seed"] = r.seed;
    o["correct"] = r.correct;
    o["total"] = r.total;
    if (r.train_accuracy) o["train_accuracy"] = *r.train_accuracy;
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

/// Rebuilds a table from its JSON report (axes and per-seed rows).
inline ResultTable parse_report_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ResultTable t;
    t.name = j.at("table").get<std::string>();
    t.datasets = j.at("datasets").get<std::vector<std::string>>();
    t.methods = j.at("methods").get<std::vector<std::string>>();
    t.ks = j.at("ks").get<std::vector<std::size_t>>();
    t.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& o : j.at("rows")) {
      ResultRow r;
      r.dataset = o.at("dataset").get<std::string>();
      r.method = o.at("method").get<std::string>();
      r.k = o.at("k").get<std::size_t>();
      r.seed = o.at("seed").get<std::uint64_t>();
      r.correct = o.at("correct").get<std::size_t>();
      r.total = o.at("total").get<std::size_t>();
      if (o.contains("train_accuracy")) r.train_accuracy = o.at("train_accuracy").get<double>();
      t.rows.push_back(std::move(r));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("report json: ") + e.what());
  }
}

// CSV layout: header "table,method,k,dataset,accuracy"; one line per cell,
// then the averages with dataset "Average". Shortest round-trip decimals.
inline std::string report_csv(const ResultTable& t) {
  require(!t.empty(), ErrorCode::EmptyTable, "report '" + t.name + "' has no rows");
  std::ostringstream out;
  out << "table,method,k,dataset,accuracy\n";
  for (const auto& m : t.methods)
    for (auto k : t.ks)
      for (const auto& d : t.datasets)
        out << t.name << ',' << m << ',' << k << ',' << d << ',' << format_double(t.cell(d, m, k)) << '\n';
  for (const auto& m : t.methods)
    for (auto k : t.ks)
      out << t.name << ',' << m << ',' << k << ',' << kAverageColumn << ',' << format_double(t.average(m, k)) << '\n';
  return out.str();
}

struct CsvCell {
  std::string table, method, dataset;
  std::size_t k = 0;
  double accuracy = 0.0;
};

inline std::vector<CsvCell> parse_report_csv(const std::string& text) {
  std::vector<CsvCell> cells;
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "table,method,k,dataset,accuracy",
          ErrorCode::CorruptFile, "report csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = detail::split_csv_line(line);
    require(parts.size() == 5, ErrorCode::CorruptFile, "report csv: expected 5 fields in '" + line + "'");
    CsvCell c;
    c.table = parts[0];
    c.method = parts[1];
    c.k = std::stoul(parts[2]);
    c.dataset = parts[3];
    c.accuracy = std::stod(parts[4]);
    cells.push_back(std::move(c));
  }
  return cells;
}

/// Aligned text table: one block per K, one row per method, one column per
/// dataset plus the average, percentages at one decimal.
inline std::string report_text(const ResultTable& t) {
  require(!t.empty(), ErrorCode::EmptyTable, "report '" + t.name + "' has no rows");
  std::vector<std::string> columns = t.datasets;
  columns.emplace_back(kAverageColumn);
  std::size_t method_w = 6;
  for (const auto& m : t.methods) method_w = std::max(method_w, m.size());
  std::vector<std::size_t> widths;
  for (const auto& c : columns) widths.push_back(std::max<std::size_t>(c.size(), 5));

  auto pad = [](std::string s, std::size_t w, bool right) {
    if (s.size() >= w) return s;
    return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
  };
  auto fixed1 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << t.name << " (accuracy %, mean over " << t.seeds.size() << " seeds)\n";
  std::string header = pad("K", 3, true) + "  " + pad("Method", method_w, false);
  for (std::size_t i = 0; i < columns.size(); ++i) header += "  " + pad(columns[i], widths[i], true);
  out << header << '\n' << std::string(header.size(), '-') << '\n';
  for (auto k : t.ks) {
    for (const auto& m : t.methods) {
      std::string line = pad(std::to_string(k), 3, true) + "  " + pad(m, method_w, false);
      for (std::size_t i = 0; i < t.datasets.size(); ++i)
        line += "  " + pad(fixed1(t.cell(t.datasets[i], m, k)), widths[i], true);
      line += "  " + pad(fixed1(t.average(m, k)), widths.back(), true);
      out << line << '\n';
    }
  }
  return out.str();
}

inline std::string render_report(const ResultTable& t, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return report_json(t);
    case ReportFormat::Csv: return report_csv(t);
    case ReportFormat::Text: return report_text(t);
  }
  fail(ErrorCode::InvalidArgument, "unknown report format");
}

/// Renders first so an empty table never leaves a file behind.
inline void emit_report(const ResultTable& t, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = render_report(t, format);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace mvrec
