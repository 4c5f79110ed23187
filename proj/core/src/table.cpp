#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "fewie/error.hpp"
#include "fewie/harness.hpp"

namespace fewie {

std::string format_f1_cell(double f1) {
  // The 1e-9 nudge keeps exact decimal halves (e.g. 0.66115) from falling
  // below the rounding boundary through binary representation error.
  const auto hundredths = static_cast<long long>(std::floor(f1 * 10000.0 + 0.5 + 1e-9));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", hundredths / 100, hundredths % 100);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

struct RowKey {
  std::string dataset;
  Scenario scenario;
  friend bool operator==(const RowKey&, const RowKey&) = default;
};

}  // namespace

TableDocument emit_table(const std::vector<RunManifest>& runs, const TableOptions& options) {
  if (runs.empty()) throw PreconditionError("no runs to tabulate");
  std::vector<std::string> columns;
  std::vector<RowKey> rows;
  // (row, column) -> scenario result
  std::map<std::pair<std::size_t, std::size_t>, const ScenarioResult*> cells;

  for (const auto& run : runs) {
    auto col_it = std::find(columns.begin(), columns.end(), run.label);
    const auto col = static_cast<std::size_t>(col_it - columns.begin());
    if (col_it == columns.end()) columns.push_back(run.label);
    for (const auto& s : run.scenarios) {
      if (!s.ok) continue;
      const RowKey key{run.dataset, s.scenario};
      auto row_it = std::find(rows.begin(), rows.end(), key);
      const auto row = static_cast<std::size_t>(row_it - rows.begin());
      if (row_it == rows.end()) rows.push_back(key);
      if (!cells.emplace(std::pair{row, col}, &s).second) {
        throw PreconditionError("run '" + run.label + "' appears twice for " + run.dataset + " " +
                                s.scenario.label());
      }
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (!cells.count({r, c})) {
        throw PreconditionError("mismatched scenarios: run '" + columns[c] + "' has no result for " +
                                rows[r].dataset + " " + rows[r].scenario.label());
      }
    }
  }

  std::string csv = "dataset,n_ways,k_shots,k_query";
  std::string md = "| Dataset | Scenario |";
  std::string rule = "|:--|:--|";
  for (const auto& c : columns) {
    csv += "," + csv_field(c);
    md += " " + md_escape(c) + " |";
    rule += "--:|";
  }
  csv += ",best,significant\n";
  md += "\n" + rule + "\n";

  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < columns.size(); ++c) {
      if (cells.at({r, c})->summary.mean > cells.at({r, best})->summary.mean) best = c;
    }
    bool dagger = false;
    if (columns.size() > 1) {
      std::size_t next = best == 0 ? 1 : 0;
      for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c != best && cells.at({r, c})->summary.mean > cells.at({r, next})->summary.mean) next = c;
      }
      const ScenarioResult& a = *cells.at({r, best});
      const ScenarioResult& b = *cells.at({r, next});
      if (a.summary.mean != b.summary.mean) {
        if (a.pairing_digest != b.pairing_digest) {
          throw PreconditionError("runs '" + columns[best] + "' and '" + columns[next] +
                                  "' were evaluated on different episodes for " + rows[r].dataset + " " +
                                  rows[r].scenario.label());
        }
        dagger = significance(a.scores, b.scores, options.alpha, options.test).significant;
      }
    }

    const auto& key = rows[r];
    csv += csv_field(key.dataset) + "," + std::to_string(key.scenario.n_ways) + "," +
           std::to_string(key.scenario.k_shots) + "," + std::to_string(key.scenario.k_query);
    md += "| " + md_escape(key.dataset) + " | " + key.scenario.label() + " |";
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string cell = format_f1_cell(cells.at({r, c})->summary.mean);
      csv += "," + cell;
      if (c == best) {
        md += " **" + cell + "**" + (dagger ? "†" : "") + " |";
      } else {
        md += " " + cell + " |";
      }
    }
    csv += "," + csv_field(columns[best]) + "," + (dagger ? "true" : "false") + "\n";
    md += "\n";
  }
  return {csv, md};
}

}  // namespace fewie
