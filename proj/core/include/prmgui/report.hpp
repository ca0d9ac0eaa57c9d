#pragma once

// Static report (markdown plus SVG plots) from the run CSVs.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace prmgui::report {

class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& file, const std::string& column, const std::string& msg)
      : std::runtime_error(file + ": column '" + column + "': " + msg), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

struct Table {
  std::string kind;  // schema name
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Every CSV schema the tools emit, as header lists.
const std::vector<std::pair<std::string, std::vector<std::string>>>& known_schemas();

// Parses and matches a CSV against the known schemas. Throws SchemaError
// naming the first offending column.
Table read_table(const std::filesystem::path& csv);

// Writes index.md and one SVG per plottable input into `out_dir`. Inputs
// are processed in path order so output bytes depend only on the CSVs.
void make_report(std::vector<std::filesystem::path> csvs, const std::filesystem::path& out_dir);

}  // namespace prmgui::report
