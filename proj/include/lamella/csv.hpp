#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lamella {

/// Shortest text that round-trips a double (17 significant digits).
std::string format_number(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  ///< throws IoError when absent
};

/// Writes header + rows; throws IoError on failure.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lamella
