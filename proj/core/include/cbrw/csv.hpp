#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cbrw {

inline constexpr const char* kVersion = "0.1.0";

// CSV with a provenance comment header; numbers are written with max
// round-trip precision so identical runs produce identical bytes.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, std::uint64_t seed,
            const std::string& description);

  void header(const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);
  void raw_line(const std::string& line);

  static std::string num(double v);
  static std::string num(std::int64_t v);

private:
  std::ofstream out_;
};

// Minimal reader: skips '#' comments, splits on commas.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace cbrw
