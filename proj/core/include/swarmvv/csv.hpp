#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace swarmvv {

/// Raised for malformed or schema-inconsistent tabular input.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index of `name`; throws SchemaError when absent.
  [[nodiscard]] std::size_t column(std::string_view name) const;
};

/// Reads a comma-separated file with a mandatory header row. Every row must
/// have the header's field count. Quoting is not supported.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, const std::string& origin = "<memory>");

/// Checks the header matches `expected` exactly.
void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    const std::string& origin);

double parse_double(std::string_view field, const std::string& context);
long parse_long(std::string_view field, const std::string& context);
bool parse_bool01(std::string_view field, const std::string& context);

/// Fixed-point formatting that never emits "-0.000".
std::string fixed(double value, int decimals);

/// Writes `content` to `path` in binary mode (LF line endings preserved).
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace swarmvv
