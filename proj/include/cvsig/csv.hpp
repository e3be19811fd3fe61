#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

// Small helpers shared by the CSV readers and writers.
namespace cvsig::csv {

std::string_view trim(std::string_view text);
// Splits on ',' (no quoting; identifiers never contain commas).
void split(std::string_view row, std::vector<std::string_view>& cells);

std::int64_t parse_int(std::string_view cell, const std::string& where);
double parse_double(std::string_view cell, const std::string& where);

// Shortest text that round-trips to the same double.
std::string format_double(double value);
std::string format_fixed(double value, int decimals);

// Creates parent directories; throws if the file cannot be opened.
std::ofstream open_for_write(const std::filesystem::path& path);

}  // namespace cvsig::csv
