#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace profgp {

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// Strict parse of a full field; throws ParseError on trailing garbage.
double parse_double(std::string_view field);
long long parse_int(std::string_view field);

/// Minimal CSV table: header row plus string cells. No quoting support; none
/// of the schemas in this project contain commas inside fields.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a named column, or -1.
    int column(std::string_view name) const;
};

std::vector<std::string> split_csv_line(std::string_view line);
CsvTable read_csv(const std::string& path);

}  // namespace profgp
