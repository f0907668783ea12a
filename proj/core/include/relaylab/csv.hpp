#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace relaylab::csv {

/// One parsed row; cells hold unescaped field values.
using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;

    /// Index of a header column, or throws std::out_of_range.
    std::size_t column(const std::string& name) const;
};

/// Quotes a field if it contains a comma, quote, or newline.
std::string escape_field(const std::string& field);

/// Serializes header + rows, RFC-style quoting, "\n" line endings.
std::string to_string(const Table& table);

void write_file(const std::filesystem::path& path, const Table& table);

/// Parses CSV text with quoted-field support. The first record becomes the
/// header. Throws std::runtime_error on unterminated quotes.
Table parse(const std::string& text);

Table read_file(const std::filesystem::path& path);

}  // namespace relaylab::csv
