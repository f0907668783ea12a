#include "relaylab/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace relaylab::csv {

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw std::out_of_range("no such column: " + name);
}

std::string escape_field(const std::string& field) {
    const bool needs_quotes =
        field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

namespace {

void append_row(std::string& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out += ',';
        out += escape_field(row[i]);
    }
    out += '\n';
}

}  // namespace

std::string to_string(const Table& table) {
    std::string out;
    append_row(out, table.header);
    for (const auto& row : table.rows) append_row(out, row);
    return out;
}

void write_file(const std::filesystem::path& path, const Table& table) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    const std::string text = to_string(table);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("short write: " + path.string());
}

Table parse(const std::string& text) {
    Table table;
    Row current;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    bool first_record = true;

    auto end_field = [&] {
        current.push_back(field);
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        if (first_record) {
            table.header = current;
            first_record = false;
        } else {
            table.rows.push_back(current);
        }
        current.clear();
        row_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_started = true;
                break;
            case ',':
                end_field();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_started || !field.empty() || !current.empty()) end_record();
                break;
            default:
                field += c;
                row_started = true;
                break;
        }
    }
    if (in_quotes) throw std::runtime_error("unterminated quoted field");
    if (row_started || !field.empty() || !current.empty()) end_record();
    return table;
}

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

}  // namespace relaylab::csv
