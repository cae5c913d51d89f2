#include "evalguard/csv.hpp"

#include "evalguard/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace evalguard::csv {

std::optional<std::size_t> Table::find(std::string_view name) const
{
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == name) return c;
    }
    return std::nullopt;
}

Table parse(std::string_view text)
{
    // Strip a UTF-8 byte order mark.
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::vector<std::vector<std::string>> lines;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line_no = 1;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        // Skip fully blank lines.
        if (!(row.size() == 1 && row[0].empty())) lines.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t pos = 0; pos < text.size(); ++pos) {
        const char ch = text[pos];
        if (in_quotes) {
            if (ch == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field.push_back('"');
                    ++pos;
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
        case '"':
            if (field_started || !field.empty()) {
                throw InputError("malformed CSV: stray quote on line " + std::to_string(line_no));
            }
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            ++line_no;
            end_row();
            break;
        default:
            field.push_back(ch);
        }
    }
    if (in_quotes) throw InputError("malformed CSV: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();

    if (lines.empty()) throw InputError("empty file: no header row");

    Table table;
    table.header = std::move(lines.front());
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].size() != table.header.size()) {
            throw InputError("malformed CSV: row " + std::to_string(r + 1) + " has "
                             + std::to_string(lines[r].size()) + " fields, header has "
                             + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(lines[r]));
    }
    return table;
}

Table read(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::optional<double> parse_double(std::string_view field)
{
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    if (field.empty()) return std::nullopt;
    if (field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value,
                                           std::chars_format::general);
    if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

std::string format_double(double value)
{
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), ptr);
}

std::string escape(std::string_view field)
{
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace evalguard::csv
