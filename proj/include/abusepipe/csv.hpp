#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace abusepipe {

inline std::string csv_escape(std::string_view field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_escape(fields[i]);
    }
    out += '\n';
    return out;
}

// Minimal RFC-4180-style parser; quoted fields may contain commas, quotes
// (doubled) and newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
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
                field_started = true;
                break;
            case ',':
                end_field();
                field_started = true;  // next field exists even if empty
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

}  // namespace abusepipe
