#pragma once

#include "dlmap/common.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace dlmap::csv {

// RFC 4180 style record splitting: quoted fields may contain the separator
// and doubled quotes. Embedded newlines are not supported.
inline std::vector<std::string> split_record(std::string_view line, char sep = ',') {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == sep) {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string quote(std::string_view field, char sep = ',') {
    if (field.find_first_of(std::string{sep, '"', '\n'}) == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields,
                      char sep = ',') {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out << sep;
        out << quote(fields[i], sep);
    }
    out << '\n';
}

// A header-indexed table held as strings.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        fail("missing column '" + std::string(name) + "'");
    }

    bool has_column(std::string_view name) const {
        return std::find(header.begin(), header.end(), name) != header.end();
    }
};

inline Table read_table(const std::string& path, char sep = ',') {
    auto lines = read_lines(path);
    Table t;
    bool have_header = false;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (trim(lines[ln]).empty())
            continue;
        auto fields = split_record(lines[ln], sep);
        if (!have_header) {
            for (auto& f : fields)
                f = std::string(trim(f));
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            fail(path + ":" + std::to_string(ln + 1) + ": expected " +
                 std::to_string(t.header.size()) + " fields, got " +
                 std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (!have_header)
        fail(path + ": empty table");
    return t;
}

inline void write_table(const std::string& path, const Table& t, char sep = ',') {
    auto out = open_output(path);
    write_row(out, t.header, sep);
    for (const auto& r : t.rows)
        write_row(out, r, sep);
}

} // namespace dlmap::csv
