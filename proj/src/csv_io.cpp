#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ato/data_model.hpp"
#include "ato/errors.hpp"
#include "ato/file_util.hpp"

namespace ato::data {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

double parse_cell(std::string_view cell, std::size_t row, const std::string& column) {
    const std::string_view text = trim(cell);
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc() || ptr != last) {
        throw DataError("row " + std::to_string(row) + ", column " + column + ": non-numeric value '" +
                        std::string(text) + "'");
    }
    if (!std::isfinite(value)) {
        throw DataError("row " + std::to_string(row) + ", column " + column + ": non-finite value");
    }
    return value;
}

void append_number(std::string& out, double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace

Dataset parse_csv(const std::string& text) {
    std::vector<std::string_view> lines;
    {
        std::string_view rest(text);
        while (!rest.empty()) {
            const std::size_t nl = rest.find('\n');
            const std::string_view line = nl == std::string_view::npos ? rest : rest.substr(0, nl);
            if (!trim(line).empty()) {
                lines.push_back(line);
            }
            if (nl == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(nl + 1);
        }
    }
    if (lines.empty()) {
        throw DataError("csv: empty file");
    }

    const auto header = split_fields(lines.front());
    std::map<std::string, std::size_t, std::less<>> position;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name(trim(header[c]));
        if (!position.emplace(name, c).second) {
            throw DataError("csv: duplicate column: " + name);
        }
    }
    for (const char* required : {"y", "d", "x1"}) {
        if (position.find(required) == position.end()) {
            throw DataError(std::string("missing column: ") + required);
        }
    }
    std::vector<std::size_t> x_columns;
    for (std::size_t j = 1;; ++j) {
        const auto it = position.find("x" + std::to_string(j));
        if (it == position.end()) {
            break;
        }
        x_columns.push_back(it->second);
    }
    const auto outlier_it = position.find("outlier");
    const bool has_outlier = outlier_it != position.end();
    const std::size_t expected = x_columns.size() + 2 + (has_outlier ? 1 : 0);
    if (header.size() != expected) {
        for (const auto& entry : position) {
            const std::string& name = entry.first;
            bool known = name == "y" || name == "d" || name == "outlier";
            for (std::size_t j = 1; !known && j <= x_columns.size(); ++j) {
                known = name == "x" + std::to_string(j);
            }
            if (!known) {
                throw DataError("csv: unexpected column: " + name);
            }
        }
    }

    const std::size_t n = lines.size() - 1;
    if (n == 0) {
        throw DataError("csv: no data rows");
    }
    Dataset data;
    data.y.resize(static_cast<Eigen::Index>(n));
    data.d.resize(static_cast<Eigen::Index>(n));
    data.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(x_columns.size()));
    if (has_outlier) {
        data.outlier_mask = std::vector<bool>(n, false);
    }

    const std::size_t y_col = position.find("y")->second;
    const std::size_t d_col = position.find("d")->second;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t file_row = r + 1;  // data rows are numbered from 1 after the header
        const auto fields = split_fields(lines[r + 1]);
        if (fields.size() != header.size()) {
            throw DataError("row " + std::to_string(file_row) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        }
        const auto i = static_cast<Eigen::Index>(r);
        data.y(i) = parse_cell(fields[y_col], file_row, "y");
        data.d(i) = parse_cell(fields[d_col], file_row, "d");
        for (std::size_t j = 0; j < x_columns.size(); ++j) {
            data.x(i, static_cast<Eigen::Index>(j)) =
                parse_cell(fields[x_columns[j]], file_row, "x" + std::to_string(j + 1));
        }
        if (has_outlier) {
            const double flag = parse_cell(fields[outlier_it->second], file_row, "outlier");
            if (flag != 0.0 && flag != 1.0) {
                throw DataError("row " + std::to_string(file_row) + ", column outlier: expected 0 or 1");
            }
            (*data.outlier_mask)[r] = flag == 1.0;
        }
    }
    data.validate();
    return data;
}

Dataset load_csv(const std::string& path) { return parse_csv(read_text_file(path)); }

std::string format_csv(const Dataset& data) {
    data.validate();
    const bool has_outlier = data.outlier_mask.has_value();
    std::string out = "y,d";
    for (std::size_t j = 1; j <= data.p(); ++j) {
        out += ",x" + std::to_string(j);
    }
    if (has_outlier) {
        out += ",outlier";
    }
    out += '\n';
    for (std::size_t r = 0; r < data.n(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        append_number(out, data.y(i));
        out += ',';
        append_number(out, data.d(i));
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
            out += ',';
            append_number(out, data.x(i, j));
        }
        if (has_outlier) {
            out += (*data.outlier_mask)[r] ? ",1" : ",0";
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Dataset& data, const std::string& path) { write_file_atomic(path, format_csv(data)); }

}  // namespace ato::data
