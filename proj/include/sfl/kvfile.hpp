#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sfl/error.hpp"

namespace sfl {

// One `key = value` line of a flat config file.
struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
    int column = 0;  // column of the value's first character
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline bool valid_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

}  // namespace detail

// Flat text format: one `key = value` per line, `#` starts a comment,
// blank lines ignored. Duplicate keys are an error.
inline std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source = "<config>") {
    std::vector<KeyValue> out;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        if (detail::trim(line).empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            const auto first = line.find_first_not_of(" \t\r");
            throw ParseError(source, line_no, static_cast<int>(first) + 1, "expected 'key = value'");
        }
        const auto key = detail::trim(line.substr(0, eq));
        const auto key_col = line.find_first_not_of(" \t\r");
        if (!detail::valid_key(key)) {
            throw ParseError(source, line_no, static_cast<int>(key_col) + 1,
                             "invalid key '" + std::string(key) + "'");
        }
        const auto raw_value = line.substr(eq + 1);
        const auto value = detail::trim(raw_value);
        const auto value_col = eq + 1 + raw_value.find_first_not_of(" \t\r");
        if (value.empty()) {
            throw ParseError(source, line_no, static_cast<int>(eq) + 2, "missing value for '" + std::string(key) + "'");
        }
        for (const auto& kv : out) {
            if (kv.key == key) {
                throw ParseError(source, line_no, static_cast<int>(key_col) + 1,
                                 "duplicate key '" + std::string(key) + "' (first on line " +
                                     std::to_string(kv.line) + ")");
            }
        }
        out.push_back({std::string(key), std::string(value), line_no, static_cast<int>(value_col) + 1});
    }
    return out;
}

inline std::vector<KeyValue> read_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str(), path);
}

inline double parse_double(const KeyValue& kv, const std::string& source) {
    const std::string& s = kv.value;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParseError(source, kv.line, kv.column, "'" + kv.key + "' expects a number, got '" + s + "'");
    }
    if (used != s.size()) {
        throw ParseError(source, kv.line, kv.column + static_cast<int>(used),
                         "trailing characters in value of '" + kv.key + "'");
    }
    return v;
}

inline long long parse_integer(const KeyValue& kv, const std::string& source) {
    const std::string& s = kv.value;
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(source, kv.line, kv.column, "'" + kv.key + "' expects an integer, got '" + s + "'");
    }
    return v;
}

// Comma separated list of numbers, e.g. "4, 6, 8".
inline std::vector<double> parse_double_list(const KeyValue& kv, const std::string& source) {
    std::vector<double> out;
    std::size_t start = 0;
    const std::string& s = kv.value;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = detail::trim(std::string_view(s).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        KeyValue item{kv.key, std::string(piece), kv.line, kv.column + static_cast<int>(start)};
        out.push_back(parse_double(item, source));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace sfl
