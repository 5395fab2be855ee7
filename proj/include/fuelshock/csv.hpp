#pragma once

#include "fuelshock/types.hpp"

#include <charconv>
#include <sstream>
#include <string>
#include <vector>

namespace fuelshock::csv {

// Minimal comma-delimited table reader. Fields must not contain the
// delimiter; all shipped schemas use plain identifiers and numbers.

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }

    int require_column(const std::string& name, const std::string& context) const
    {
        int c = column(name);
        if (c < 0)
            throw ValidationError(context + ": missing required column '" + name + "'");
        return c;
    }
};

inline std::vector<std::string> split_line(const std::string& line, char delim = ',')
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim))
        out.push_back(field);
    if (!line.empty() && line.back() == delim)
        out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s)
{
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline Table parse(const std::string& text, const std::string& context)
{
    Table t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        for (auto& f : fields) f = trim(f);
        if (t.header.empty()) {
            t.header = std::move(fields);
        } else {
            if (fields.size() != t.header.size())
                throw ValidationError(context + ": line " + std::to_string(lineno) + " has " +
                                      std::to_string(fields.size()) + " fields, expected " +
                                      std::to_string(t.header.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    if (t.header.empty())
        throw ValidationError(context + ": empty file");
    return t;
}

inline double to_double(const std::string& s, const std::string& context)
{
    const std::string v = trim(s);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ValidationError(context + ": non-numeric value '" + s + "'");
    return out;
}

inline long to_long(const std::string& s, const std::string& context)
{
    const std::string v = trim(s);
    long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ValidationError(context + ": non-integer value '" + s + "'");
    return out;
}

} // namespace fuelshock::csv
