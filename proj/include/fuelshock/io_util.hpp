#pragma once

#include "fuelshock/types.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fuelshock {

/// Format a double with enough digits to round-trip but without noise in the
/// last bits; used for all machine-readable outputs so runs are byte-stable.
inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

/// Format with a fixed number of decimals (report tables round here only).
inline std::string format_fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    std::string s(buf);
    if (s == "-0" || s == "-0.0" || s == "-0.00" || s == "-0.000") s.erase(0, 1);
    return s;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Write via a temporary file and rename so that an error part-way through a
/// run never clobbers an existing output.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content)
{
    namespace fs = std::filesystem;
    fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    fs::path tmp = dir / (path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write file: " + tmp.string());
        out << content;
        if (!out)
            throw Error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot replace file " + path.string() + ": " + ec.message());
    }
}

} // namespace fuelshock
