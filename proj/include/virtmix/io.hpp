#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace virtmix::io {

/// Shortest-safe round-trip text for a double (17 significant digits).
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Accumulates CSV text in memory; nothing touches disk until the caller writes it.
class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) { row(header); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += cells[i];
        }
        text_ += '\n';
    }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(fmt(v));
        row(cells);
    }

    std::size_t columns() const noexcept { return columns_; }
    const std::string& str() const noexcept { return text_; }

private:
    std::size_t columns_;
    std::string text_;
};

/// 64-bit FNV-1a, used for output checksums in run manifests.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace virtmix::io
