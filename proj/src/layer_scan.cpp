#include "depprobe/layer_scan.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "depprobe/error.hpp"

namespace depprobe {

namespace {

constexpr std::string_view kHeader = "layer,uuas,relacc,las";

template <typename T>
T parse_number(std::string_view s, std::size_t line) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError("bad number '" + std::string(s) + "'", line);
    }
    return value;
}

}  // namespace

void write_layer_scan_csv(std::span<const LayerScanRow> rows, std::ostream& out) {
    out << kHeader << "\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%u,%.17g,%.17g,%.17g\n", r.layer, r.uuas, r.relacc, r.las);
        out << buf;
    }
}

std::vector<LayerScanRow> parse_layer_scan_csv(std::string_view text) {
    std::vector<LayerScanRow> rows;
    bool header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (line != kHeader) throw ParseError("expected header '" + std::string(kHeader) + "'", line_no);
            header = true;
            continue;
        }
        std::string_view fields[4];
        std::size_t count = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            if (count == 4) throw ParseError("expected 4 fields", line_no);
            fields[count++] = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                  : comma - start);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (count != 4) throw ParseError("expected 4 fields", line_no);
        rows.push_back({parse_number<std::uint32_t>(fields[0], line_no),
                        parse_number<double>(fields[1], line_no),
                        parse_number<double>(fields[2], line_no),
                        parse_number<double>(fields[3], line_no)});
    }
    if (!header) throw InputError("layer scan CSV: missing header");
    return rows;
}

void print_layer_scan_table(std::span<const LayerScanRow> rows, std::ostream& out) {
    char buf[96];
    out << "layer    UUAS  RelAcc     LAS\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%5u %7.1f %7.1f %7.1f\n", r.layer, r.uuas, r.relacc, r.las);
        out << buf;
    }
    if (!rows.empty()) {
        out << "peak LAS at layer " << peak_las_layer(rows) << "\n";
    }
}

std::uint32_t peak_las_layer(std::span<const LayerScanRow> rows) {
    if (rows.empty()) throw InputError("layer scan: no rows");
    const LayerScanRow* best = &rows.front();
    for (const auto& r : rows) {
        if (r.las > best->las) best = &r;
    }
    return best->layer;
}

}  // namespace depprobe
