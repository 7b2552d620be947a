#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace depprobe {

// One probed layer: scores in percent.
struct LayerScanRow {
    std::uint32_t layer = 0;
    double uuas = 0.0;
    double relacc = 0.0;
    double las = 0.0;
};

// CSV with header layer,uuas,relacc,las. '#' lines are comments.
void write_layer_scan_csv(std::span<const LayerScanRow> rows, std::ostream& out);
std::vector<LayerScanRow> parse_layer_scan_csv(std::string_view text);

void print_layer_scan_table(std::span<const LayerScanRow> rows, std::ostream& out);

// Layer with the highest LAS; ties go to the lower layer.
std::uint32_t peak_las_layer(std::span<const LayerScanRow> rows);

}  // namespace depprobe
