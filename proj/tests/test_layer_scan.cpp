#include <doctest.h>

#include <fstream>
#include <sstream>

#include "depprobe/error.hpp"
#include "depprobe/layer_scan.hpp"

using namespace depprobe;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("reference RemBERT layer scan renders through the report path") {
    const auto rows = parse_layer_scan_csv(read_file(std::string(DEPPROBE_TEST_DATA_DIR) + "/rembert_layers_en_ewt.csv"));
    CHECK(rows.size() == 33);
    CHECK(rows.front().layer == 0);
    CHECK(rows.back().layer == 32);
    CHECK(peak_las_layer(rows) == 17);
    CHECK(rows[17].las == 43.6);

    std::ostringstream table;
    print_layer_scan_table(rows, table);
    CHECK(table.str().find("   17    ") != std::string::npos);
    CHECK(table.str().find("peak LAS at layer 17") != std::string::npos);

    std::ostringstream csv;
    write_layer_scan_csv(rows, csv);
    const auto again = parse_layer_scan_csv(csv.str());
    REQUIRE(again.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(again[i].layer == rows[i].layer);
        CHECK(again[i].uuas == rows[i].uuas);
        CHECK(again[i].relacc == rows[i].relacc);
        CHECK(again[i].las == rows[i].las);
    }
}

TEST_CASE("layer scan CSV errors") {
    CHECK_THROWS_AS(parse_layer_scan_csv(""), InputError);
    CHECK_THROWS_AS(parse_layer_scan_csv("layer,uuas\n"), InputError);
    CHECK_THROWS_AS(parse_layer_scan_csv("layer,uuas,relacc,las\n1,2,3\n"), InputError);
    CHECK_THROWS_AS(parse_layer_scan_csv("layer,uuas,relacc,las\n1,2,3,x\n"), InputError);
    CHECK_THROWS_AS(peak_las_layer({}), InputError);
}

TEST_CASE("peak ties go to the lower layer") {
    const std::vector<LayerScanRow> rows{{0, 1, 1, 5}, {1, 1, 1, 7}, {2, 1, 1, 7}};
    CHECK(peak_las_layer(rows) == 1);
}
