#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "coalloc/bids.hpp"
#include "helpers.hpp"

using namespace coalloc;

TEST_CASE("reference book validates cleanly") {
    const BidBook book = testutil::reference_bids();
    REQUIRE(validate(book, testutil::four_zone()).empty());
    REQUIRE(validate(BidBook{}, testutil::four_zone()).empty());
}

TEST_CASE("validation names the offending bid") {
    const Topology topo = testutil::four_zone();
    BidBook book;
    book.bids = {{"zq", Product::Energy, "A", 0.0, 10.0}};
    auto report = validate(book, topo);
    REQUIRE(report.size() == 1);
    REQUIRE(report[0].find("zq") != std::string::npos);

    book.bids = {{"wz", Product::Energy, "Q", 1.0, 10.0}};
    report = validate(book, topo);
    REQUIRE(report.size() == 1);
    REQUIRE(report[0].find("wz") != std::string::npos);

    book.bids = {{"np", Product::Energy, "A", 1.0, std::numeric_limits<double>::quiet_NaN()}};
    REQUIRE(validate(book, topo).size() == 1);

    book.bids = {{"d1", Product::Energy, "A", 1.0, 5.0}, {"d1", Product::Energy, "A", 1.0, 5.0}};
    REQUIRE_FALSE(validate(book, topo).empty());
}

TEST_CASE("zonal volumes per product and side") {
    const BidBook book = testutil::reference_bids();

    const auto es = zonal_volume(book, Product::Energy, false);
    REQUIRE(es.size() == 2);
    REQUIRE(es.at("A") == 8.0);
    REQUIRE(es.at("B") == 8.0);

    const auto ns = zonal_volume(book, Product::ReserveNeg, false);
    REQUIRE(ns.size() == 1);
    REQUIRE(ns.at("C") == 4.0);

    const auto ed = zonal_volume(book, Product::Energy, true);
    REQUIRE(ed.size() == 1);
    REQUIRE(ed.at("B") == 8.0);

    BidBook nothing;
    REQUIRE(zonal_volume(nothing, Product::Energy, true).empty());

    // Both sides over all products recover the total book volume.
    double total = 0.0;
    for (Product p : {Product::Energy, Product::ReservePos, Product::ReserveNeg}) {
        for (bool side : {true, false})
            for (const auto& [zone, mw] : zonal_volume(book, p, side)) total += mw;
    }
    double expect = 0.0;
    for (const Bid& b : book.bids) expect += std::abs(b.quantity);
    REQUIRE(total == expect);
}

TEST_CASE("product partition covers every bid once") {
    const BidBook book = testutil::reference_bids();
    std::vector<int> seen(book.bids.size(), 0);
    for (Product p : {Product::Energy, Product::ReservePos, Product::ReserveNeg})
        for (int i : book.indices_of(p)) seen[static_cast<std::size_t>(i)] += 1;
    for (int count : seen) REQUIRE(count == 1);
}

TEST_CASE("welfare accounting and id lookup") {
    const BidBook book = testutil::reference_bids();
    const std::vector<double> balanced = {1, 0, 1, 0.5, 1, 1, 0, 1, 1};
    REQUIRE(std::abs(total_social_welfare(book, balanced) - 76.0) <= 1e-12);
    REQUIRE_THROWS_AS(total_social_welfare(book, {1.0}), InputError);

    REQUIRE(book.index_of_id("RPB6") == 6);
    REQUIRE(book.index_of_id("nope") == -1);
}
