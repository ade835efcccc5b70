#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "coalloc/bids.hpp"
#include "coalloc/io.hpp"
#include "coalloc/network.hpp"
#include "coalloc/pricing.hpp"

namespace testutil {

inline std::string fixture_dir() { return COALLOC_FIXTURE_DIR; }

inline std::string fixture_path() { return fixture_dir() + "/four-zone/instance.txt"; }

inline coalloc::Instance load_fixture() { return coalloc::load_instance(fixture_path()); }

// The reference four-zone ring, built in code so network/clearing unit tests
// do not depend on the instance parser.
inline coalloc::Topology four_zone(std::array<double, 4> caps = {10.0, 10.0, 10.0, 2.0}) {
    std::vector<coalloc::Line> lines = {
        {1, "A", "B", 1.0, caps[0]},
        {2, "A", "C", 1.0, caps[1]},
        {3, "B", "D", 1.0, caps[2]},
        {4, "C", "D", 1.0, caps[3]},
    };
    return coalloc::make_topology({"A", "B", "C", "D"}, std::move(lines), "A");
}

// The nine reference bids in book order.  Ids match examples/four-zone.
inline coalloc::BidBook reference_bids() {
    using coalloc::Product;
    coalloc::BidBook book;
    book.bids = {
        {"EA12", Product::Energy, "A", -4.0, 12.0},
        {"EA14", Product::Energy, "A", -4.0, 14.0},
        {"EB20", Product::Energy, "B", 8.0, 20.0},
        {"EB18", Product::Energy, "B", -8.0, 18.0},
        {"RPA1", Product::ReservePos, "A", -4.0, 1.0},
        {"RPB8", Product::ReservePos, "B", 4.0, 8.0},
        {"RPB6", Product::ReservePos, "B", -4.0, 6.0},
        {"RNB6", Product::ReserveNeg, "B", 4.0, 6.0},
        {"RNC4", Product::ReserveNeg, "C", -4.0, 4.0},
    };
    return book;
}

// The reference settlement price sheets (the instance file carries the same
// values as overrides).
inline coalloc::PriceSheet balanced_sheet() {
    using coalloc::Product;
    coalloc::PriceSheet sheet;
    sheet.mode = coalloc::ClearingMode::Balanced;
    sheet.override_price(Product::Energy, "A", 12.0);
    sheet.override_price(Product::Energy, "B", 18.0);
    sheet.override_price(Product::ReservePos, "A", 1.0);
    sheet.override_price(Product::ReservePos, "B", 8.0);
    sheet.override_price(Product::ReserveNeg, "B", 6.0);
    sheet.override_price(Product::ReserveNeg, "C", 4.0);
    return sheet;
}

inline coalloc::PriceSheet overprocure_sheet() {
    using coalloc::Product;
    coalloc::PriceSheet sheet;
    sheet.mode = coalloc::ClearingMode::Overprocure;
    sheet.override_price(Product::Energy, "A", 14.0);
    sheet.override_price(Product::Energy, "B", 18.0);
    sheet.override_price(Product::ReservePos, "A", 1.0);
    sheet.override_price(Product::ReservePos, "B", 6.0);
    sheet.override_price(Product::ReserveNeg, "B", 6.0);
    sheet.override_price(Product::ReserveNeg, "C", 4.0);
    return sheet;
}

// Random 3-zone line instances for property suites.  Prices are strictly
// positive so that decoupled clearing is exactly the zero-capacity limit of
// the co-allocated modes (free disposal through negatively priced supply
// would break that equivalence).
struct RandomInstance {
    coalloc::Topology topology;
    coalloc::BidBook book;
};

inline RandomInstance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> cap_d(0, 6);
    std::uniform_int_distribution<int> qty_d(1, 6);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_real_distribution<double> demand_p(5.0, 30.0);
    std::uniform_real_distribution<double> supply_p(1.0, 25.0);

    std::vector<coalloc::Line> lines = {
        {1, "A", "B", 1.0, double(cap_d(rng))},
        {2, "B", "C", 1.0, double(cap_d(rng))},
    };
    if (coin(rng)) lines.push_back({3, "A", "C", 1.0, double(cap_d(rng))});
    RandomInstance inst;
    inst.topology = coalloc::make_topology({"A", "B", "C"}, std::move(lines), "A");

    int serial = 0;
    auto add = [&](coalloc::Product p, const std::string& zone, bool demand) {
        const double q = demand ? qty_d(rng) : -qty_d(rng);
        const double price = demand ? demand_p(rng) : supply_p(rng);
        inst.book.bids.push_back({"b" + std::to_string(serial++), p, zone, q, price});
    };
    for (const std::string zone : {"A", "B", "C"}) {
        for (coalloc::Product p :
             {coalloc::Product::Energy, coalloc::Product::ReservePos, coalloc::Product::ReserveNeg}) {
            if (coin(rng)) add(p, zone, true);
            if (coin(rng)) add(p, zone, false);
        }
    }
    if (inst.book.bids.empty()) add(coalloc::Product::Energy, "A", true);
    return inst;
}

} // namespace testutil
