#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "coalloc/pricing.hpp"

namespace coalloc {

struct SettlementReport {
    // Parallel to the bid book: x_i q_i (p_i - MCP), demand-positive signs
    // make this nonnegative under consistent prices.
    std::vector<double> surplus;
    // Net payment by the zone's participants for the product; negative means
    // the zone is paid in net.
    std::map<Product, std::map<std::string, double>> cash_flow;
    std::map<Product, double> rent; // congestion rent = sum of zone cash flows
    double total_surplus = 0.0;
    double total_rent = 0.0;
    double tsw = 0.0; // equals total_surplus + total_rent
    PriceProvenance provenance = PriceProvenance::Derived;
};

inline SettlementReport settle(const BidBook& book, const std::vector<double>& acceptances,
                               const PriceSheet& prices) {
    if (acceptances.size() != book.bids.size())
        throw InputError("acceptance vector size does not match bid book");
    SettlementReport rep;
    rep.provenance = prices.provenance;
    rep.surplus.assign(book.bids.size(), 0.0);
    for (std::size_t i = 0; i < book.bids.size(); ++i) {
        const Bid& b = book.bids[i];
        const double traded = acceptances[i] * b.quantity;
        const std::optional<double> mcp = prices.settled(b.product, b.zone);
        if (!mcp) {
            if (std::abs(traded) > tol::feasibility)
                throw InputError("no settled price for traded pair " +
                                 std::string(product_code(b.product)) + "/" + b.zone);
            continue;
        }
        rep.surplus[i] = traded * (b.price - *mcp);
        rep.cash_flow[b.product][b.zone] += traded * *mcp;
    }
    for (double s : rep.surplus) rep.total_surplus += s;
    for (const auto& [product, zones] : rep.cash_flow) {
        double r = 0.0;
        for (const auto& [zone, c] : zones) r += c;
        rep.rent[product] = r;
        rep.total_rent += r;
    }
    rep.tsw = total_social_welfare(book, acceptances);
    return rep;
}

} // namespace coalloc
