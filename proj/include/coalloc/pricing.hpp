#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coalloc/clearing.hpp"

namespace coalloc {

// Zonal price as an interval of market-clearing-consistent values.  A settled
// scalar is present when both bounds are finite (midpoint) or when the sheet
// was supplied externally.
struct PriceInterval {
    double lo = -lp::inf;
    double hi = lp::inf;
    std::optional<double> settled;
};

enum class PriceProvenance { Derived, External };

struct PriceSheet {
    ClearingMode mode = ClearingMode::Decoupled;
    PriceProvenance provenance = PriceProvenance::Derived;
    std::map<std::pair<Product, std::string>, PriceInterval> entries;

    // Pairs without an entry price nothing: unbounded interval, no settled.
    PriceInterval at(Product p, const std::string& zone) const {
        auto it = entries.find({p, zone});
        return it == entries.end() ? PriceInterval{} : it->second;
    }
    std::optional<double> settled(Product p, const std::string& zone) const {
        return at(p, zone).settled;
    }
    void set(Product p, const std::string& zone, PriceInterval iv) {
        entries[{p, zone}] = iv;
    }
    // Pin one pair to an externally supplied scalar.
    void override_price(Product p, const std::string& zone, double value) {
        entries[{p, zone}] = PriceInterval{value, value, value};
        provenance = PriceProvenance::External;
    }
};

namespace detail {

inline PriceInterval finish_interval(double lo, double hi) {
    if (lo > hi) {
        // Merit-consistent outcomes cannot invert the bounds beyond rounding.
        if (lo - hi > tol::comparison)
            throw StructuralError("price interval bounds crossed");
        lo = hi = 0.5 * (lo + hi);
    }
    PriceInterval iv{lo, hi, std::nullopt};
    if (std::isfinite(lo) && std::isfinite(hi)) iv.settled = 0.5 * (lo + hi);
    return iv;
}

} // namespace detail

// Merit-order price intervals of a decoupled outcome: the prices at which
// each zone-product's accepted set is demand/supply consistent.
inline PriceSheet decoupled_price_intervals(const BidBook& book,
                                            const ClearingOutcome& outcome) {
    if (outcome.mode != ClearingMode::Decoupled)
        throw InputError("decoupled_price_intervals expects a decoupled outcome");
    if (outcome.acceptance.size() != book.bids.size())
        throw InputError("acceptance vector size does not match bid book");
    PriceSheet sheet;
    sheet.mode = outcome.mode;

    std::map<std::pair<Product, std::string>, std::pair<double, double>> bounds;
    for (std::size_t i = 0; i < book.bids.size(); ++i) {
        const Bid& b = book.bids[i];
        auto [it, fresh] =
            bounds.try_emplace({b.product, b.zone}, -lp::inf, lp::inf);
        auto& [lo, hi] = it->second;
        const double x = outcome.acceptance[i];
        const bool some = x > tol::comparison;
        const bool full = x > 1.0 - tol::comparison;
        if (b.is_demand()) {
            if (some) hi = std::min(hi, b.price); // accepted demand: MCP <= p
            if (!full) lo = std::max(lo, b.price); // rejected demand: MCP >= p
        } else {
            if (some) lo = std::max(lo, b.price); // accepted supply: MCP >= p
            if (!full) hi = std::min(hi, b.price); // rejected supply: MCP <= p
        }
    }
    for (const auto& [key, b] : bounds)
        sheet.set(key.first, key.second, detail::finish_interval(b.first, b.second));
    return sheet;
}

// Dual price intervals of a co-allocated solve: the dual-value range of each
// position-defining constraint.
inline PriceSheet dual_price_intervals(const lp::LinearProgram& program,
                                       const lp::Solution& solution,
                                       const ClearingOutcome& outcome) {
    if (outcome.mode == ClearingMode::Decoupled)
        throw InputError("dual_price_intervals expects a co-allocated outcome");
    if (!solution.ok()) throw InputError("dual_price_intervals needs an optimal solution");
    PriceSheet sheet;
    sheet.mode = outcome.mode;
    for (const auto& [product, zones] : outcome.positions) {
        for (const auto& [zone, pos] : zones) {
            const std::string tag =
                std::string("pos:") + product_code(product) + ":" + zone;
            if (program.row_by_tag(tag) < 0)
                throw SolverError("clearing program lacks position row " + tag);
            const lp::Interval iv = lp::dual_range(program, solution, tag);
            sheet.set(product, zone, detail::finish_interval(iv.lo, iv.hi));
        }
    }
    return sheet;
}

struct ConsistencyViolation {
    std::string bid_id;
    std::string rule; // which acceptance rule the bid breaks
    double bid_price = 0.0;
    double settled_price = 0.0;
    double acceptance = 0.0;
};

// The four acceptance rules: relative to its zone's settled price, a strictly
// in-the-money bid must be fully accepted and a strictly out-of-the-money bid
// fully rejected, on both market sides.
inline std::vector<ConsistencyViolation>
verify_consistency(const BidBook& book, const std::vector<double>& acceptances,
                   const PriceSheet& prices) {
    if (acceptances.size() != book.bids.size())
        throw InputError("acceptance vector size does not match bid book");
    std::vector<ConsistencyViolation> out;
    for (std::size_t i = 0; i < book.bids.size(); ++i) {
        const Bid& b = book.bids[i];
        const double x = acceptances[i];
        const std::optional<double> mcp = prices.settled(b.product, b.zone);
        if (!mcp) {
            if (x > tol::comparison)
                throw InputError("no settled price for traded pair " +
                                 std::string(product_code(b.product)) + "/" + b.zone);
            continue;
        }
        const bool full = x > 1.0 - tol::comparison;
        const bool none = x < tol::comparison;
        const bool above = b.price - *mcp > tol::comparison;
        const bool below = *mcp - b.price > tol::comparison;
        const char* rule = nullptr;
        if (b.is_demand() && above && !full)
            rule = "in-the-money demand not fully accepted";
        else if (b.is_demand() && below && !none)
            rule = "out-of-the-money demand not fully rejected";
        else if (b.is_supply() && below && !full)
            rule = "in-the-money supply not fully accepted";
        else if (b.is_supply() && above && !none)
            rule = "out-of-the-money supply not fully rejected";
        if (rule) out.push_back({b.id, rule, b.price, *mcp, x});
    }
    return out;
}

} // namespace coalloc
