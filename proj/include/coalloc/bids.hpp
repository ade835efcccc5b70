#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "coalloc/errors.hpp"
#include "coalloc/network.hpp"

namespace coalloc {

enum class Product { Energy, ReservePos, ReserveNeg };

inline const char* product_code(Product p) {
    switch (p) {
    case Product::Energy: return "E";
    case Product::ReservePos: return "R+";
    case Product::ReserveNeg: return "R-";
    }
    return "?";
}

inline Product parse_product(const std::string& code) {
    if (code == "E") return Product::Energy;
    if (code == "R+") return Product::ReservePos;
    if (code == "R-") return Product::ReserveNeg;
    throw InputError("unknown product code '" + code + "' (expected E, R+ or R-)");
}

inline const std::vector<Product>& all_products() {
    static const std::vector<Product> ps = {Product::Energy, Product::ReservePos,
                                            Product::ReserveNeg};
    return ps;
}

// Divisible quantity-price bid.  Sign convention: quantity > 0 is demand,
// quantity < 0 is supply.  Prices may be any finite value.
struct Bid {
    std::string id;
    Product product = Product::Energy;
    std::string zone;
    double quantity = 0.0; // MWh, signed
    double price = 0.0;    // EUR/MWh

    bool is_demand() const { return quantity > 0.0; }
    bool is_supply() const { return quantity < 0.0; }
};

struct BidBook {
    std::vector<Bid> bids;

    std::vector<int> indices_of(Product p) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < bids.size(); ++i)
            if (bids[i].product == p) out.push_back(static_cast<int>(i));
        return out;
    }

    std::vector<int> indices_of(Product p, const std::string& zone) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < bids.size(); ++i)
            if (bids[i].product == p && bids[i].zone == zone)
                out.push_back(static_cast<int>(i));
        return out;
    }

    const Bid& by_id(const std::string& id) const {
        for (const Bid& b : bids)
            if (b.id == id) return b;
        throw InputError("unknown bid id '" + id + "'");
    }

    int index_of_id(const std::string& id) const {
        for (std::size_t i = 0; i < bids.size(); ++i)
            if (bids[i].id == id) return static_cast<int>(i);
        return -1;
    }
};

// Returns human-readable violation messages, empty when the book is valid
// against the topology: known zones, nonzero quantities, finite numbers,
// unique nonempty ids.
inline std::vector<std::string> validate(const BidBook& book, const Topology& topo) {
    std::vector<std::string> issues;
    std::map<std::string, int> seen;
    for (const Bid& b : book.bids) {
        if (b.id.empty())
            issues.push_back("bid with empty id");
        else if (++seen[b.id] == 2)
            issues.push_back("duplicate bid id '" + b.id + "'");
        if (!topo.has_zone(b.zone))
            issues.push_back("bid '" + b.id + "' references unknown zone '" + b.zone + "'");
        if (b.quantity == 0.0 || !std::isfinite(b.quantity))
            issues.push_back("bid '" + b.id + "' has invalid quantity");
        if (!std::isfinite(b.price))
            issues.push_back("bid '" + b.id + "' has non-finite price");
    }
    return issues;
}

// Total offered volume per zone for one product and side, in positive MWh.
// side_demand = true sums demand bids, false sums |supply|.
inline std::map<std::string, double> zonal_volume(const BidBook& book, Product p,
                                                  bool side_demand) {
    std::map<std::string, double> out;
    for (const Bid& b : book.bids) {
        if (b.product != p) continue;
        if (side_demand && b.is_demand()) out[b.zone] += b.quantity;
        if (!side_demand && b.is_supply()) out[b.zone] += -b.quantity;
    }
    return out;
}

// TSW of an acceptance vector: sum of x_i * q_i * p_i over all bids.  Positive
// contributions are consumption utility, negative ones production cost.
inline double total_social_welfare(const BidBook& book, const std::vector<double>& acceptance) {
    if (acceptance.size() != book.bids.size())
        throw InputError("acceptance vector length does not match bid book");
    double tsw = 0.0;
    for (std::size_t i = 0; i < book.bids.size(); ++i)
        tsw += acceptance[i] * book.bids[i].quantity * book.bids[i].price;
    return tsw;
}

} // namespace coalloc
