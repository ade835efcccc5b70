#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coalloc/errors.hpp"

namespace coalloc {

inline constexpr long long kDefaultVertexCap = 10'000;

// Extreme realization of zonal reserve demand: per zone either nothing, the
// full accepted positive demand, or the full accepted negative demand.
// Positive and negative demand never arise together in one zone.
struct ActivationVertex {
    int id = 0;
    std::map<std::string, double> r_pos; // zone -> realized positive demand, MWh
    std::map<std::string, double> r_neg;

    double pos(const std::string& zone) const {
        auto it = r_pos.find(zone);
        return it == r_pos.end() ? 0.0 : it->second;
    }
    double neg(const std::string& zone) const {
        auto it = r_neg.find(zone);
        return it == r_neg.end() ? 0.0 : it->second;
    }

    std::string label() const {
        std::string out;
        for (const auto& [zone, v] : r_pos)
            if (v > 0.0) out += (out.empty() ? "" : " ") + zone + ":+";
        for (const auto& [zone, v] : r_neg)
            if (v > 0.0) out += (out.empty() ? "" : " ") + zone + ":-";
        return out.empty() ? "none" : out;
    }
};

namespace detail {

// Shared odometer over per-zone options.  options[z].second lists the signs
// available at that zone, always beginning with 0 (no realization); the first
// zone is the most significant digit, so output order is lexicographic by
// (zone position, option position).
inline std::vector<std::vector<std::pair<std::string, int>>>
vertex_sign_patterns(const std::vector<std::pair<std::string, std::vector<int>>>& options,
                     long long cap) {
    long long count = 1;
    for (const auto& [zone, signs] : options) {
        count *= static_cast<long long>(signs.size());
        if (count > cap)
            throw CapacityError("activation vertex count exceeds cap of " + std::to_string(cap));
    }
    std::vector<std::vector<std::pair<std::string, int>>> out;
    out.reserve(static_cast<std::size_t>(count));
    std::vector<std::size_t> digit(options.size(), 0);
    for (long long k = 0; k < count; ++k) {
        std::vector<std::pair<std::string, int>> pattern;
        for (std::size_t z = 0; z < options.size(); ++z) {
            const int sign = options[z].second[digit[z]];
            if (sign != 0) pattern.push_back({options[z].first, sign});
        }
        out.push_back(std::move(pattern));
        for (std::size_t z = options.size(); z-- > 0;) {
            if (++digit[z] < options[z].second.size()) break;
            digit[z] = 0;
        }
    }
    return out;
}

} // namespace detail

// Full vertex set for fixed accepted reserve demands (zone -> (D+, D-)).
// Zones absent from the map hold no reserve demand.
inline std::vector<ActivationVertex>
enumerate_vertices(const std::map<std::string, std::pair<double, double>>& demand,
                   long long cap = kDefaultVertexCap) {
    std::vector<std::pair<std::string, std::vector<int>>> options;
    for (const auto& [zone, d] : demand) {
        if (d.first < 0.0 || d.second < 0.0)
            throw InputError("negative reserve demand at zone '" + zone + "'");
        std::vector<int> signs = {0};
        if (d.first > 0.0) signs.push_back(+1);
        if (d.second > 0.0) signs.push_back(-1);
        options.push_back({zone, std::move(signs)});
    }
    std::vector<ActivationVertex> out;
    int id = 0;
    for (auto& pattern : detail::vertex_sign_patterns(options, cap)) {
        ActivationVertex v;
        v.id = id++;
        for (const auto& [zone, sign] : pattern) {
            if (sign > 0)
                v.r_pos[zone] = demand.at(zone).first;
            else
                v.r_neg[zone] = demand.at(zone).second;
        }
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace coalloc
