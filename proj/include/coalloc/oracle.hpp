#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "coalloc/robustness.hpp"

namespace coalloc {

struct GridSpec {
    double step = 1.0;       // acceptance granularity in MWh; must divide every |q|
    int samples = 100;       // interior realizations for sample_realizations
    std::uint64_t seed = 20240811;
    long long candidate_cap = 10'000'000;
};

struct OracleResult {
    double tsw = 0.0;
    std::vector<double> acceptance;
    long long evaluated = 0; // candidates passing the balance screens
};

namespace detail {

// Recourse feasibility of one realization of reserve demand against fixed
// accepted supply and base energy flows.
inline bool recourse_feasible(const Topology& topo, const PtdfMatrix& ptdf,
                              const std::map<std::string, double>& supply_pos,
                              const std::map<std::string, double>& supply_neg,
                              const ActivationVertex& realization,
                              const std::vector<double>& base_flows) {
    RecourseContext ctx =
        make_recourse_context(topo, ptdf, supply_pos, supply_neg, realization, base_flows);
    lp::LinearProgram feas = ctx.prog;
    for (std::size_t j = 0; j < topo.lines.size(); ++j) {
        const double cap = topo.lines[j].capacity;
        auto fwd = ctx.flow_terms[j];
        feas.add_constraint(std::move(fwd), lp::Relation::LessEq, cap - ctx.const_flow[j]);
        std::vector<std::pair<int, double>> rev;
        for (const auto& [v, c] : ctx.flow_terms[j]) rev.push_back({v, -c});
        feas.add_constraint(std::move(rev), lp::Relation::LessEq, cap + ctx.const_flow[j]);
    }
    const lp::Solution sol = lp::solve(feas);
    if (sol.ok()) return true;
    if (sol.status == lp::Status::Infeasible) return false;
    throw SolverError(std::string("recourse feasibility solve ") + lp::status_name(sol.status));
}

} // namespace detail

// Exhaustive grid search over acceptance vectors.  Every bid's acceptance
// ranges over multiples of step/|q|; candidates failing the mode's balance
// rules are discarded, co-allocated survivors additionally face a recourse
// feasibility check at every activation vertex.  Slow by design: this is the
// measuring stick for the LP clearing, sharing only the tiny recourse LP.
inline OracleResult brute_force_clear(const BidBook& book, const Topology& topo,
                                      ClearingMode mode, const GridSpec& grid = {},
                                      long long vertex_cap = kDefaultVertexCap) {
    detail::require_valid(book, topo);
    if (!(grid.step > 0.0)) throw InputError("grid step must be positive");
    const std::size_t n = book.bids.size();
    std::vector<int> levels(n);
    double combos = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double steps = std::abs(book.bids[i].quantity) / grid.step;
        if (std::abs(steps - std::round(steps)) > 1e-9)
            throw InputError("grid step does not divide quantity of bid '" +
                             book.bids[i].id + "'");
        levels[i] = static_cast<int>(std::round(steps)) + 1;
        combos *= levels[i];
    }
    if (combos > static_cast<double>(grid.candidate_cap))
        throw CapacityError("oracle grid would enumerate " + std::to_string(combos) +
                            " candidates, cap is " + std::to_string(grid.candidate_cap));

    const PtdfMatrix ptdf = build_ptdf(topo);
    const auto patterns = detail::vertex_sign_patterns(detail::demand_options(book, topo),
                                                       vertex_cap);

    // Vertex feasibility depends only on the zonal aggregates of a candidate;
    // memoize on them since many acceptance vectors share aggregates.
    std::map<std::vector<double>, bool> memo;

    // Flat per-bid data keeps the screening loop allocation-free.
    const std::size_t nz = topo.zones.size();
    std::vector<int> bid_slot(n); // product-major zonal accumulator slot
    std::vector<double> bid_q(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Bid& b = book.bids[i];
        bid_slot[i] = static_cast<int>(b.product) * static_cast<int>(nz) +
                      topo.zone_index(b.zone);
        bid_q[i] = b.quantity;
    }

    OracleResult best;
    best.tsw = -lp::inf;
    std::vector<int> idx(n, 0);
    std::vector<double> x(n, 0.0);
    std::vector<double> zonal(3 * nz, 0.0);
    while (true) {
        for (std::size_t i = 0; i < n; ++i)
            x[i] = levels[i] == 1 ? 0.0 : static_cast<double>(idx[i]) / (levels[i] - 1);

        bool feasible = true;
        // Balance screens.
        std::fill(zonal.begin(), zonal.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            zonal[static_cast<std::size_t>(bid_slot[i])] += x[i] * bid_q[i];
        if (mode == ClearingMode::Decoupled) {
            for (double v : zonal)
                if (std::abs(v) > 1e-9) feasible = false;
        } else {
            double esys = 0.0, psys = 0.0, nsys = 0.0;
            for (std::size_t z = 0; z < nz; ++z) {
                esys += zonal[static_cast<int>(Product::Energy) * nz + z];
                psys += zonal[static_cast<int>(Product::ReservePos) * nz + z];
                nsys += zonal[static_cast<int>(Product::ReserveNeg) * nz + z];
            }
            if (std::abs(esys) > 1e-9) feasible = false;
            if (mode == ClearingMode::Balanced &&
                (std::abs(psys) > 1e-9 || std::abs(nsys) > 1e-9))
                feasible = false;
        }

        if (feasible && mode != ClearingMode::Decoupled) {
            const auto reserves = detail::reserve_volumes(book, x);
            std::vector<double> key;
            for (const Zone& z : topo.zones) {
                const ZonalReserve zr =
                    reserves.count(z.id) ? reserves.at(z.id) : ZonalReserve{};
                key.push_back(zonal[static_cast<int>(Product::Energy) * nz +
                                    static_cast<std::size_t>(z.index)]);
                key.push_back(zr.demand_pos);
                key.push_back(zr.demand_neg);
                key.push_back(zr.supply_pos);
                key.push_back(zr.supply_neg);
            }
            auto it = memo.find(key);
            if (it != memo.end()) {
                feasible = it->second;
            } else {
                std::map<std::string, double> spos, sneg;
                for (const auto& [z, zr] : reserves) {
                    spos[z] = zr.supply_pos;
                    sneg[z] = zr.supply_neg;
                }
                const std::vector<double> base =
                    detail::energy_base_flows(book, topo, ptdf, x);
                const auto verts = detail::realized_vertices(book, topo, x, vertex_cap);
                bool ok = true;
                for (const ActivationVertex& v : verts) {
                    if (!detail::recourse_feasible(topo, ptdf, spos, sneg, v, base)) {
                        ok = false;
                        break;
                    }
                }
                memo.emplace(std::move(key), ok);
                feasible = ok;
            }
        }

        if (feasible) {
            ++best.evaluated;
            const double tsw = total_social_welfare(book, x);
            if (tsw > best.tsw + 1e-12) {
                best.tsw = tsw;
                best.acceptance = x;
            }
        }

        // Odometer step, last bid fastest.
        std::size_t k = n;
        while (k > 0) {
            --k;
            if (++idx[k] < levels[k]) break;
            idx[k] = 0;
            if (k == 0) return best;
        }
        if (n == 0) return best;
    }
}

// Monte Carlo check of the robustness claim: draw interior realizations of
// the accepted reserve demand (respecting per-zone complementarity) and count
// those without feasible recourse.
inline int sample_realizations(const ClearingOutcome& outcome, const Topology& topo,
                               const GridSpec& grid = {}) {
    if (outcome.mode == ClearingMode::Decoupled)
        throw InputError("sample_realizations requires a co-allocated outcome");
    const PtdfMatrix ptdf = build_ptdf(topo);
    std::map<std::string, double> spos, sneg;
    std::vector<std::pair<std::string, std::pair<double, double>>> boxes;
    for (const auto& [z, zr] : outcome.reserves) {
        spos[z] = zr.supply_pos;
        sneg[z] = zr.supply_neg;
        if (zr.demand_pos > tol::feasibility || zr.demand_neg > tol::feasibility)
            boxes.push_back({z, {zr.demand_pos, zr.demand_neg}});
    }

    std::mt19937_64 rng(grid.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int violations = 0;
    for (int s = 0; s < grid.samples; ++s) {
        ActivationVertex real;
        real.id = s;
        for (const auto& [z, d] : boxes) {
            // One signed draw per zone: u < 0 realizes negative demand.
            const double u = 2.0 * unit(rng) - 1.0;
            if (u >= 0.0)
                real.r_pos[z] = u * d.first;
            else
                real.r_neg[z] = -u * d.second;
        }
        if (!detail::recourse_feasible(topo, ptdf, spos, sneg, real, outcome.base_flows))
            ++violations;
    }
    return violations;
}

} // namespace coalloc
