#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coalloc/clearing.hpp"

namespace coalloc {

namespace detail {

// Shared scaffolding for the per-vertex recourse programs used by the
// deliverability and worst-case analyses.  Holds the activation variables
// with their supply caps, the activation-balance row, and the affine flow
// expression per line: flow_j = const_flow[j] + flow_terms[j] . a.
struct RecourseContext {
    lp::LinearProgram prog; // ap/an variables + balance row, nothing else
    std::vector<std::pair<std::string, int>> ap, an; // zone, variable
    std::vector<double> const_flow;
    std::vector<std::vector<std::pair<int, double>>> flow_terms;
    double demand_net = 0.0; // sum r+ - sum r- realized at the vertex
};

inline RecourseContext
make_recourse_context(const Topology& topo, const PtdfMatrix& ptdf,
                      const std::map<std::string, double>& supply_pos,
                      const std::map<std::string, double>& supply_neg,
                      const ActivationVertex& vertex,
                      const std::vector<double>& base_flows) {
    RecourseContext ctx;
    for (const auto& [z, cap] : supply_pos)
        if (cap > tol::feasibility)
            ctx.ap.push_back({z, ctx.prog.add_variable(0.0, cap)});
    for (const auto& [z, cap] : supply_neg)
        if (cap > tol::feasibility)
            ctx.an.push_back({z, ctx.prog.add_variable(0.0, cap)});

    double volume = 0.0;
    for (const auto& [z, r] : vertex.r_pos) {
        ctx.demand_net += r;
        volume += r;
    }
    for (const auto& [z, r] : vertex.r_neg) {
        ctx.demand_net -= r;
        volume += r;
    }
    {
        std::vector<std::pair<int, double>> terms;
        for (const auto& [z, v] : ctx.ap) terms.push_back({v, 1.0});
        for (const auto& [z, v] : ctx.an) terms.push_back({v, -1.0});
        ctx.prog.add_constraint(std::move(terms), lp::Relation::Equal, ctx.demand_net,
                                "abal");
    }
    // Activation answers realized imbalance.  A vertex that realizes nothing
    // admits none, so the base flows must stand on their own; without this,
    // opposite-sign activation pairs would act as phantom transmission.
    if (volume <= tol::feasibility && !(ctx.ap.empty() && ctx.an.empty())) {
        std::vector<std::pair<int, double>> terms;
        for (const auto& [z, v] : ctx.ap) terms.push_back({v, 1.0});
        for (const auto& [z, v] : ctx.an) terms.push_back({v, 1.0});
        ctx.prog.add_constraint(std::move(terms), lp::Relation::LessEq, 0.0, "anull");
    }

    const std::size_t nlines = topo.lines.size();
    ctx.const_flow.assign(nlines, 0.0);
    ctx.flow_terms.assign(nlines, {});
    for (std::size_t j = 0; j < nlines; ++j) {
        double c = base_flows.empty() ? 0.0 : base_flows[j];
        // Realized demand r+ withdraws, r- injects; with the withdrawal
        // convention their flow contribution enters with +ptdf weight.
        for (const auto& [z, r] : vertex.r_pos)
            c += ptdf.entry(topo.zone_index(z), static_cast<int>(j)) * r;
        for (const auto& [z, r] : vertex.r_neg)
            c -= ptdf.entry(topo.zone_index(z), static_cast<int>(j)) * r;
        ctx.const_flow[j] = c;
        for (const auto& [z, v] : ctx.ap) {
            const double p = ptdf.entry(topo.zone_index(z), static_cast<int>(j));
            if (p != 0.0) ctx.flow_terms[j].push_back({v, -p});
        }
        for (const auto& [z, v] : ctx.an) {
            const double p = ptdf.entry(topo.zone_index(z), static_cast<int>(j));
            if (p != 0.0) ctx.flow_terms[j].push_back({v, p});
        }
    }
    return ctx;
}

inline RecoursePlan extract_plan(const RecourseContext& ctx, const lp::Solution& sol) {
    RecoursePlan plan;
    for (const auto& [z, v] : ctx.ap) {
        const double a = std::max(0.0, sol.x[static_cast<std::size_t>(v)]);
        if (a > tol::feasibility) plan.activate_pos[z] = a;
    }
    for (const auto& [z, v] : ctx.an) {
        const double a = std::max(0.0, sol.x[static_cast<std::size_t>(v)]);
        if (a > tol::feasibility) plan.activate_neg[z] = a;
    }
    return plan;
}

inline std::vector<double> eval_flows(const RecourseContext& ctx, const lp::Solution& sol) {
    std::vector<double> flows = ctx.const_flow;
    for (std::size_t j = 0; j < flows.size(); ++j)
        for (const auto& [v, c] : ctx.flow_terms[j])
            flows[j] += c * sol.x[static_cast<std::size_t>(v)];
    return flows;
}

inline std::vector<double> energy_base_flows(const BidBook& book, const Topology& topo,
                                             const PtdfMatrix& ptdf,
                                             const std::vector<double>& x) {
    std::map<std::string, double> inj;
    for (std::size_t i = 0; i < book.bids.size(); ++i) {
        const Bid& b = book.bids[i];
        if (b.product == Product::Energy) inj[b.zone] -= x[i] * b.quantity;
    }
    double imb = 0.0;
    for (const auto& [z, q] : inj) imb += q;
    if (std::abs(imb) > tol::optimality)
        throw InputError("deliverability check requires a balanced energy dispatch");
    if (imb != 0.0) inj[topo.slack] -= imb;
    return flows_from_injections(ptdf, inj);
}

} // namespace detail

struct LineViolation {
    long long line_id = 0;
    double load = 0.0;     // flow realized by the least-violating recourse
    double capacity = 0.0; // |load| > capacity for reported entries
};

struct VertexCheck {
    ActivationVertex vertex;
    bool feasible = false;
    bool balance_feasible = true; // accepted supply can cover realized demand
    RecoursePlan witness;         // minimal-total-activation plan when feasible
    std::vector<double> flows;    // per line, under witness or least violation
    std::vector<LineViolation> violations;
};

struct DeliverabilityReport {
    bool feasible = true;
    std::vector<VertexCheck> checks; // one per vertex, vertex id order
};

// For a fixed dispatch, certify per activation vertex that some activation of
// the accepted reserve supply balances realized demand within line limits.
inline DeliverabilityReport
deliverability_check(const std::vector<double>& acceptances, const BidBook& book,
                     const Topology& topo, long long vertex_cap = kDefaultVertexCap) {
    if (acceptances.size() != book.bids.size())
        throw InputError("acceptance vector size does not match bid book");
    detail::require_valid(book, topo);
    const PtdfMatrix ptdf = build_ptdf(topo);
    const std::vector<double> base = detail::energy_base_flows(book, topo, ptdf, acceptances);
    const auto reserves = detail::reserve_volumes(book, acceptances);
    std::map<std::string, double> spos, sneg;
    for (const auto& [z, zr] : reserves) {
        spos[z] = zr.supply_pos;
        sneg[z] = zr.supply_neg;
    }

    DeliverabilityReport report;
    for (const ActivationVertex& vert :
         detail::realized_vertices(book, topo, acceptances, vertex_cap)) {
        const detail::RecourseContext ctx =
            detail::make_recourse_context(topo, ptdf, spos, sneg, vert, base);
        VertexCheck check;
        check.vertex = vert;

        // Witness program: minimal total activation subject to line limits.
        lp::LinearProgram feas = ctx.prog;
        for (const auto& [z, v] : ctx.ap) feas.set_objective(v, -1.0);
        for (const auto& [z, v] : ctx.an) feas.set_objective(v, -1.0);
        for (std::size_t j = 0; j < topo.lines.size(); ++j) {
            const double cap = topo.lines[j].capacity;
            auto fwd = ctx.flow_terms[j];
            feas.add_constraint(std::move(fwd), lp::Relation::LessEq, cap - ctx.const_flow[j]);
            std::vector<std::pair<int, double>> rev;
            for (const auto& [v, c] : ctx.flow_terms[j]) rev.push_back({v, -c});
            feas.add_constraint(std::move(rev), lp::Relation::LessEq, cap + ctx.const_flow[j]);
        }
        const lp::Solution fsol = lp::solve(feas);
        if (fsol.ok()) {
            check.feasible = true;
            check.witness = detail::extract_plan(ctx, fsol);
            check.flows = detail::eval_flows(ctx, fsol);
            report.checks.push_back(std::move(check));
            continue;
        }
        if (fsol.status != lp::Status::Infeasible)
            throw SolverError(std::string("deliverability witness solve ") +
                              lp::status_name(fsol.status));

        // Diagnosis program: allow per-line violation slack, minimize its
        // total (with a whisper of activation cost for determinism).
        lp::LinearProgram diag = ctx.prog;
        for (const auto& [z, v] : ctx.ap) diag.set_objective(v, -1e-6);
        for (const auto& [z, v] : ctx.an) diag.set_objective(v, -1e-6);
        std::vector<int> slack(topo.lines.size());
        for (std::size_t j = 0; j < topo.lines.size(); ++j)
            slack[j] = diag.add_variable(0.0, lp::inf, -1.0);
        for (std::size_t j = 0; j < topo.lines.size(); ++j) {
            const double cap = topo.lines[j].capacity;
            auto fwd = ctx.flow_terms[j];
            fwd.push_back({slack[j], -1.0});
            diag.add_constraint(std::move(fwd), lp::Relation::LessEq, cap - ctx.const_flow[j]);
            std::vector<std::pair<int, double>> rev;
            for (const auto& [v, c] : ctx.flow_terms[j]) rev.push_back({v, -c});
            rev.push_back({slack[j], -1.0});
            diag.add_constraint(std::move(rev), lp::Relation::LessEq, cap + ctx.const_flow[j]);
        }
        const lp::Solution dsol = lp::solve(diag);
        check.feasible = false;
        report.feasible = false;
        if (!dsol.ok()) {
            // Not even violation slack helps: accepted supply cannot balance
            // the realized demand at all.
            check.balance_feasible = false;
            report.checks.push_back(std::move(check));
            continue;
        }
        check.witness = detail::extract_plan(ctx, dsol);
        check.flows = detail::eval_flows(ctx, dsol);
        for (std::size_t j = 0; j < topo.lines.size(); ++j) {
            const double over = std::abs(check.flows[j]) - topo.lines[j].capacity;
            if (over > tol::optimality)
                check.violations.push_back(
                    {topo.lines[j].id, check.flows[j], topo.lines[j].capacity});
        }
        report.checks.push_back(std::move(check));
    }
    return report;
}

struct WorstCaseEntry {
    long long line_id = 0;
    int direction = +1; // +1 forward, -1 backward
    double capacity = 0.0;
    double load = 0.0; // maximal directed load over vertices (direction * flow)
    int vertex_id = -1;
    RecoursePlan plan; // recourse in force when the load is attained
};

struct WorstCaseReport {
    bool with_recourse = false;
    std::vector<WorstCaseEntry> entries;    // per line: forward then backward
    std::vector<int> skipped_vertices;      // recourse cannot balance demand
};

// Extreme per-line loads across activation vertices.  With recourse off, the
// activation only covers realized demand at minimal volume and the report
// takes the adversarial worst load within that policy; with recourse on,
// each vertex uses the load-minimizing co-activation and the report shows
// what remains.
inline WorstCaseReport worst_case_report(const ClearingOutcome& outcome,
                                         const Topology& topo, bool with_recourse) {
    if (outcome.mode == ClearingMode::Decoupled)
        throw InputError("worst_case_report requires a co-allocated outcome");
    const PtdfMatrix ptdf = build_ptdf(topo);
    std::map<std::string, double> spos, sneg;
    for (const auto& [z, zr] : outcome.reserves) {
        spos[z] = zr.supply_pos;
        sneg[z] = zr.supply_neg;
    }

    WorstCaseReport report;
    report.with_recourse = with_recourse;
    const std::size_t nlines = topo.lines.size();
    report.entries.resize(2 * nlines);
    for (std::size_t j = 0; j < nlines; ++j) {
        for (int d = 0; d < 2; ++d) {
            WorstCaseEntry& e = report.entries[2 * j + static_cast<std::size_t>(d)];
            e.line_id = topo.lines[j].id;
            e.direction = d == 0 ? +1 : -1;
            e.capacity = topo.lines[j].capacity;
            e.load = -lp::inf;
        }
    }

    for (const ActivationVertex& vert : outcome.vertices) {
        const detail::RecourseContext ctx =
            detail::make_recourse_context(topo, ptdf, spos, sneg, vert, outcome.base_flows);

        if (!with_recourse) {
            // Stage 1: minimal total activation covering realized demand.
            lp::LinearProgram mintot = ctx.prog;
            for (const auto& [z, v] : ctx.ap) mintot.set_objective(v, -1.0);
            for (const auto& [z, v] : ctx.an) mintot.set_objective(v, -1.0);
            const lp::Solution msol = lp::solve(mintot);
            if (msol.status == lp::Status::Infeasible) {
                report.skipped_vertices.push_back(vert.id);
                continue;
            }
            if (!msol.ok())
                throw SolverError(std::string("worst-case activation solve ") +
                                  lp::status_name(msol.status));
            const double min_total = -msol.objective;
            // Stage 2, per line and direction: adversarial directed load
            // among the minimal-activation recourses.
            for (std::size_t j = 0; j < nlines; ++j) {
                for (int dir : {+1, -1}) {
                    lp::LinearProgram adv = ctx.prog;
                    for (const auto& [v, c] : ctx.flow_terms[j])
                        adv.set_objective(v, dir * c);
                    std::vector<std::pair<int, double>> total;
                    for (const auto& [z, v] : ctx.ap) total.push_back({v, 1.0});
                    for (const auto& [z, v] : ctx.an) total.push_back({v, 1.0});
                    // Band just wide enough to absorb certified residuals.
                    adv.add_constraint(std::move(total), lp::Relation::LessEq,
                                       min_total + 1e-8 * std::max(1.0, min_total));
                    const lp::Solution asol = lp::solve(adv);
                    if (!asol.ok())
                        throw SolverError(std::string("worst-case adversarial solve ") +
                                          lp::status_name(asol.status));
                    const double load = asol.objective + dir * ctx.const_flow[j];
                    WorstCaseEntry& e =
                        report.entries[2 * j + static_cast<std::size_t>(dir < 0)];
                    if (load > e.load + tol::feasibility) {
                        e.load = load;
                        e.vertex_id = vert.id;
                        e.plan = detail::extract_plan(ctx, asol);
                    }
                }
            }
            continue;
        }

        // Recourse on.  Stage 1: minimize the maximum relative line loading.
        lp::LinearProgram stage1 = ctx.prog;
        const int tvar = stage1.add_variable(0.0, lp::inf, -1.0);
        std::vector<double> ecap(nlines);
        for (std::size_t j = 0; j < nlines; ++j)
            ecap[j] = std::max(topo.lines[j].capacity, tol::feasibility);
        for (std::size_t j = 0; j < nlines; ++j) {
            auto fwd = ctx.flow_terms[j];
            fwd.push_back({tvar, -ecap[j]});
            stage1.add_constraint(std::move(fwd), lp::Relation::LessEq, -ctx.const_flow[j]);
            std::vector<std::pair<int, double>> rev;
            for (const auto& [v, c] : ctx.flow_terms[j]) rev.push_back({v, -c});
            rev.push_back({tvar, -ecap[j]});
            stage1.add_constraint(std::move(rev), lp::Relation::LessEq, ctx.const_flow[j]);
        }
        const lp::Solution s1 = lp::solve(stage1);
        if (s1.status == lp::Status::Infeasible) {
            report.skipped_vertices.push_back(vert.id);
            continue;
        }
        if (!s1.ok())
            throw SolverError(std::string("worst-case loading solve ") +
                              lp::status_name(s1.status));
        const double tstar = -s1.objective;
        // Stage 2: minimal total activation among near-optimal loadings.
        lp::LinearProgram stage2 = ctx.prog;
        for (const auto& [z, v] : ctx.ap) stage2.set_objective(v, -1.0);
        for (const auto& [z, v] : ctx.an) stage2.set_objective(v, -1.0);
        // Band just wide enough to absorb certified residuals; keeps reported
        // loads within ~1e-8 of the true min-max value.
        const double tcap = tstar + 1e-8 * std::max(1.0, std::abs(tstar));
        for (std::size_t j = 0; j < nlines; ++j) {
            auto fwd = ctx.flow_terms[j];
            stage2.add_constraint(std::move(fwd), lp::Relation::LessEq,
                                  tcap * ecap[j] + 1e-9 - ctx.const_flow[j]);
            std::vector<std::pair<int, double>> rev;
            for (const auto& [v, c] : ctx.flow_terms[j]) rev.push_back({v, -c});
            stage2.add_constraint(std::move(rev), lp::Relation::LessEq,
                                  tcap * ecap[j] + 1e-9 + ctx.const_flow[j]);
        }
        const lp::Solution s2 = lp::solve(stage2);
        if (!s2.ok())
            throw SolverError(std::string("worst-case tiebreak solve ") +
                              lp::status_name(s2.status));
        const RecoursePlan plan = detail::extract_plan(ctx, s2);
        const std::vector<double> flows = detail::eval_flows(ctx, s2);
        for (std::size_t j = 0; j < nlines; ++j) {
            for (int dir : {+1, -1}) {
                const double load = dir * flows[j];
                WorstCaseEntry& e = report.entries[2 * j + static_cast<std::size_t>(dir < 0)];
                if (load > e.load + tol::feasibility) {
                    e.load = load;
                    e.vertex_id = vert.id;
                    e.plan = plan;
                }
            }
        }
    }
    return report;
}

} // namespace coalloc
