#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "coalloc/clearing.hpp"
#include "helpers.hpp"

using namespace coalloc;

namespace {

void require_acceptance(const std::vector<double>& got, const std::vector<double>& want,
                        double tol = 1e-6) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        INFO("bid index " << i);
        REQUIRE(std::abs(got[i] - want[i]) <= tol);
    }
}

// Independent re-check of a committed plan: activation balance and line
// limits from first principles.
void require_committed_feasible(const ClearingOutcome& out, const Topology& topo) {
    REQUIRE(out.vertices.size() == out.committed.size());
    const PtdfMatrix ptdf = build_ptdf(topo);
    for (std::size_t v = 0; v < out.vertices.size(); ++v) {
        const ActivationVertex& vert = out.vertices[v];
        const RecoursePlan& plan = out.committed[v];
        double rpos = 0.0, rneg = 0.0;
        for (const auto& [zone, mw] : vert.r_pos) rpos += mw;
        for (const auto& [zone, mw] : vert.r_neg) rneg += mw;
        double apos = 0.0, aneg = 0.0;
        for (const auto& [zone, mw] : plan.activate_pos) apos += mw;
        for (const auto& [zone, mw] : plan.activate_neg) aneg += mw;
        REQUIRE(std::abs(apos - aneg - (rpos - rneg)) <= 1e-7);

        std::map<std::string, double> inj;
        for (const Zone& z : topo.zones) {
            inj[z.id] = -out.position(Product::Energy, z.id) + plan.pos(z.id) - plan.neg(z.id) -
                        vert.pos(z.id) + vert.neg(z.id);
        }
        double sum = 0.0;
        for (const auto& [zone, mw] : inj) sum += mw;
        REQUIRE(std::abs(sum) <= 1e-7);
        inj[topo.slack] -= sum;
        const auto flows = flows_from_injections(ptdf, inj);
        for (std::size_t j = 0; j < flows.size(); ++j) {
            INFO("vertex " << vert.label() << " line " << topo.lines[j].id);
            REQUIRE(std::abs(flows[j]) <= topo.lines[j].capacity + 1e-7);
        }
    }
}

} // namespace

TEST_CASE("decoupled clearing of the reference book") {
    const ClearingOutcome out = clear_decoupled(testutil::reference_bids());
    REQUIRE(std::abs(out.tsw - 24.0) <= 1e-6);
    require_acceptance(out.acceptance, {0, 0, 1, 1, 0, 1, 1, 0, 0});
    // Per-zone, per-product positions all net to zero.
    for (const auto& [product, zones] : out.positions)
        for (const auto& [zone, pos] : zones) REQUIRE(std::abs(pos) <= 1e-9);
    REQUIRE(out.base_flows.empty());
}

TEST_CASE("decoupled degenerate books") {
    BidBook lonely;
    lonely.bids = {{"d", Product::Energy, "A", 4.0, 50.0}};
    const auto out = clear_decoupled(lonely);
    REQUIRE(out.tsw == 0.0);
    REQUIRE(out.acceptance[0] <= 1e-9);

    BidBook pair;
    pair.bids = {{"d", Product::Energy, "B", 8.0, 20.0}, {"s", Product::Energy, "B", -8.0, 18.0}};
    const auto traded = clear_decoupled(pair);
    REQUIRE(std::abs(traded.tsw - 16.0) <= 1e-9);
    require_acceptance(traded.acceptance, {1, 1});
}

TEST_CASE("tie-break prefers earlier-listed bids") {
    BidBook book;
    book.bids = {{"d", Product::Energy, "A", 4.0, 10.0},
                 {"s1", Product::Energy, "A", -4.0, 10.0},
                 {"s2", Product::Energy, "A", -4.0, 10.0}};
    const auto out = clear_decoupled(book);
    REQUIRE(std::abs(out.tsw) <= 1e-9);
    require_acceptance(out.acceptance, {1, 1, 0}, 1e-6);
}

TEST_CASE("balanced co-allocation of the reference instance") {
    const Topology topo = testutil::four_zone();
    const auto solve = clear_coallocated(testutil::reference_bids(), topo, ClearingMode::Balanced);
    const ClearingOutcome& out = solve.outcome;

    REQUIRE(std::abs(out.tsw - 76.0) <= 1e-6);
    require_acceptance(out.acceptance, {1, 0, 1, 0.5, 1, 1, 0, 1, 1});

    REQUIRE(std::abs(out.position(Product::Energy, "A") + 4.0) <= 1e-6);
    REQUIRE(std::abs(out.position(Product::Energy, "B") - 4.0) <= 1e-6);
    REQUIRE(std::abs(out.position(Product::ReservePos, "A") + 4.0) <= 1e-6);
    REQUIRE(std::abs(out.position(Product::ReservePos, "B") - 4.0) <= 1e-6);
    REQUIRE(std::abs(out.position(Product::ReserveNeg, "B") - 4.0) <= 1e-6);
    REQUIRE(std::abs(out.position(Product::ReserveNeg, "C") + 4.0) <= 1e-6);

    const std::vector<double> base = {3.0, 1.0, -1.0, 1.0};
    REQUIRE(out.base_flows.size() == 4);
    for (int j = 0; j < 4; ++j) REQUIRE(std::abs(out.base_flows[j] - base[j]) <= 1e-6);

    // Only zone B holds reserve demand: three vertices.
    REQUIRE(out.vertices.size() == 3);
    require_committed_feasible(out, topo);

    // Balanced reserve books net to zero system-wide.
    double rpos = 0.0, rneg = 0.0;
    for (const auto& [zone, pos] : out.positions.at(Product::ReservePos)) rpos += pos;
    for (const auto& [zone, pos] : out.positions.at(Product::ReserveNeg)) rneg += pos;
    REQUIRE(std::abs(rpos) <= 1e-6);
    REQUIRE(std::abs(rneg) <= 1e-6);

    // The welfare-bearing part of the LP objective matches the reported TSW.
    double weights = 0.0;
    for (std::size_t i = 0; i < out.acceptance.size(); ++i)
        weights += detail::tiebreak_weight(i, out.acceptance.size()) * solve.solution.x[i];
    double welfare = 0.0;
    const BidBook book = testutil::reference_bids();
    for (std::size_t i = 0; i < book.bids.size(); ++i)
        welfare += solve.solution.x[i] * book.bids[i].quantity * book.bids[i].price;
    REQUIRE(std::abs(solve.solution.objective - weights - welfare) <= 1e-9);
    REQUIRE(std::abs(out.tsw - welfare) <= 1e-6);
}

TEST_CASE("overprocurement of the reference instance") {
    const Topology topo = testutil::four_zone();
    const auto solve =
        clear_coallocated(testutil::reference_bids(), topo, ClearingMode::Overprocure);
    const ClearingOutcome& out = solve.outcome;

    REQUIRE(std::abs(out.tsw - 80.0) <= 1e-6);
    require_acceptance(out.acceptance, {1, 1, 1, 0, 1, 1, 0.5, 1, 1});

    // 6 units of positive reserve supply cover 4 units of demand.
    double spos = 0.0, dpos = 0.0;
    for (const auto& [zone, r] : out.reserves) {
        spos += r.supply_pos;
        dpos += r.demand_pos;
    }
    REQUIRE(std::abs(spos - 6.0) <= 1e-6);
    REQUIRE(std::abs(dpos - 4.0) <= 1e-6);

    // Base energy flows already load line 4 at its limit.
    const std::vector<double> base = {6.0, 2.0, -2.0, 2.0};
    for (int j = 0; j < 4; ++j) REQUIRE(std::abs(out.base_flows[j] - base[j]) <= 1e-6);

    require_committed_feasible(out, topo);

    // Reserve positions may net negative (surplus supply) but never positive.
    for (Product p : {Product::ReservePos, Product::ReserveNeg}) {
        double net = 0.0;
        for (const auto& [zone, pos] : out.positions.at(p)) net += pos;
        REQUIRE(net <= 1e-6);
    }
}

TEST_CASE("zero capacities collapse to decoupled welfare") {
    const Topology topo = testutil::four_zone({0.0, 0.0, 0.0, 0.0});
    const BidBook book = testutil::reference_bids();
    const auto dec = clear_decoupled(book);
    for (ClearingMode mode : {ClearingMode::Balanced, ClearingMode::Overprocure}) {
        const auto out = clear_coallocated(book, topo, mode);
        REQUIRE(std::abs(out.outcome.tsw - dec.tsw) <= 1e-6);
        REQUIRE(std::abs(out.outcome.tsw - 24.0) <= 1e-6);
    }
}

TEST_CASE("unconstrained network unlocks full trade") {
    const Topology topo = testutil::four_zone({100.0, 100.0, 100.0, 100.0});
    const auto out = clear_coallocated(testutil::reference_bids(), topo, ClearingMode::Balanced);
    REQUIRE(std::abs(out.outcome.tsw - 92.0) <= 1e-6);
}

TEST_CASE("mode monotonicity on the reference instance") {
    const Topology topo = testutil::four_zone();
    const BidBook book = testutil::reference_bids();
    const double dec = clear_decoupled(book).tsw;
    const double bal = clear_coallocated(book, topo, ClearingMode::Balanced).outcome.tsw;
    const double over = clear_coallocated(book, topo, ClearingMode::Overprocure).outcome.tsw;
    REQUIRE(over >= bal - 1e-6);
    REQUIRE(bal >= dec - 1e-6);
}

TEST_CASE("clearing is deterministic") {
    const Topology topo = testutil::four_zone();
    const BidBook book = testutil::reference_bids();
    const auto a = clear_coallocated(book, topo, ClearingMode::Balanced);
    const auto b = clear_coallocated(book, topo, ClearingMode::Balanced);
    REQUIRE(a.outcome.acceptance == b.outcome.acceptance);
    REQUIRE(a.outcome.tsw == b.outcome.tsw);
}

TEST_CASE("vertex cap propagates") {
    const Topology topo = testutil::four_zone();
    REQUIRE_THROWS_AS(
        clear_coallocated(testutil::reference_bids(), topo, ClearingMode::Balanced, 2),
        CapacityError);
}

TEST_CASE("mode names round-trip") {
    for (ClearingMode m : {ClearingMode::Decoupled, ClearingMode::Balanced,
                           ClearingMode::Overprocure})
        REQUIRE(parse_mode(mode_name(m)) == m);
    REQUIRE_THROWS_AS(parse_mode("bogus"), InputError);
}
