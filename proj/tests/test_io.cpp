#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <string>

#include "coalloc/clearing.hpp"
#include "coalloc/io.hpp"
#include "coalloc/pricing.hpp"
#include "coalloc/robustness.hpp"
#include "helpers.hpp"

using namespace coalloc;

TEST_CASE("reference instance file parses") {
    const Instance inst = testutil::load_fixture();
    REQUIRE(inst.topology.zones.size() == 4);
    REQUIRE(inst.topology.slack == "A");
    REQUIRE(inst.topology.lines.size() == 4);
    REQUIRE(inst.topology.lines[3].capacity == 2.0);
    REQUIRE(inst.book.bids.size() == 9);
    REQUIRE(inst.book.bids[0].id == "EA12");
    REQUIRE(inst.book.bids[6].quantity == -4.0);
    REQUIRE(validate(inst.book, inst.topology).empty());

    REQUIRE(inst.has_overrides(ClearingMode::Balanced));
    REQUIRE(inst.has_overrides(ClearingMode::Overprocure));
    REQUIRE_FALSE(inst.has_overrides(ClearingMode::Decoupled));
    REQUIRE(inst.price_overrides.at(ClearingMode::Balanced).size() == 6);
    REQUIRE(inst.reference_surplus.at(ClearingMode::Overprocure).size() == 9);
}

TEST_CASE("number formatting round-trips exactly") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 200; ++i) {
        const double v = u(rng) * std::pow(10.0, int(i % 13) - 6);
        const std::string s = format_number(v);
        REQUIRE(std::strtod(s.c_str(), nullptr) == v);
    }
    REQUIRE(format_number(std::numeric_limits<double>::infinity()) == "inf");
    REQUIRE(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("recourse plan strings round-trip") {
    RecoursePlan plan;
    plan.activate_pos["A"] = 4.0;
    plan.activate_pos["B"] = 0.5;
    plan.activate_neg["C"] = 2.25;
    const std::string s = detail::plan_to_string(plan);
    const RecoursePlan back = detail::plan_from_string(s);
    REQUIRE(back.activate_pos == plan.activate_pos);
    REQUIRE(back.activate_neg == plan.activate_neg);
    REQUIRE(detail::plan_to_string(RecoursePlan{}) == "none");
    REQUIRE(detail::plan_from_string("none").total() == 0.0);
}

TEST_CASE("results documents round-trip bit-identically") {
    const Instance inst = testutil::load_fixture();
    const auto solve = clear_coallocated(inst.book, inst.topology, ClearingMode::Balanced);
    const PriceSheet prices =
        dual_price_intervals(solve.program, solve.solution, solve.outcome);
    const auto off = worst_case_report(solve.outcome, inst.topology, false);
    const auto on = worst_case_report(solve.outcome, inst.topology, true);

    const ResultsDoc doc =
        make_results_doc(inst.book, inst.topology, solve.outcome, prices, off, on);
    const std::string csv = results_to_csv(doc);
    const ResultsDoc back = parse_results(csv, "roundtrip");
    REQUIRE(results_to_csv(back) == csv);

    REQUIRE(back.mode == ClearingMode::Balanced);
    REQUIRE(back.tsw == doc.tsw);
    REQUIRE(back.acceptance_for(inst.book) == solve.outcome.acceptance);
    REQUIRE(back.vertices.size() == doc.vertices.size());
    REQUIRE(back.worst_off.has_value());
    REQUIRE(back.worst_on.has_value());
    REQUIRE(back.worst_off->entries.size() == off.entries.size());
    REQUIRE(back.prices.at(Product::Energy, "B").lo == prices.at(Product::Energy, "B").lo);

    // A decoupled document carries no flows, vertices or worst-case blocks.
    const auto dec = clear_decoupled(inst.book);
    const ResultsDoc mini = make_results_doc(
        inst.book, inst.topology, dec, decoupled_price_intervals(inst.book, dec));
    const std::string mini_csv = results_to_csv(mini);
    REQUIRE(results_to_csv(parse_results(mini_csv, "mini")) == mini_csv);
}

TEST_CASE("instance parse errors carry position and zone names") {
    auto expect_throw = [](const std::string& text, const std::string& needle) {
        try {
            parse_instance(text, "probe");
            FAIL("expected parse failure");
        } catch (const InputError& e) {
            INFO(e.what());
            REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    expect_throw("bogus header\n", "header");
    expect_throw("coalloc-instance v1\nzone A\nwobble 3\n", "wobble");
    expect_throw("coalloc-instance v1\nzone A\nzone B\nslack A\nline 1 A B x 10\n", "probe:5");
    expect_throw("coalloc-instance v1\nzone A\nzone B\nslack A\nline 1 A Q 1 10\n",
                 "unknown zone");
    expect_throw(
        "coalloc-instance v1\nzone A\nzone B\nslack A\nline 1 A B 1 10\nbid b1 E Q 4 10\n",
        "Q");
    // Duplicate bid ids are instance-level problems.
    expect_throw("coalloc-instance v1\nzone A\nzone B\nslack A\nline 1 A B 1 10\n"
                 "bid b1 E A 4 10\nbid b1 E A -4 9\n",
                 "b1");
}

TEST_CASE("results parse rejects unknown sections and bids") {
    const std::string bad = "coalloc-results,v1\nsection,mystery\nkey,value\na,1\n";
    REQUIRE_THROWS_AS(parse_results(bad, "bad"), InputError);

    const Instance inst = testutil::load_fixture();
    const auto dec = clear_decoupled(inst.book);
    ResultsDoc doc = make_results_doc(inst.book, inst.topology, dec,
                                      decoupled_price_intervals(inst.book, dec));
    doc.acceptance[0].first = "ghost";
    REQUIRE_THROWS_AS(doc.acceptance_for(inst.book), InputError);
}
