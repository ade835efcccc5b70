#include <catch2/catch_amalgamated.hpp>

#include "coalloc/vertices.hpp"

using namespace coalloc;

TEST_CASE("one zone with both demands yields three vertices") {
    const auto verts = enumerate_vertices({{"B", {4.0, 4.0}}});
    REQUIRE(verts.size() == 3);
    REQUIRE(verts[0].label() == "none");
    REQUIRE(verts[1].label() == "B:+");
    REQUIRE(verts[2].label() == "B:-");
    REQUIRE(verts[1].pos("B") == 4.0);
    REQUIRE(verts[1].neg("B") == 0.0);
    REQUIRE(verts[2].neg("B") == 4.0);
    for (std::size_t i = 0; i < verts.size(); ++i)
        REQUIRE(verts[i].id == static_cast<int>(i));
}

TEST_CASE("two full zones yield nine vertices") {
    const auto verts = enumerate_vertices({{"X", {2.0, 3.0}}, {"Y", {1.0, 5.0}}});
    REQUIRE(verts.size() == 9);
    // Per-zone complementarity on every vertex.
    for (const auto& v : verts)
        for (const std::string zone : {"X", "Y"}) REQUIRE(v.pos(zone) * v.neg(zone) == 0.0);
    // Later-listed zone varies fastest.
    REQUIRE(verts[0].label() == "none");
    REQUIRE(verts[1].label() == "Y:+");
    REQUIRE(verts[2].label() == "Y:-");
    REQUIRE(verts[3].label() == "X:+");
    REQUIRE(verts[4].label() == "X:+ Y:+");
}

TEST_CASE("one-sided demand yields two vertices") {
    const auto verts = enumerate_vertices({{"B", {4.0, 0.0}}});
    REQUIRE(verts.size() == 2);
    REQUIRE(verts[0].label() == "none");
    REQUIRE(verts[1].label() == "B:+");
}

TEST_CASE("enumeration is deterministic") {
    const std::map<std::string, std::pair<double, double>> demand = {{"X", {2.0, 3.0}},
                                                                     {"Y", {1.0, 0.0}}};
    const auto a = enumerate_vertices(demand);
    const auto b = enumerate_vertices(demand);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].label() == b[i].label());
}

TEST_CASE("vertex cap and input errors") {
    REQUIRE_THROWS_AS(enumerate_vertices({{"B", {4.0, 4.0}}}, 2), CapacityError);
    REQUIRE_THROWS_AS(enumerate_vertices({{"B", {-1.0, 0.0}}}), InputError);
    REQUIRE(enumerate_vertices({}).size() == 1); // the base realization
}
