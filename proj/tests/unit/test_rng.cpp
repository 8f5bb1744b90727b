#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "blockforge/rng.hpp"

using namespace blockforge;

TEST_CASE("rng streams are reproducible and counter-addressable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng c(42);
    c.set_counter(50);
    Rng d(42);
    for (int i = 0; i < 50; ++i) d.next_u64();
    REQUIRE(c.next_u64() == d.next_u64());
}

TEST_CASE("split streams do not depend on parent draw position") {
    Rng parent(7);
    Rng child_before = parent.split(3);
    parent.next_u64();
    parent.next_u64();
    Rng child_after = parent.split(3);
    REQUIRE(child_before.next_u64() == child_after.next_u64());

    REQUIRE(parent.split(1).next_u64() != parent.split(2).next_u64());
    REQUIRE(parent.split("scenegen").next_u64() != parent.split("eval").next_u64());
}

TEST_CASE("uniform draws stay in range") {
    Rng r(123);
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        int k = r.uniform_int(1, 8);
        REQUIRE(k >= 1);
        REQUIRE(k <= 8);
    }
}

TEST_CASE("uniform_int covers its range") {
    Rng r(5);
    std::set<int> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(r.uniform_int(0, 9));
    REQUIRE(seen.size() == 10);
}
