#include <chrono>
#include <cstdio>

#include "arbsr/gradsuite.hpp"
#include "doctest.h"

using namespace arbsr;

TEST_CASE("every backward pass survives finite differences") {
    const auto t0 = std::chrono::steady_clock::now();
    auto results = run_gradient_suite();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    REQUIRE(results.size() >= 20);
    bool full_net_seen = false;
    for (const auto& r : results) {
        INFO(r.name << ": max rel " << double(r.report.max_rel) << " at "
                    << r.report.worst.param << "[" << r.report.worst.index << "]");
        CHECK(r.pass());
        if (r.name == "full_network") {
            full_net_seen = true;
            CHECK(r.tol == real(1e-3));
        } else {
            CHECK(r.tol <= real(1e-4));
        }
    }
    CHECK(full_net_seen);
    CHECK(secs < 120.0);  // the documented budget for the whole sweep
}

TEST_CASE("the checker notices a corrupted backward pass") {
    GradReport rep = corrupted_backward_demo();
    // the demo scales one gradient path by 1.01, so the checker should
    // report roughly 1e-2 -- far above threshold, far below garbage
    CHECK(rep.max_rel > real(1e-3));
    CHECK(rep.max_rel < real(0.2));
}

TEST_CASE("suite re-randomization keeps passing") {
    // different probe data, same invariants; guards against a suite that
    // only passes on its pinned inputs
    for (unsigned long long mix : {7ull, 1234567ull}) {
        auto results = run_gradient_suite(mix);
        for (const auto& r : results) {
            INFO("seed mix " << mix << ", case " << r.name << ": max rel "
                             << double(r.report.max_rel));
            CHECK(r.pass());
        }
    }
}
