#include <doctest.h>

#include "qslam/hungarian.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>

using namespace qslam;

namespace {

// Exhaustive minimum over all injective row -> column maps.
double brute_force_cost(const CostMatrix& c) {
    std::vector<int> cols(static_cast<size_t>(c.cols));
    std::iota(cols.begin(), cols.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int r = 0; r < c.rows; ++r) {
            total += c.at(r, cols[static_cast<size_t>(r)]);
        }
        best = std::min(best, total);
    } while (std::next_permutation(cols.begin(), cols.end()));
    return best;
}

double assignment_cost(const CostMatrix& c, const std::vector<int>& a) {
    double total = 0.0;
    for (int r = 0; r < c.rows; ++r) {
        total += c.at(r, a[static_cast<size_t>(r)]);
    }
    return total;
}

}  // namespace

TEST_CASE("hungarian_solve hand values") {
    CostMatrix c(2, 2);
    c.at(0, 0) = 1;
    c.at(0, 1) = 2;
    c.at(1, 0) = 3;
    c.at(1, 1) = 1;
    const auto a = hungarian_solve(c);
    CHECK(a == std::vector<int>{0, 1});
    CHECK(assignment_cost(c, a) == doctest::Approx(2.0));

    CostMatrix diag(3, 3, 5.0);
    diag.at(0, 0) = diag.at(1, 1) = diag.at(2, 2) = 0.0;
    CHECK(hungarian_solve(diag) == std::vector<int>{0, 1, 2});
}

TEST_CASE("hungarian_solve equals brute force on random matrices up to 6x6") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> cost(0.0, 10.0);
    std::uniform_int_distribution<int> dim(1, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        const int rows = dim(rng);
        const int cols = std::max(rows, dim(rng));
        CostMatrix c(rows, cols);
        for (auto& x : c.data) {
            x = cost(rng);
        }
        const auto a = hungarian_solve(c);
        // One-to-one.
        std::set<int> used(a.begin(), a.end());
        CHECK(used.size() == a.size());
        CHECK(assignment_cost(c, a) == doctest::Approx(brute_force_cost(c)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian_solve rectangular assigns every row") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> cost(0.0, 1.0);
    CostMatrix c(3, 5);
    for (auto& x : c.data) {
        x = cost(rng);
    }
    const auto a = hungarian_solve(c);
    REQUIRE(a.size() == 3);
    std::set<int> used;
    for (int col : a) {
        CHECK(col >= 0);
        CHECK(col < 5);
        used.insert(col);
    }
    CHECK(used.size() == 3);
}
