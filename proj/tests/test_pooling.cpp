#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "beliefmarket/pooling.hpp"

using namespace beliefmarket;

namespace {

WeightVector uniform2() { return WeightVector({0.5, 0.5}); }

}  // namespace

TEST_CASE("weight vector validation") {
    CHECK_THROWS_AS(WeightVector({0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(WeightVector({1.5, -0.5}), std::invalid_argument);
    CHECK_THROWS_AS(WeightVector({}), std::invalid_argument);
    WeightVector w({0.25, 0.75});
    CHECK(w.size() == 2);
}

TEST_CASE("risk weights") {
    auto equal = risk_weights({2.0, 2.0, 2.0});
    for (double a : equal.values()) CHECK(a == doctest::Approx(1.0 / 3).epsilon(1e-15));

    auto w = risk_weights({1.0, 2.0});
    CHECK(w.values()[0] == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(w.values()[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));

    // Scaling every coefficient leaves the weights unchanged.
    auto scaled = risk_weights({3.0, 6.0});
    CHECK(scaled.values()[0] == doctest::Approx(w.values()[0]).epsilon(1e-15));
    CHECK(scaled.values()[1] == doctest::Approx(w.values()[1]).epsilon(1e-15));
}

TEST_CASE("normalized logarithmic pool") {
    for (double k : {0.1, 0.37, 0.5, 0.92}) {
        CHECK(logop_normalized({k, k, k}, WeightVector({0.2, 0.3, 0.5})) ==
              doctest::Approx(k).epsilon(1e-14));
    }
    CHECK(logop_normalized({0.9, 0.4}, uniform2()) ==
          doctest::Approx(0.7101020514433644).epsilon(1e-10));
    // Pushing all weight onto the first expert recovers its probability.
    CHECK(logop_normalized({0.9, 0.4}, WeightVector({1.0 - 1e-9, 1e-9})) ==
          doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("unnormalized logarithmic pool") {
    for (double k : {0.2, 0.5, 0.8}) {
        CHECK(logop_unnormalized({k, k}, uniform2()) == doctest::Approx(k).epsilon(1e-14));
    }
    // Geometric mean of 0.9 and 0.4 under uniform weights.
    CHECK(logop_unnormalized({0.9, 0.4}, uniform2()) ==
          doctest::Approx(0.6).epsilon(1e-12));
    double comp = logop_unnormalized({0.1, 0.6}, uniform2());
    CHECK(comp == doctest::Approx(std::sqrt(0.06)).epsilon(1e-12));
    // Event plus complement sums below one when experts disagree.
    CHECK(0.6 + comp == doctest::Approx(0.6 + std::sqrt(0.06)).epsilon(1e-12));
    CHECK(0.6 + comp < 1.0);
}

TEST_CASE("disagreement measure") {
    CHECK(std::abs(disagreement({0.7, 0.7, 0.7}, WeightVector({0.1, 0.4, 0.5}))) <=
          1e-14);
    CHECK(disagreement({0.9, 0.4}, uniform2()) ==
          doctest::Approx(1.0 - 0.6 - std::sqrt(0.06)).epsilon(1e-12));
    CHECK(disagreement({0.9, 0.4}, uniform2()) ==
          doctest::Approx(0.1550510257216822).epsilon(1e-12));

    // Monotone in the spread of the symmetric pair (k, 1-k).
    double prev = -1.0;
    for (double k = 0.5; k <= 0.95; k += 0.05) {
        double d = disagreement({k, 1.0 - k}, uniform2());
        CHECK(d >= prev);
        if (k > 0.5) CHECK(d > prev);
        prev = d;
    }
}

TEST_CASE("normalization identity and nonnegativity on random draws") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> up(0.05, 0.95);
    std::uniform_real_distribution<double> uw(0.1, 2.0);
    for (int t = 0; t < 500; ++t) {
        std::size_t n = 2 + (t % 5);
        std::vector<double> probs, comp, raw;
        for (std::size_t i = 0; i < n; ++i) {
            probs.push_back(up(rng));
            comp.push_back(1.0 - probs.back());
            raw.push_back(uw(rng));
        }
        double sum = 0.0;
        for (double r : raw) sum += r;
        for (double& r : raw) r /= sum;
        WeightVector w(raw);
        double un = logop_unnormalized(probs, w);
        double un_c = logop_unnormalized(comp, w);
        CHECK(logop_normalized(probs, w) ==
              doctest::Approx(un / (un + un_c)).epsilon(1e-12));
        CHECK(disagreement(probs, w) == doctest::Approx(1.0 - un - un_c).epsilon(1e-12));
        CHECK(disagreement(probs, w) >= -1e-12);
    }
}

TEST_CASE("linear pool") {
    CHECK(linear_pool({0.9, 0.4}, uniform2()) == doctest::Approx(0.65).epsilon(1e-14));
    CHECK(linear_pool({0.2, 0.2}, WeightVector({0.3, 0.7})) ==
          doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("boundary probabilities are rejected") {
    CHECK_THROWS_AS(logop_normalized({0.0, 0.5}, uniform2()), std::range_error);
    CHECK_THROWS_AS(logop_unnormalized({0.5, 1.0}, uniform2()), std::range_error);
    CHECK_THROWS_AS(disagreement({1.0, 0.5}, uniform2()), std::range_error);
}
