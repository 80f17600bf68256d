#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "beliefmarket/event_space.hpp"

using namespace beliefmarket;

namespace {

SampleSpacePtr four_atoms() {
    // AB, AB~, A~B, A~B~
    return SampleSpace::make({"AB", "AnB", "nAB", "nAnB"});
}

// Brute-force feasibility oracle: enumerate every support pattern of
// {q >= eps, sum q = 1, q(Z) = p_Z}, solving the pinned system by dense
// least squares. Entirely independent of the simplex path.
bool brute_force_consistent(const SecuritySet& sec) {
    const auto n = static_cast<Eigen::Index>(sec.atom_count());
    const auto rows = static_cast<Eigen::Index>(sec.size() + 1);
    Eigen::MatrixXd m(rows, n);
    Eigen::VectorXd b(rows);
    for (Eigen::Index w = 0; w < n; ++w) {
        m(0, w) = 1.0;
        for (Eigen::Index z = 1; z < rows; ++z) {
            m(z, w) = sec.events()[static_cast<std::size_t>(z - 1)].contains(
                          static_cast<std::uint32_t>(w))
                          ? 1.0
                          : 0.0;
        }
    }
    b[0] = 1.0;
    for (Eigen::Index z = 1; z < rows; ++z) {
        b[z] = sec.prices()[static_cast<std::size_t>(z - 1)];
    }
    for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
        std::vector<Eigen::Index> free;
        Eigen::VectorXd rhs = b;
        for (Eigen::Index w = 0; w < n; ++w) {
            if (bits & (std::size_t{1} << w)) {
                rhs -= kEpsMeasure * m.col(w);  // pinned at the floor
            } else {
                free.push_back(w);
            }
        }
        if (free.empty()) {
            if (rhs.lpNorm<Eigen::Infinity>() < 1e-9) return true;
            continue;
        }
        Eigen::MatrixXd mf(rows, static_cast<Eigen::Index>(free.size()));
        for (std::size_t k = 0; k < free.size(); ++k) {
            mf.col(static_cast<Eigen::Index>(k)) = m.col(free[k]);
        }
        Eigen::VectorXd qf = mf.colPivHouseholderQr().solve(rhs);
        if ((mf * qf - rhs).lpNorm<Eigen::Infinity>() > 1e-9) continue;
        if ((qf.array() >= -1e-12).all()) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("sample space validation") {
    CHECK_THROWS_AS(SampleSpace::make({"only"}), std::invalid_argument);
    CHECK_THROWS_AS(SampleSpace::make({"a", "a"}), std::invalid_argument);
    auto space = SampleSpace::make({"a", "b", "c"});
    CHECK(space->size() == 3);
    CHECK(space->index("b") == std::size_t{1});
    CHECK(!space->index("zz").has_value());
}

TEST_CASE("events are nonempty proper subsets") {
    auto space = SampleSpace::make({"a", "b", "c"});
    CHECK_THROWS_AS(Event(space, {}), std::invalid_argument);
    CHECK_THROWS_AS(Event(space, {0, 1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(Event(space, {5}), std::invalid_argument);
    Event e(space, {2, 0, 0});
    CHECK(e.atoms() == std::vector<std::uint32_t>{0, 2});
    Event comp = e.complement();
    CHECK(comp.atoms() == std::vector<std::uint32_t>{1});
}

TEST_CASE("joint belief positivity and normalization") {
    auto space = SampleSpace::make({"a", "b"});
    CHECK_THROWS_AS(JointBelief(space, {0.5, 0.49}), std::invalid_argument);
    CHECK_THROWS_AS(JointBelief(space, {1.0, 0.0}), std::invalid_argument);
    auto [clamped, warned] = JointBelief::clamped(space, {1.0, 0.0});
    CHECK(warned);
    CHECK(clamped.mass()[1] > 0.0);
    CHECK(clamped.mass()[0] + clamped.mass()[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("event probability") {
    auto space = four_atoms();
    JointBelief uniform(space, {0.25, 0.25, 0.25, 0.25});
    Event a(space, {0, 1});
    CHECK(event_probability(uniform, a) == doctest::Approx(0.5).epsilon(1e-15));

    auto space3 = SampleSpace::make({"x", "y", "z"});
    JointBelief b3(space3, {0.5, 0.3, 0.2});
    CHECK(event_probability(b3, Event(space3, {0, 2})) ==
          doctest::Approx(0.7).epsilon(1e-15));

    CHECK_THROWS_AS(event_probability(b3, a), std::invalid_argument);
}

TEST_CASE("conditional probability and independence") {
    auto space = four_atoms();
    Event a(space, {0, 1}), b(space, {0, 2});

    JointBelief indep(space, {0.25, 0.25, 0.25, 0.25});
    CHECK(conditional_probability(indep, a, b) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(are_independent(indep, a, b, 1e-9));

    JointBelief corr(space, {0.4, 0.1, 0.1, 0.4});
    CHECK(conditional_probability(corr, a, b) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(conditional_probability(corr, a, b.complement()) ==
          doctest::Approx(0.2).epsilon(1e-15));
    CHECK(!are_independent(corr, a, b, 1e-9));

    JointBelief prod(space, {0.6 * 0.3, 0.6 * 0.7, 0.4 * 0.3, 0.4 * 0.7});
    CHECK(are_independent(prod, a, b, 1e-9));
}

TEST_CASE("security payoff") {
    auto space = four_atoms();
    Event a(space, {0, 1}), b(space, {0, 2});
    SecuritySet sec({a, b}, {0.5, 0.5});

    double zero[2] = {0.0, 0.0};
    for (std::uint32_t w = 0; w < 4; ++w) CHECK(sec.payoff(zero, w) == 0.0);

    SecuritySet one({a}, {0.5});
    double unit[1] = {1.0};
    CHECK(one.payoff(unit, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(one.payoff(unit, 3) == doctest::Approx(-0.5).epsilon(1e-15));

    // Duplicate-event markets at prices 0.7 / 0.3: selling the first and
    // buying the second yields +0.4 in every atom.
    auto space2 = SampleSpace::make({"A", "nA"});
    Event ev(space2, {0});
    SecuritySet dup({ev, ev}, {0.7, 0.3});
    double bundle[2] = {-1.0, 1.0};
    CHECK(dup.payoff(bundle, 0) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(dup.payoff(bundle, 1) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("payoff linearity") {
    auto space = four_atoms();
    SecuritySet sec({Event(space, {0, 1}), Event(space, {0, 2})}, {0.3, 0.6});
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int t = 0; t < 200; ++t) {
        double x[2] = {u(rng), u(rng)};
        double y[2] = {u(rng), u(rng)};
        double alpha = u(rng), beta = u(rng);
        double mix[2] = {alpha * x[0] + beta * y[0], alpha * x[1] + beta * y[1]};
        for (std::uint32_t w = 0; w < 4; ++w) {
            CHECK(sec.payoff(mix, w) ==
                  doctest::Approx(alpha * sec.payoff(x, w) + beta * sec.payoff(y, w))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("check_consistency: single security always consistent") {
    auto space = SampleSpace::make({"A", "nA"});
    for (double p : {0.01, 0.25, 0.5, 0.9, 0.99}) {
        SecuritySet sec({Event(space, {0})}, {p});
        auto v = check_consistency(sec);
        REQUIRE(v.consistent());
        double qa = v.measure[0];
        CHECK(qa == doctest::Approx(p).epsilon(1e-6));
        CHECK(v.measure[0] + v.measure[1] == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("check_consistency: duplicate events with unequal prices") {
    auto space = SampleSpace::make({"A", "nA"});
    Event ev(space, {0});
    SecuritySet sec({ev, ev}, {0.7, 0.3});
    auto v = check_consistency(sec);
    REQUIRE(!v.consistent());
    // Certificate proportional to (-1, +1).
    REQUIRE(v.direction.size() == 2);
    double scale = v.direction[1];
    REQUIRE(scale > 0.0);
    CHECK(v.direction[0] / scale == doctest::Approx(-1.0).epsilon(1e-9));
    // Its payoff is uniformly positive.
    for (std::uint32_t w = 0; w < 2; ++w) CHECK(sec.payoff(v.direction, w) > kTolFeas);
}

TEST_CASE("check_consistency: disjoint exhaustive-priced pair") {
    auto space = SampleSpace::make({"A", "B", "neither"});
    SecuritySet sec({Event(space, {0}), Event(space, {1})}, {0.6, 0.4});
    auto v = check_consistency(sec);
    REQUIRE(!v.consistent());
    // Selling one of each never loses and gains when neither occurs.
    for (std::uint32_t w = 0; w < 3; ++w) {
        CHECK(sec.payoff(v.direction, w) >= -kTolFeas);
    }
    CHECK(sec.payoff(v.direction, 2) > kTolFeas);
}

TEST_CASE("check_consistency agrees with a brute-force oracle") {
    std::mt19937_64 rng(2027);
    std::uniform_real_distribution<double> uprice(0.05, 0.95);
    std::uniform_int_distribution<std::size_t> usize(3, 8);
    std::uniform_int_distribution<int> ucount(1, 4);
    int consistent_seen = 0, inconsistent_seen = 0;
    for (int t = 0; t < 200; ++t) {
        std::size_t n = usize(rng);
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) labels.push_back("w" + std::to_string(i));
        auto space = SampleSpace::make(labels);
        int m = ucount(rng);
        std::vector<Event> events;
        std::vector<double> prices;
        for (int z = 0; z < m; ++z) {
            std::vector<std::uint32_t> atoms;
            for (std::uint32_t w = 0; w < n; ++w) {
                if (uprice(rng) < 0.5) atoms.push_back(w);
            }
            if (atoms.empty()) atoms.push_back(0);
            if (atoms.size() == n) atoms.pop_back();
            events.emplace_back(space, atoms);
            prices.push_back(uprice(rng));
        }
        SecuritySet sec(events, prices);
        auto v = check_consistency(sec);
        bool oracle = brute_force_consistent(sec);
        CHECK(v.consistent() == oracle);
        if (v.consistent()) {
            ++consistent_seen;
            double total = 0.0;
            for (double q : v.measure) {
                CHECK(q >= kEpsMeasure - 1e-12);
                total += q;
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
            for (int z = 0; z < m; ++z) {
                double pz = 0.0;
                for (auto w : events[z].atoms()) pz += v.measure[w];
                CHECK(pz == doctest::Approx(prices[z]).epsilon(1e-7));
            }
        } else {
            ++inconsistent_seen;
            double best = -1e300;
            for (std::uint32_t w = 0; w < n; ++w) {
                double pay = sec.payoff(v.direction, w);
                CHECK(pay >= -kTolFeas);
                best = std::max(best, pay);
            }
            CHECK(best > kTolFeas);
        }
    }
    // The draw mix must exercise both branches.
    CHECK(consistent_seen > 10);
    CHECK(inconsistent_seen > 10);
}

TEST_CASE("check_unit_combinations") {
    auto space = SampleSpace::make({"A", "nA"});
    Event ev(space, {0});

    SecuritySet single({ev}, {0.5});
    CHECK(check_unit_combinations(single).consistent());

    // Equal-priced duplicates: the (+1,-1) combination pays exactly zero
    // everywhere, which the strict reading flags.
    SecuritySet dup_eq({ev, ev}, {0.5, 0.5});
    auto weak = check_unit_combinations(dup_eq);
    REQUIRE(!weak.consistent());
    // check_consistency disagrees here: a positive measure still exists.
    CHECK(check_consistency(dup_eq).consistent());

    SecuritySet dup({ev, ev}, {0.7, 0.3});
    auto v = check_unit_combinations(dup);
    REQUIRE(!v.consistent());
    CHECK(v.direction == std::vector<double>{-1.0, 1.0});

    // Cap: too many securities for 3^m enumeration.
    std::vector<Event> many(kMaxUnitComboSecurities + 1, ev);
    std::vector<double> ps(kMaxUnitComboSecurities + 1, 0.5);
    CHECK_THROWS_AS(check_unit_combinations(SecuritySet(many, ps)),
                    std::invalid_argument);
}

TEST_CASE("security set validation") {
    auto space = SampleSpace::make({"A", "nA"});
    Event ev(space, {0});
    CHECK_THROWS_AS(SecuritySet({ev}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(SecuritySet({ev}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(SecuritySet({ev}, {0.3, 0.4}), std::invalid_argument);
    auto other = SampleSpace::make({"x", "y"});
    CHECK_THROWS_AS(SecuritySet({ev, Event(other, {0})}, {0.5, 0.5}),
                    std::invalid_argument);
}
