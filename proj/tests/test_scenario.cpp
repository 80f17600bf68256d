#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "beliefmarket/errors.hpp"
#include "beliefmarket/scenario.hpp"

using namespace beliefmarket;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(FIXTURE_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const char* kMinimal = R"({
  "task": "demand",
  "sample_space": ["A", "nA"],
  "agents": [{"id": "one", "risk_aversion": 1.0, "belief": [0.8, 0.2]}],
  "securities": [{"event": ["A"], "price": 0.5}]
})";

}  // namespace

TEST_CASE("minimal scenario parses and solves") {
    auto s = parse_scenario(kMinimal);
    CHECK(s.task == "demand");
    CHECK(s.space->size() == 2);
    CHECK(s.agents.size() == 1);
    CHECK(s.has_prices);
    auto report = run(s);
    double x = report.machine["results"]["demands"][0]["bundle"][0].get<double>();
    CHECK(x == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("parse diagnostics name the offending field") {
    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            parse_scenario(text);
            FAIL_CHECK("expected ScenarioError for " << needle);
        } catch (const ScenarioError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    expect_error("{not json", "malformed");
    expect_error(R"({"task": "fly"})", "task");
    expect_error(R"({"task": "demand"})", "sample_space");
    expect_error(R"({"task": "demand", "sample_space": ["A"],
                    "securities": [{"event": ["A"], "price": 0.5}]})",
                 "sample_space");

    // Belief summing to 0.98: normalization diagnostic.
    expect_error(R"({"task": "demand", "sample_space": ["A", "nA"],
                    "agents": [{"risk_aversion": 1.0, "belief": [0.78, 0.2]}],
                    "securities": [{"event": ["A"], "price": 0.5}]})",
                 "sum to 1");

    // Event spanning all of the space: proper-subset diagnostic.
    expect_error(R"({"task": "demand", "sample_space": ["A", "nA"],
                    "agents": [{"risk_aversion": 1.0, "belief": [0.5, 0.5]}],
                    "securities": [{"event": ["A", "nA"], "price": 0.5}]})",
                 "proper");

    expect_error(R"({"task": "demand", "sample_space": ["A", "nA"],
                    "agents": [{"risk_aversion": 1.0, "belief": [0.5, 0.5]}],
                    "securities": [{"event": ["B"], "price": 0.5}]})",
                 "unknown atom");

    expect_error(R"({"task": "demand", "sample_space": ["A", "nA"],
                    "agents": [{"risk_aversion": 1.0, "belief": [0.5, 0.5]}],
                    "securities": [{"event": ["A"], "price": 1.5}]})",
                 "price");

    expect_error(R"({"task": "demand", "sample_space": ["A", "nA"],
                    "agents": [{"risk_aversion": -2.0, "belief": [0.5, 0.5]}],
                    "securities": [{"event": ["A"], "price": 0.5}]})",
                 "risk_aversion");

    // Mixed priced/unpriced securities.
    expect_error(R"({"task": "demand", "sample_space": ["A", "B", "C"],
                    "agents": [{"risk_aversion": 1.0, "belief": [0.4, 0.3, 0.3]}],
                    "securities": [{"event": ["A"], "price": 0.5},
                                   {"event": ["B"]}]})",
                 "every security or none");
}

TEST_CASE("zero-mass atoms clamp with a warning") {
    auto s = parse_scenario(R"({
        "task": "check",
        "sample_space": ["A", "nA"],
        "agents": [{"risk_aversion": 1.0, "belief": [1.0, 0.0]}],
        "securities": [{"event": ["A"], "price": 0.5}]})");
    REQUIRE(s.warnings.size() == 1);
    CHECK(s.warnings[0].find("clamped") != std::string::npos);
    CHECK(s.agents[0].belief.mass()[1] > 0.0);
}

TEST_CASE("belief accepted as a label-keyed object") {
    auto s = parse_scenario(R"({
        "task": "demand",
        "sample_space": ["rain", "dry"],
        "agents": [{"risk_aversion": 1.0, "belief": {"dry": 0.1, "rain": 0.9}}],
        "securities": [{"event": ["rain"], "price": 0.5}]})");
    CHECK(s.agents[0].belief.mass()[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("figure fixtures parse with their advertised tasks") {
    CHECK(parse_scenario(fixture("figure1.json")).task == "surface");
    CHECK(parse_scenario(fixture("figure2.json")).task == "surface");
    CHECK(parse_scenario(fixture("figure3.json")).task == "check");
    CHECK(parse_scenario(fixture("single_security_pair.json")).task == "equilibrium");
}

TEST_CASE("demand task on the fair uniform market") {
    auto report = run(parse_scenario(fixture("figure1_demand.json")));
    const auto& bundle = report.machine["results"]["demands"][0]["bundle"];
    CHECK(std::abs(bundle[0].get<double>()) <= 1e-9);
    CHECK(std::abs(bundle[1].get<double>()) <= 1e-9);
}

TEST_CASE("equilibrium task reports closed form and deviation") {
    auto report = run(parse_scenario(fixture("single_security_pair.json")));
    const auto& results = report.machine["results"];
    CHECK(results["prices"][0].get<double>() ==
          doctest::Approx(0.7101020514433644).epsilon(1e-6));
    CHECK(results["closed_form"]["type"] == "single");
    CHECK(results["closed_form"]["deviation"].get<double>() < 1e-6);
    CHECK(results["excess_norm"].get<double>() <= 1e-7);
}

TEST_CASE("check task surfaces both criteria") {
    auto report = run(parse_scenario(fixture("figure3.json")));
    const auto& results = report.machine["results"];
    CHECK(results["consistency"]["status"] == "inconsistent");
    auto dir = results["consistency"]["direction"];
    double scale = dir[1].get<double>();
    REQUIRE(scale > 0.0);
    CHECK(dir[0].get<double>() / scale == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(results["unit_combinations"]["status"] == "inconsistent");
    CHECK(results["criteria_diverge"] == false);
}

TEST_CASE("surface task: ridge detection on equivalent markets") {
    auto report = run(parse_scenario(fixture("figure2.json")));
    const auto& results = report.machine["results"];
    const auto& am = results["argmax"];
    CHECK(std::abs(am["xA"].get<double>()) <= 1e-12);
    CHECK(std::abs(am["xB"].get<double>()) <= 1e-12);
    REQUIRE(!results["ridge"].is_null());
    // Fitted line is xA + xB = 0.
    double nx = results["ridge"]["normal"][0].get<double>();
    double ny = results["ridge"]["normal"][1].get<double>();
    CHECK(nx == doctest::Approx(ny).epsilon(1e-6));
    CHECK(std::abs(results["ridge"]["offset"].get<double>()) <= 1e-3);
    CHECK(results["ridge"]["points"].get<int>() > 10);
}

TEST_CASE("surface task: unbounded direction on arbitrageable prices") {
    auto report = run(parse_scenario(fixture("figure3_surface.json")));
    const auto& results = report.machine["results"];
    REQUIRE(!results["unbounded_direction"].is_null());
    CHECK(results["unbounded_direction"][0].get<double>() == -1.0);
    CHECK(results["unbounded_direction"][1].get<double>() == 1.0);
    CHECK(results["consistency"]["status"] == "inconsistent");
    CHECK(results["optimum"].is_null());
}

TEST_CASE("surface CSV") {
    auto report = run(parse_scenario(R"({
        "task": "surface",
        "sample_space": ["A", "nA"],
        "agents": [{"risk_aversion": 1.0, "belief": [0.5, 0.5]}],
        "securities": [{"event": ["A"], "price": 0.4}, {"event": ["nA"], "price": 0.4}],
        "params": {"bounds": [-1, 1, -1, 1], "resolution": 5}})"));
    auto csv = surface_csv(report);
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "xA,xB,utility");
    int rows = 0;
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 25);

    // Reports without a grid refuse CSV rendering.
    auto other = run(parse_scenario(kMinimal));
    CHECK_THROWS_AS(surface_csv(other), std::invalid_argument);
}

TEST_CASE("pool task values") {
    auto report = run(parse_scenario(fixture("pool_west.json")));
    const auto& ev = report.machine["results"]["events"][0];
    CHECK(ev["logop_normalized"].get<double>() ==
          doctest::Approx(0.7101020514433644).epsilon(1e-10));
    CHECK(ev["logop_unnormalized"].get<double>() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(ev["disagreement"].get<double>() ==
          doctest::Approx(0.1550510257216822).epsilon(1e-10));
    CHECK(ev["linear_pool"].get<double>() == doctest::Approx(0.65).epsilon(1e-12));
}

TEST_CASE("machine reports are deterministic") {
    for (const char* name :
         {"figure1.json", "figure2.json", "figure3.json", "single_security_pair.json",
          "disjoint_pair.json", "pool_west.json"}) {
        auto text = fixture(name);
        auto first = run(parse_scenario(text));
        auto second = run(parse_scenario(text));
        CHECK(first.machine.dump() == second.machine.dump());
        CHECK(first.human == second.human);
    }
}

TEST_CASE("demand task propagates arbitrage") {
    CHECK_THROWS_AS(run(parse_scenario(fixture("figure3_demand.json"))),
                    ArbitrageError);
}
