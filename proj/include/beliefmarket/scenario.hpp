#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beliefmarket/agent.hpp"
#include "beliefmarket/event_space.hpp"

namespace beliefmarket {

struct ScenarioAgent {
    std::string id;
    double risk_aversion;
    JointBelief belief;
};

// Parsed and validated scenario file. `prices` is empty when the scenario
// leaves prices to the equilibrium solver.
struct Scenario {
    SampleSpacePtr space;
    std::vector<ScenarioAgent> agents;
    std::vector<Event> events;
    std::vector<double> prices;
    bool has_prices = false;
    std::string task;
    nlohmann::json params;
    std::vector<std::string> warnings;
};

struct Report {
    nlohmann::json machine;
    std::string human;
};

// Parses the documented JSON schema; throws ScenarioError with a
// field-addressed diagnostic on any violation.
Scenario parse_scenario(const std::string& text);

// Dispatches the scenario's task. Solver and arbitrage errors propagate so
// the CLI can map them to exit codes.
Report run(const Scenario& scenario);

// CSV rendering (header xA,xB,utility) of a surface report's grid.
std::string surface_csv(const Report& report);

}  // namespace beliefmarket
