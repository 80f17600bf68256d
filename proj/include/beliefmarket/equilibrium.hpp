#pragma once

#include <utility>
#include <vector>

#include "beliefmarket/agent.hpp"
#include "beliefmarket/event_space.hpp"

namespace beliefmarket {

// N agents sharing a sample space, plus the events with open markets.
class Economy {
public:
    Economy(std::vector<CaraAgent> agents, std::vector<Event> events);

    const SampleSpacePtr& space() const { return space_; }
    const std::vector<CaraAgent>& agents() const { return agents_; }
    const std::vector<Event>& events() const { return events_; }
    std::size_t agent_count() const { return agents_.size(); }
    std::size_t security_count() const { return events_.size(); }

private:
    SampleSpacePtr space_;
    std::vector<CaraAgent> agents_;
    std::vector<Event> events_;
};

struct EquilibriumConfig {
    SolverConfig agent;
    double tol_clear = 1e-7;      // max-norm of excess demand
    int max_iter = 500;
    double fd_step = 1e-6;        // relative Jacobian finite-difference step
    double newton_switch = 1e-2;  // residual below which quasi-Newton engages
    double price_floor = 1e-6;    // clamp prices to [floor, 1 - floor]
    int multi_start = 5;          // perturbed restarts probing for multiplicity
    unsigned seed = 20240901;
};

enum class EquilibriumMethod { ClosedForm, Numeric };

struct EquilibriumTrace {
    int iterations = 0;
    int excess_evaluations = 0;
    bool multiplicity_detected = false;
    std::vector<std::vector<double>> alternative_prices;
};

struct EquilibriumResult {
    std::vector<double> prices;
    std::vector<std::vector<double>> demands;  // N x m, agent-major
    double excess_norm = 0.0;
    EquilibriumMethod method = EquilibriumMethod::Numeric;
    EquilibriumTrace trace;
};

// Component-wise sum of all agents' optimal demands at the given prices.
// Agent solver failures are rethrown with the agent index attached.
std::vector<double> excess_demand(const Economy& economy,
                                  const std::vector<double>& prices,
                                  const SolverConfig& config = {});

// Closed-form single-security equilibrium price: the normalized LogOP with
// risk-derived weights.
double equilibrium_single(const std::vector<double>& beliefs,
                          const std::vector<double>& cs);

// Closed-form prices for two disjoint, non-exhaustive events: the three-term
// normalized LogOP over {A, B, neither}.
std::pair<double, double> equilibrium_disjoint_pair(
    const std::vector<std::pair<double, double>>& beliefs,
    const std::vector<double>& cs);

// Damped price adjustment with a finite-difference quasi-Newton phase near
// the root. Starts from the equal-weight belief mixture's event probabilities.
EquilibriumResult solve_equilibrium_numeric(const Economy& economy,
                                            const EquilibriumConfig& config = {});

// Representative agent whose single-event belief is the equilibrium price
// and whose inverse risk aversion is the sum of individual inverse ones.
struct SuperAgent {
    double belief_scalar;
    double risk_aversion;
};

SuperAgent make_super_agent(const std::vector<double>& beliefs,
                            const std::vector<double>& cs);

}  // namespace beliefmarket
