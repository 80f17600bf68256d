#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "beliefmarket/event_space.hpp"

namespace beliefmarket {

// Risk-averse trader: u(y) = -exp(-c y) over dollars, private joint belief.
struct CaraAgent {
    CaraAgent(JointBelief belief, double risk_aversion);

    JointBelief belief;
    double risk_aversion;
};

struct SolverConfig {
    double tol_grad = 1e-10;
    double tol_fixpoint = 1e-12;
    int max_iter_fixpoint = 10000;
    int max_iter_newton = 200;
    double damping = 0.5;
    // Set when the caller has already verified price consistency (the
    // equilibrium solver checks once per price vector, not once per agent).
    bool assume_consistent = false;
};

struct SolverTrace {
    int iterations = 0;
    std::string method;
    bool converged = false;
    bool ridge = false;     // optimum lies on a flat line (equivalent securities)
    bool fallback = false;  // fixed-point iteration handed off to Newton
};

struct DemandSolution {
    std::vector<double> bundle;
    double utility = -1.0;
    double certainty_equivalent = 0.0;  // -(1/c) ln(-utility)
    double gradient_norm = 0.0;
    SolverTrace trace;
};

// Expected utility of a bundle, evaluated through log-sum-exp. Throws
// std::range_error when any |c * payoff| exceeds the finite-accuracy domain.
double expected_utility(const CaraAgent& agent, const SecuritySet& securities,
                        std::span<const double> bundle);

// Analytic gradient: component Z is
//   sum_w Pr(w) c (1_{w in Z} - p_Z) exp(-c payoff(x, w)).
std::vector<double> utility_gradient(const CaraAgent& agent,
                                     const SecuritySet& securities,
                                     std::span<const double> bundle);

// Closed-form single-security demand (1/c) ln(((1-p) pr) / (p (1-pr))).
double demand_single(double pr_a, double c, double p);

// Two-security optimum by alternating the implicit best-response equations,
// damped on oscillation, Newton polish as a fallback.
DemandSolution demand_pair_fixed_point(const CaraAgent& agent,
                                       const SecuritySet& securities,
                                       const SolverConfig& config = {});

// Closed form for two mutually exclusive, non-exhaustive securities.
// Requires pr_a + pr_b < 1 and p_a + p_b < 1 (otherwise arbitrage).
std::pair<double, double> demand_disjoint_pair(double pr_a, double pr_b, double c,
                                               double p_a, double p_b);

// General concave maximization: damped Newton with backtracking line search
// on the log of -U, pseudo-inverse steps on singular Hessians, minimum-norm
// tie-break on flat ridges.
DemandSolution demand_general(const CaraAgent& agent, const SecuritySet& securities,
                              const SolverConfig& config = {});

}  // namespace beliefmarket
