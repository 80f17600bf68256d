#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace beliefmarket {

// Scenario text failed to parse or violated a model invariant.
class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

// Prices admit arbitrage; carries the offending portfolio direction.
class ArbitrageError : public std::runtime_error {
public:
    ArbitrageError(const std::string& what, std::vector<double> direction)
        : std::runtime_error(what), direction_(std::move(direction)) {}

    const std::vector<double>& direction() const { return direction_; }

private:
    std::vector<double> direction_;
};

// A numeric solver hit its iteration cap without meeting its tolerance.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, int iterations, double residual)
        : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

    int iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    int iterations_;
    double residual_;
};

}  // namespace beliefmarket
