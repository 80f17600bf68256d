#include "beliefmarket/equilibrium.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "beliefmarket/errors.hpp"
#include "beliefmarket/pooling.hpp"

namespace beliefmarket {

Economy::Economy(std::vector<CaraAgent> agents, std::vector<Event> events)
    : agents_(std::move(agents)), events_(std::move(events)) {
    if (agents_.empty()) throw std::invalid_argument("economy needs at least one agent");
    if (events_.empty()) throw std::invalid_argument("economy needs at least one event");
    if (events_.size() > kMaxSecurities) {
        throw std::invalid_argument("economy exceeds the security cap");
    }
    space_ = agents_.front().belief.space();
    for (const auto& a : agents_) {
        if (!same_space(space_, a.belief.space())) {
            throw std::invalid_argument("all agents must share one sample space");
        }
    }
    for (const auto& e : events_) {
        if (!same_space(space_, e.space())) {
            throw std::invalid_argument("all events must live on the economy's space");
        }
    }
}

namespace {

std::vector<double> evaluate_excess(const Economy& economy,
                                    const std::vector<double>& prices,
                                    const SolverConfig& agent_config,
                                    std::vector<std::vector<double>>* demands_out) {
    SecuritySet securities(economy.events(), prices);
    auto verdict = check_consistency(securities);
    if (!verdict.consistent()) {
        throw ArbitrageError("prices admit arbitrage", verdict.direction);
    }
    SolverConfig cfg = agent_config;
    cfg.assume_consistent = true;

    std::vector<double> total(economy.security_count(), 0.0);
    if (demands_out) demands_out->clear();
    for (std::size_t i = 0; i < economy.agent_count(); ++i) {
        DemandSolution sol;
        try {
            sol = demand_general(economy.agents()[i], securities, cfg);
        } catch (const SolverFailure& e) {
            throw SolverFailure("agent " + std::to_string(i) +
                                    " demand failed: " + e.what(),
                                e.iterations(), e.residual());
        }
        for (std::size_t z = 0; z < total.size(); ++z) total[z] += sol.bundle[z];
        if (demands_out) demands_out->push_back(std::move(sol.bundle));
    }
    return total;
}

double linf(const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n = std::max(n, std::abs(x));
    return n;
}

}  // namespace

std::vector<double> excess_demand(const Economy& economy,
                                  const std::vector<double>& prices,
                                  const SolverConfig& config) {
    return evaluate_excess(economy, prices, config, nullptr);
}

double equilibrium_single(const std::vector<double>& beliefs,
                          const std::vector<double>& cs) {
    if (beliefs.size() != cs.size()) {
        throw std::invalid_argument("belief and risk coefficient counts must match");
    }
    return logop_normalized(beliefs, risk_weights(cs));
}

std::pair<double, double> equilibrium_disjoint_pair(
    const std::vector<std::pair<double, double>>& beliefs,
    const std::vector<double>& cs) {
    if (beliefs.size() != cs.size()) {
        throw std::invalid_argument("belief and risk coefficient counts must match");
    }
    auto weights = risk_weights(cs);
    double ta = 0.0, tb = 0.0, tc = 0.0;
    for (std::size_t i = 0; i < beliefs.size(); ++i) {
        auto [pa, pb] = beliefs[i];
        if (!(pa > 0.0 && pb > 0.0 && pa + pb < 1.0)) {
            throw std::range_error(
                "disjoint-pair beliefs must be positive with positive residual");
        }
        double a = weights.values()[i];
        ta += a * std::log(pa);
        tb += a * std::log(pb);
        tc += a * std::log(1.0 - pa - pb);
    }
    double tmax = std::max({ta, tb, tc});
    double ea = std::exp(ta - tmax), eb = std::exp(tb - tmax), ec = std::exp(tc - tmax);
    double denom = ea + eb + ec;
    return {ea / denom, eb / denom};
}

SuperAgent make_super_agent(const std::vector<double>& beliefs,
                            const std::vector<double>& cs) {
    double inv = 0.0;
    for (double c : cs) {
        if (!(c > 0.0)) throw std::invalid_argument("risk coefficients must be positive");
        inv += 1.0 / c;
    }
    return {equilibrium_single(beliefs, cs), 1.0 / inv};
}

namespace {

struct SolveOutcome {
    bool ok = false;
    std::vector<double> prices;
    std::vector<double> excess;
    double residual = 1e300;
    int iterations = 0;
    int evaluations = 0;
};

class EquilibriumSolver {
public:
    EquilibriumSolver(const Economy& economy, const EquilibriumConfig& config)
        : economy_(economy), config_(config), m_(economy.security_count()) {}

    int evaluations() const { return evaluations_; }

    std::vector<double> clamp(std::vector<double> p) const {
        for (double& x : p) {
            x = std::clamp(x, config_.price_floor, 1.0 - config_.price_floor);
        }
        return p;
    }

    bool eval(const std::vector<double>& p, std::vector<double>* z) {
        ++evaluations_;
        try {
            *z = evaluate_excess(economy_, p, config_.agent, nullptr);
            return true;
        } catch (const ArbitrageError&) {
            return false;  // stepped outside the consistent region
        }
    }

    // One quasi-Newton step on the excess-demand map with a finite-difference
    // Jacobian and backtracking; returns false when no acceptable step exists.
    bool newton_step(std::vector<double>* p, std::vector<double>* z) {
        const auto mi = static_cast<Eigen::Index>(m_);
        Eigen::MatrixXd jac(mi, mi);
        for (std::size_t col = 0; col < m_; ++col) {
            double h = config_.fd_step * std::max(1.0, std::abs((*p)[col]));
            bool got = false;
            std::vector<double> zh;
            for (double sign : {1.0, -1.0}) {
                std::vector<double> ph = *p;
                ph[col] += sign * h;
                if (ph[col] <= config_.price_floor ||
                    ph[col] >= 1.0 - config_.price_floor) {
                    continue;
                }
                if (eval(ph, &zh)) {
                    for (std::size_t r = 0; r < m_; ++r) {
                        jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) =
                            (zh[r] - (*z)[r]) / (sign * h);
                    }
                    got = true;
                    break;
                }
            }
            if (!got) return false;
        }
        Eigen::VectorXd rhs(mi);
        for (std::size_t r = 0; r < m_; ++r) rhs[static_cast<Eigen::Index>(r)] = -(*z)[r];
        Eigen::VectorXd delta = jac.fullPivLu().solve(rhs);
        if (!delta.allFinite()) return false;

        double base = linf(*z);
        double t = 1.0;
        for (int ls = 0; ls < 25; ++ls) {
            std::vector<double> trial = *p;
            for (std::size_t zi = 0; zi < m_; ++zi) {
                trial[zi] += t * delta[static_cast<Eigen::Index>(zi)];
            }
            trial = clamp(std::move(trial));
            std::vector<double> ztrial;
            if (eval(trial, &ztrial) && linf(ztrial) < base) {
                *p = std::move(trial);
                *z = std::move(ztrial);
                return true;
            }
            t *= 0.5;
        }
        return false;
    }

    SolveOutcome solve(std::vector<double> p0) {
        SolveOutcome out;
        std::vector<double> p = clamp(std::move(p0));
        std::vector<double> z;
        if (!eval(p, &z)) return out;  // inconsistent start

        double eta = 0.1;
        for (int iter = 1; iter <= config_.max_iter; ++iter) {
            out.iterations = iter;
            double nz = linf(z);
            if (nz <= config_.tol_clear) {
                // Keep polishing while the residual still shrinks; downstream
                // identities (state-by-state clearing) want slack below tol.
                for (int k = 0; k < 5; ++k) {
                    double before = linf(z);
                    if (before < 1e-13 || !newton_step(&p, &z)) break;
                    if (linf(z) >= before) break;
                }
                out.ok = true;
                break;
            }

            if (nz < config_.newton_switch && newton_step(&p, &z)) continue;

            // Tatonnement: price moves with excess demand, step size adaptive.
            bool stepped = false;
            for (int shrink = 0; shrink < 30; ++shrink) {
                std::vector<double> trial = p;
                for (std::size_t zi = 0; zi < m_; ++zi) trial[zi] += eta * z[zi];
                trial = clamp(std::move(trial));
                std::vector<double> ztrial;
                if (eval(trial, &ztrial) && linf(ztrial) < nz) {
                    p = std::move(trial);
                    z = std::move(ztrial);
                    eta = std::min(eta * 1.2, 10.0);
                    stepped = true;
                    break;
                }
                eta *= 0.5;
            }
            if (!stepped) break;  // stalled
        }
        out.prices = std::move(p);
        out.excess = std::move(z);
        out.residual = linf(out.excess);
        out.evaluations = evaluations_;
        return out;
    }

private:
    const Economy& economy_;
    const EquilibriumConfig& config_;
    std::size_t m_;
    int evaluations_ = 0;
};

std::vector<double> mixture_prices(const Economy& economy) {
    std::size_t n = economy.space()->size();
    std::vector<double> mix(n, 0.0);
    for (const auto& agent : economy.agents()) {
        for (std::size_t w = 0; w < n; ++w) {
            mix[w] += agent.belief.mass()[w] / static_cast<double>(economy.agent_count());
        }
    }
    std::vector<double> p(economy.security_count());
    for (std::size_t z = 0; z < economy.security_count(); ++z) {
        double sum = 0.0;
        for (auto atom : economy.events()[z].atoms()) sum += mix[atom];
        p[z] = sum;
    }
    return p;
}

}  // namespace

EquilibriumResult solve_equilibrium_numeric(const Economy& economy,
                                            const EquilibriumConfig& config) {
    EquilibriumResult result;
    const std::size_t m = economy.security_count();

    if (economy.agent_count() == 1) {
        // A lone agent trades nothing at its own belief prices.
        const auto& belief = economy.agents().front().belief;
        result.prices.resize(m);
        for (std::size_t z = 0; z < m; ++z) {
            result.prices[z] = event_probability(belief, economy.events()[z]);
        }
        result.demands.assign(1, std::vector<double>(m, 0.0));
        result.excess_norm = 0.0;
        result.method = EquilibriumMethod::ClosedForm;
        return result;
    }

    std::vector<double> p0 = mixture_prices(economy);
    EquilibriumSolver solver(economy, config);
    SolveOutcome main = solver.solve(p0);
    if (!main.ok) {
        throw SolverFailure("equilibrium solver failed to clear the market",
                            main.iterations, main.residual);
    }

    result.prices = main.prices;
    result.excess_norm = main.residual;
    result.method = EquilibriumMethod::Numeric;
    result.trace.iterations = main.iterations;

    // Perturbed restarts: any distinct equilibrium found is reported as data.
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> jitter(-0.75, 0.75);
    for (int k = 1; k < config.multi_start; ++k) {
        std::vector<double> pk(m);
        for (std::size_t z = 0; z < m; ++z) {
            double logit = std::log(p0[z] / (1.0 - p0[z])) + jitter(rng);
            pk[z] = 1.0 / (1.0 + std::exp(-logit));
        }
        EquilibriumSolver probe(economy, config);
        SolveOutcome alt = probe.solve(pk);
        if (alt.ok) {
            double diff = 0.0;
            for (std::size_t z = 0; z < m; ++z) {
                diff = std::max(diff, std::abs(alt.prices[z] - result.prices[z]));
            }
            if (diff > 1e-4) {
                result.trace.multiplicity_detected = true;
                result.trace.alternative_prices.push_back(alt.prices);
            }
        }
    }

    std::vector<double> excess =
        evaluate_excess(economy, result.prices, config.agent, &result.demands);
    result.excess_norm = linf(excess);
    result.trace.excess_evaluations = solver.evaluations() + 1;
    return result;
}

}  // namespace beliefmarket
