#include "beliefmarket/selfcheck.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "beliefmarket/agent.hpp"
#include "beliefmarket/equilibrium.hpp"
#include "beliefmarket/errors.hpp"
#include "beliefmarket/event_space.hpp"
#include "beliefmarket/pooling.hpp"

namespace beliefmarket {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

// Atoms 0..3 read as AB, AB~, A~B, A~B~.
SampleSpacePtr two_by_two() {
    static SampleSpacePtr space =
        SampleSpace::make({"AB", "AB~", "A~B", "A~B~"});
    return space;
}

JointBelief random_belief(Rng& rng, const SampleSpacePtr& space, double lo = 0.05) {
    std::vector<double> mass(space->size());
    double sum = 0.0;
    for (double& m : mass) {
        m = uniform(rng, lo, 1.0);
        sum += m;
    }
    for (double& m : mass) m /= sum;
    return JointBelief(space, mass);
}

JointBelief product_belief(const SampleSpacePtr& space, double pa, double pb) {
    return JointBelief(space, {pa * pb, pa * (1.0 - pb), (1.0 - pa) * pb,
                               (1.0 - pa) * (1.0 - pb)});
}

SecuritySet pair_securities(const SampleSpacePtr& space, double pa, double pb) {
    Event a(space, {0, 1});
    Event b(space, {0, 2});
    return SecuritySet({a, b}, {pa, pb});
}

// Golden-section maximizer of a concave 1-D function, independent of the
// Newton path it cross-checks.
template <typename F>
double golden_max(F f, double lo, double hi, double tol = 1e-11) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return (a + b) / 2.0;
}

// Exhaustive vertex search of {q : q >= eps, sum q = 1, q(Z) = p_Z}; decides
// feasibility independently of the simplex. Returns +1 feasible, -1
// infeasible, 0 too close to the boundary to call.
int oracle_feasible(const SecuritySet& sec) {
    const std::size_t n = sec.atom_count();
    const std::size_t rows = sec.size() + 1;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows));
    for (std::size_t w = 0; w < n; ++w) {
        m(0, static_cast<Eigen::Index>(w)) = 1.0;
        for (std::size_t z = 0; z < sec.size(); ++z) {
            m(static_cast<Eigen::Index>(z + 1), static_cast<Eigen::Index>(w)) =
                sec.events()[z].contains(static_cast<std::uint32_t>(w)) ? 1.0 : 0.0;
        }
    }
    b[0] = 1.0;
    for (std::size_t z = 0; z < sec.size(); ++z) {
        b[static_cast<Eigen::Index>(z + 1)] = sec.prices()[z];
    }

    double best_slack = -1e300;
    for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
        std::vector<std::size_t> free;
        Eigen::VectorXd rhs = b;
        for (std::size_t w = 0; w < n; ++w) {
            if (bits & (std::size_t{1} << w)) {
                rhs -= kEpsMeasure * m.col(static_cast<Eigen::Index>(w));
            } else {
                free.push_back(w);
            }
        }
        if (free.empty()) {
            if (rhs.lpNorm<Eigen::Infinity>() < 1e-9) best_slack = std::max(best_slack, 0.0);
            continue;
        }
        Eigen::MatrixXd mf(static_cast<Eigen::Index>(rows),
                           static_cast<Eigen::Index>(free.size()));
        for (std::size_t k = 0; k < free.size(); ++k) {
            mf.col(static_cast<Eigen::Index>(k)) =
                m.col(static_cast<Eigen::Index>(free[k]));
        }
        Eigen::VectorXd qf = mf.colPivHouseholderQr().solve(rhs);
        if ((mf * qf - rhs).lpNorm<Eigen::Infinity>() > 1e-9) continue;
        double slack = 1e300;
        for (Eigen::Index k = 0; k < qf.size(); ++k) {
            slack = std::min(slack, qf[k] - kEpsMeasure);
        }
        best_slack = std::max(best_slack, slack);
    }
    if (best_slack > 1e-6) return 1;
    if (best_slack < -1e-6) return -1;
    return 0;
}

struct Suite {
    std::vector<CheckResult> results;

    void record(const std::string& name, bool passed, std::string detail = "") {
        results.push_back({name, passed, std::move(detail)});
    }
};

void check_payoff_linearity(Suite& suite, Rng& rng) {
    double worst = 0.0;
    auto space = two_by_two();
    for (int t = 0; t < 200; ++t) {
        auto sec = pair_securities(space, uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
        double xs[2] = {uniform(rng, -3, 3), uniform(rng, -3, 3)};
        double ys[2] = {uniform(rng, -3, 3), uniform(rng, -3, 3)};
        double alpha = uniform(rng, -2, 2), beta = uniform(rng, -2, 2);
        for (std::uint32_t w = 0; w < 4; ++w) {
            double mix[2] = {alpha * xs[0] + beta * ys[0], alpha * xs[1] + beta * ys[1]};
            double lhs = sec.payoff(mix, w);
            double rhs = alpha * sec.payoff(xs, w) + beta * sec.payoff(ys, w);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    suite.record("payoff.linearity", worst <= 1e-12, "max dev " + fmt("%.2e", worst));
}

void check_event_probability_bounds(Suite& suite, Rng& rng) {
    bool ok = true;
    for (int t = 0; t < 500 && ok; ++t) {
        std::size_t n = 2 + static_cast<std::size_t>(uniform(rng, 0, 6));
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) labels.push_back("w" + std::to_string(i));
        auto space = SampleSpace::make(labels);
        auto belief = random_belief(rng, space, 0.01);
        std::vector<std::uint32_t> atoms;
        std::size_t count = 1 + static_cast<std::size_t>(uniform(rng, 0, double(n - 1)));
        for (std::size_t i = 0; i < count; ++i) atoms.push_back(static_cast<std::uint32_t>(i));
        Event e(space, atoms);
        double p = event_probability(belief, e);
        ok = p > 0.0 && p < 1.0;
    }
    suite.record("event.probability_bounds", ok);
}

void check_consistency_oracle(Suite& suite, Rng& rng) {
    int agree = 0, total = 0, skipped = 0;
    bool certificates_ok = true;
    for (int t = 0; t < 100; ++t) {
        std::size_t n = 3 + static_cast<std::size_t>(uniform(rng, 0, 5));
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) labels.push_back("w" + std::to_string(i));
        auto space = SampleSpace::make(labels);
        std::size_t m = 1 + static_cast<std::size_t>(uniform(rng, 0, 3));
        std::vector<Event> events;
        std::vector<double> prices;
        for (std::size_t z = 0; z < m; ++z) {
            std::vector<std::uint32_t> atoms;
            for (std::uint32_t w = 0; w < n; ++w) {
                if (uniform(rng, 0, 1) < 0.5) atoms.push_back(w);
            }
            if (atoms.empty()) atoms.push_back(static_cast<std::uint32_t>(
                uniform(rng, 0, double(n) - 0.01)));
            if (atoms.size() == n) atoms.pop_back();
            events.emplace_back(space, atoms);
            prices.push_back(uniform(rng, 0.05, 0.95));
        }
        SecuritySet sec(events, prices);
        int oracle = oracle_feasible(sec);
        if (oracle == 0) {
            ++skipped;
            continue;
        }
        ++total;
        auto verdict = check_consistency(sec);
        if ((oracle == 1) == verdict.consistent()) ++agree;
        if (!verdict.consistent()) {
            double worst = 1e300, best = -1e300;
            for (std::uint32_t w = 0; w < n; ++w) {
                double pay = sec.payoff(verdict.direction, w);
                worst = std::min(worst, pay);
                best = std::max(best, pay);
            }
            certificates_ok =
                certificates_ok && worst >= -kTolFeas && best > kTolFeas;
        } else {
            JointBelief q(space, verdict.measure);
            for (std::size_t z = 0; z < m; ++z) {
                double d = demand_single(event_probability(q, events[z]), 1.0, prices[z]);
                certificates_ok = certificates_ok && std::abs(d) <= 1e-6;
            }
        }
    }
    suite.record("consistency.oracle_agreement", agree == total,
                 std::to_string(agree) + "/" + std::to_string(total) + " (" +
                     std::to_string(skipped) + " boundary skipped)");
    suite.record("consistency.certificates_verify", certificates_ok);
}

void check_prop1_sign_law(Suite& suite, Rng& rng) {
    bool ok = true;
    for (int t = 0; t < 1000 && ok; ++t) {
        double pr = uniform(rng, 0.02, 0.98);
        double p = uniform(rng, 0.02, 0.98);
        double c = uniform(rng, 0.2, 5.0);
        double x = demand_single(pr, c, p);
        if (pr > p) ok = x > 0.0;
        else if (pr < p) ok = x < 0.0;
        ok = ok && demand_single(p, c, p) == 0.0;
    }
    suite.record("prop1.sign_law", ok);
}

void check_prop2_separability(Suite& suite, Rng& rng) {
    double worst = 0.0;
    auto space = two_by_two();
    for (int t = 0; t < 1000; ++t) {
        double pa = uniform(rng, 0.1, 0.9), pb = uniform(rng, 0.1, 0.9);
        double qa = uniform(rng, 0.1, 0.9), qb = uniform(rng, 0.1, 0.9);
        double c = uniform(rng, 0.3, 3.0);
        CaraAgent agent(product_belief(space, pa, pb), c);
        auto sol = demand_pair_fixed_point(agent, pair_securities(space, qa, qb));
        worst = std::max(worst, std::abs(sol.bundle[0] - demand_single(pa, c, qa)));
        worst = std::max(worst, std::abs(sol.bundle[1] - demand_single(pb, c, qb)));
    }
    suite.record("prop2.separability", worst <= 1e-8, "max dev " + fmt("%.2e", worst));
}

void check_prop3_correlation(Suite& suite, Rng& rng) {
    bool ok = true;
    auto space = two_by_two();
    for (int t = 0; t < 1000 && ok; ++t) {
        auto belief = random_belief(rng, space);
        Event a(space, {0, 1}), b(space, {0, 2});
        double cond_b = conditional_probability(belief, a, b);
        double cond_nb = conditional_probability(belief, a, b.complement());
        if (std::abs(cond_b - cond_nb) < 1e-3) continue;  // near independence
        double pa = uniform(rng, 0.2, 0.8), pb = uniform(rng, 0.2, 0.8);
        double c = uniform(rng, 0.5, 2.0);
        auto sec = pair_securities(space, pa, pb);
        CaraAgent agent(belief, c);
        double b1 = uniform(rng, -1.0, 0.0);
        double b2 = b1 + uniform(rng, 0.2, 1.0);
        auto constrained = [&](double xb) {
            return golden_max(
                [&](double xa) {
                    double bundle[2] = {xa, xb};
                    return expected_utility(agent, sec, bundle);
                },
                -40.0, 40.0);
        };
        double xa1 = constrained(b1);
        double xa2 = constrained(b2);
        if (cond_b < cond_nb) ok = xa2 > xa1 - 1e-7;
        else ok = xa2 < xa1 + 1e-7;
        if (ok && std::abs(cond_b - cond_nb) > 1e-2) {
            // direction should be strict away from independence
            ok = cond_b < cond_nb ? xa2 > xa1 + 1e-9 : xa2 < xa1 - 1e-9;
        }
    }
    suite.record("prop3.correlation_direction", ok);
}

void check_prop4_equivalent(Suite& suite, Rng& rng) {
    double worst = 0.0, worst_split = 0.0;
    auto space = SampleSpace::make({"A", "A~"});
    for (int t = 0; t < 1000; ++t) {
        double pr = uniform(rng, 0.1, 0.9);
        double p = uniform(rng, 0.1, 0.9);
        double c = uniform(rng, 0.3, 3.0);
        JointBelief belief(space, {pr, 1.0 - pr});
        Event a(space, {0});
        SecuritySet sec({a, a}, {p, p});
        auto sol = demand_general(CaraAgent(belief, c), sec);
        double want = demand_single(pr, c, p);
        worst = std::max(worst, std::abs(sol.bundle[0] + sol.bundle[1] - want));
        worst_split = std::max(worst_split, std::abs(sol.bundle[0] - sol.bundle[1]));
        if (!sol.trace.ridge) worst = 1e300;
    }
    suite.record("prop4.equivalent_events", worst <= 1e-8 && worst_split <= 1e-8,
                 "max dev " + fmt("%.2e", worst));
}

void check_prop5_complementary(Suite& suite, Rng& rng) {
    double worst = 0.0;
    auto space = SampleSpace::make({"A", "A~"});
    for (int t = 0; t < 1000; ++t) {
        double pr = uniform(rng, 0.1, 0.9);
        double p = uniform(rng, 0.1, 0.9);
        double c = uniform(rng, 0.3, 3.0);
        JointBelief belief(space, {pr, 1.0 - pr});
        SecuritySet sec({Event(space, {0}), Event(space, {1})}, {p, 1.0 - p});
        auto sol = demand_general(CaraAgent(belief, c), sec);
        double want = demand_single(pr, c, p);
        worst = std::max(worst, std::abs(sol.bundle[0] - sol.bundle[1] - want));
    }
    suite.record("prop5.complementary_events", worst <= 1e-8,
                 "max dev " + fmt("%.2e", worst));
}

void check_first_order_condition(Suite& suite, Rng& rng) {
    double worst = 0.0;
    auto space = SampleSpace::make({"A", "A~"});
    for (int t = 0; t < 500; ++t) {
        double pr = uniform(rng, 0.1, 0.9);
        double p = uniform(rng, 0.1, 0.9);
        double c = uniform(rng, 0.3, 3.0);
        SecuritySet sec({Event(space, {0})}, {p});
        auto sol = demand_general(CaraAgent(JointBelief(space, {pr, 1.0 - pr}), c), sec);
        double x = sol.bundle[0];
        auto uprime = [c](double y) { return c * std::exp(-c * y); };
        double lhs = pr * uprime((1.0 - p) * x) / ((1.0 - pr) * uprime(-p * x));
        double rhs = p / (1.0 - p);
        worst = std::max(worst, std::abs(lhs - rhs) / rhs);
    }
    suite.record("foc.single_security_ratio", worst <= 1e-6,
                 "max rel dev " + fmt("%.2e", worst));
}

void check_inverse_c_scaling(Suite& suite, Rng& rng) {
    double worst = 0.0;
    auto space = two_by_two();
    for (int t = 0; t < 500; ++t) {
        auto belief = random_belief(rng, space);
        double pa = uniform(rng, 0.2, 0.8), pb = uniform(rng, 0.2, 0.8);
        double c = uniform(rng, 0.3, 2.0);
        auto sec = pair_securities(space, pa, pb);
        auto one = demand_general(CaraAgent(belief, c), sec);
        auto two = demand_general(CaraAgent(belief, 2.0 * c), sec);
        for (int z = 0; z < 2; ++z) {
            double scale = std::max(1.0, std::abs(one.bundle[z]));
            worst = std::max(worst,
                             std::abs(one.bundle[z] - 2.0 * two.bundle[z]) / scale);
        }
    }
    suite.record("demand.inverse_c_scaling", worst <= 1e-8,
                 "max rel dev " + fmt("%.2e", worst));
}

void check_grid_oracle(Suite& suite, Rng& rng) {
    double worst = 0.0;
    auto space = two_by_two();
    for (int t = 0; t < 40; ++t) {
        auto belief = random_belief(rng, space);
        double pa = uniform(rng, 0.2, 0.8), pb = uniform(rng, 0.2, 0.8);
        double c = uniform(rng, 0.5, 2.0);
        auto sec = pair_securities(space, pa, pb);
        CaraAgent agent(belief, c);
        auto sol = demand_general(agent, sec);

        double bx = 0.0, by = 0.0, bu = -1e300;
        double lo_x = -20.0, hi_x = 20.0, lo_y = -20.0, hi_y = 20.0;
        for (double step : {0.5, 0.01, 1e-4}) {
            bu = -1e300;
            for (double x = lo_x; x <= hi_x + step / 2; x += step) {
                for (double y = lo_y; y <= hi_y + step / 2; y += step) {
                    double bundle[2] = {x, y};
                    double u = expected_utility(agent, sec, bundle);
                    if (u > bu) {
                        bu = u;
                        bx = x;
                        by = y;
                    }
                }
            }
            lo_x = bx - step;
            hi_x = bx + step;
            lo_y = by - step;
            hi_y = by + step;
        }
        worst = std::max(worst, std::abs(sol.utility - bu));
    }
    suite.record("demand.grid_oracle", worst <= 1e-6, "max dev " + fmt("%.2e", worst));
}

void check_gradient_fd(Suite& suite, Rng& rng) {
    double worst = 0.0;
    auto space = two_by_two();
    for (int t = 0; t < 100; ++t) {
        auto belief = random_belief(rng, space);
        double c = uniform(rng, 0.3, 3.0);
        auto sec = pair_securities(space, uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
        CaraAgent agent(belief, c);
        std::vector<double> x = {uniform(rng, -2, 2), uniform(rng, -2, 2)};
        auto g = utility_gradient(agent, sec, x);
        const double h = 1e-5;
        for (int z = 0; z < 2; ++z) {
            auto hi = x, lo = x;
            hi[z] += h;
            lo[z] -= h;
            double fd = (expected_utility(agent, sec, hi) -
                         expected_utility(agent, sec, lo)) /
                        (2 * h);
            worst = std::max(worst, std::abs(g[z] - fd) / std::max(1.0, std::abs(fd)));
        }
    }
    suite.record("gradient.finite_difference", worst <= 1e-6,
                 "max rel dev " + fmt("%.2e", worst));
}

void check_super_agent(Suite& suite, Rng& rng) {
    double worst = 0.0;
    bool c_ok = true;
    for (int t = 0; t < 1000; ++t) {
        std::size_t n = 2 + static_cast<std::size_t>(uniform(rng, 0, 5));
        std::vector<double> beliefs, cs;
        for (std::size_t i = 0; i < n; ++i) {
            beliefs.push_back(uniform(rng, 0.1, 0.9));
            cs.push_back(uniform(rng, 0.3, 3.0));
        }
        auto super = make_super_agent(beliefs, cs);
        c_ok = c_ok && super.risk_aversion < *std::min_element(cs.begin(), cs.end());
        double p = uniform(rng, 0.05, 0.95);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += demand_single(beliefs[i], cs[i], p);
        double super_demand = demand_single(super.belief_scalar, super.risk_aversion, p);
        worst = std::max(worst, std::abs(super_demand - total));
    }
    suite.record("prop6.super_agent_identity", worst <= 1e-9 && c_ok,
                 "max dev " + fmt("%.2e", worst));
}

void check_price_bullets(Suite& suite, Rng& rng) {
    bool a_ok = true, b_ok = true, c_ok = true, d_ok = true, e_ok = true, f_ok = true;
    for (int t = 0; t < 1000; ++t) {
        std::size_t n = 2 + static_cast<std::size_t>(uniform(rng, 0, 5));
        std::vector<double> beliefs, cs;
        for (std::size_t i = 0; i < n; ++i) {
            beliefs.push_back(uniform(rng, 0.05, 0.95));
            cs.push_back(uniform(rng, 0.2, 4.0));
        }
        double p = equilibrium_single(beliefs, cs);

        double lo = *std::min_element(beliefs.begin(), beliefs.end());
        double hi = *std::max_element(beliefs.begin(), beliefs.end());
        a_ok = a_ok && p >= lo - 1e-12 && p <= hi + 1e-12;

        double k = uniform(rng, 0.05, 0.95);
        b_ok = b_ok &&
               std::abs(equilibrium_single(std::vector<double>(n, k), cs) - k) <= 1e-12;

        auto raised = beliefs;
        std::size_t pick = static_cast<std::size_t>(uniform(rng, 0, double(n) - 0.01));
        raised[pick] = std::min(0.99, raised[pick] + 0.02);
        c_ok = c_ok && equilibrium_single(raised, cs) > p;

        auto confident = cs;
        confident[pick] = 1e-6;
        d_ok = d_ok &&
               std::abs(equilibrium_single(beliefs, confident) - beliefs[pick]) <= 1e-4;

        auto scaled = cs;
        double lambda = uniform(rng, 0.1, 10.0);
        for (double& c : scaled) c *= lambda;
        e_ok = e_ok && std::abs(equilibrium_single(beliefs, scaled) - p) <= 1e-12;

        auto flipped = beliefs;
        for (double& bb : flipped) bb = 1.0 - bb;
        f_ok = f_ok && std::abs(equilibrium_single(flipped, cs) - (1.0 - p)) <= 1e-12;
    }
    suite.record("bullets.a_bounds", a_ok);
    suite.record("bullets.b_unanimity", b_ok);
    suite.record("bullets.c_monotonicity", c_ok);
    suite.record("bullets.d_confidence_limit", d_ok);
    suite.record("bullets.e_scale_invariance", e_ok);
    suite.record("bullets.f_complement_symmetry", f_ok);
}

void check_pooling_identities(Suite& suite, Rng& rng) {
    double worst_norm = 0.0, worst_eq = 0.0;
    bool disagreement_ok = true;
    for (int t = 0; t < 1000; ++t) {
        std::size_t n = 2 + static_cast<std::size_t>(uniform(rng, 0, 5));
        std::vector<double> probs, comp, cs;
        for (std::size_t i = 0; i < n; ++i) {
            probs.push_back(uniform(rng, 0.05, 0.95));
            comp.push_back(1.0 - probs.back());
            cs.push_back(uniform(rng, 0.2, 4.0));
        }
        auto w = risk_weights(cs);
        double un = logop_unnormalized(probs, w);
        double un_c = logop_unnormalized(comp, w);
        worst_norm = std::max(
            worst_norm, std::abs(logop_normalized(probs, w) - un / (un + un_c)));
        worst_eq = std::max(
            worst_eq, std::abs(logop_normalized(probs, w) - equilibrium_single(probs, cs)));
        double d = disagreement(probs, w);
        disagreement_ok = disagreement_ok && d >= -1e-12;
        double k = uniform(rng, 0.05, 0.95);
        disagreement_ok = disagreement_ok &&
                          std::abs(disagreement(std::vector<double>(n, k), w)) <= 1e-12;
    }
    suite.record("logop.normalization_identity", worst_norm <= 1e-12,
                 "max dev " + fmt("%.2e", worst_norm));
    suite.record("logop.equals_equilibrium_single", worst_eq <= 1e-12,
                 "max dev " + fmt("%.2e", worst_eq));
    suite.record("disagreement.nonnegative_zero_iff_unanimous", disagreement_ok);
}

void check_equilibrium_numeric(Suite& suite, Rng& rng) {
    double worst_single = 0.0, worst_disjoint = 0.0, worst_zero_sum = 0.0;
    bool consistent_ok = true, optimal_ok = true;
    EquilibriumConfig cfg;
    cfg.multi_start = 1;

    auto audit = [&](const Economy& economy, const EquilibriumResult& res) {
        SecuritySet sec(economy.events(), res.prices);
        consistent_ok = consistent_ok && check_consistency(sec).consistent();
        for (std::size_t i = 0; i < economy.agent_count(); ++i) {
            auto g = utility_gradient(economy.agents()[i], sec, res.demands[i]);
            double norm = 0.0;
            for (double v : g) norm += v * v;
            optimal_ok = optimal_ok && std::sqrt(norm) <= cfg.agent.tol_grad;
        }
        for (std::uint32_t w = 0; w < sec.atom_count(); ++w) {
            double total = 0.0;
            for (const auto& bundle : res.demands) total += sec.payoff(bundle, w);
            worst_zero_sum = std::max(worst_zero_sum, std::abs(total));
        }
    };

    auto space1 = SampleSpace::make({"A", "A~"});
    for (int t = 0; t < 25; ++t) {
        std::size_t n = 2 + static_cast<std::size_t>(uniform(rng, 0, 3));
        std::vector<CaraAgent> agents;
        std::vector<double> beliefs, cs;
        for (std::size_t i = 0; i < n; ++i) {
            beliefs.push_back(uniform(rng, 0.1, 0.9));
            cs.push_back(uniform(rng, 0.4, 2.5));
            agents.emplace_back(JointBelief(space1, {beliefs.back(), 1.0 - beliefs.back()}),
                                cs.back());
        }
        Economy economy(std::move(agents), {Event(space1, {0})});
        auto res = solve_equilibrium_numeric(economy, cfg);
        worst_single = std::max(
            worst_single, std::abs(res.prices[0] - equilibrium_single(beliefs, cs)));
        audit(economy, res);
    }

    auto space3 = SampleSpace::make({"A", "B", "neither"});
    for (int t = 0; t < 15; ++t) {
        std::size_t n = 2 + static_cast<std::size_t>(uniform(rng, 0, 2));
        std::vector<CaraAgent> agents;
        std::vector<std::pair<double, double>> beliefs;
        std::vector<double> cs;
        for (std::size_t i = 0; i < n; ++i) {
            double pa = uniform(rng, 0.1, 0.5), pb = uniform(rng, 0.1, 0.4);
            beliefs.emplace_back(pa, pb);
            cs.push_back(uniform(rng, 0.4, 2.5));
            agents.emplace_back(JointBelief(space3, {pa, pb, 1.0 - pa - pb}), cs.back());
        }
        Economy economy(std::move(agents),
                        {Event(space3, {0}), Event(space3, {1})});
        auto res = solve_equilibrium_numeric(economy, cfg);
        auto [ca, cb] = equilibrium_disjoint_pair(beliefs, cs);
        worst_disjoint = std::max(worst_disjoint, std::abs(res.prices[0] - ca));
        worst_disjoint = std::max(worst_disjoint, std::abs(res.prices[1] - cb));
        audit(economy, res);
    }

    suite.record("equilibrium.matches_single_closed_form", worst_single <= 1e-6,
                 "max dev " + fmt("%.2e", worst_single));
    suite.record("equilibrium.matches_disjoint_closed_form", worst_disjoint <= 1e-6,
                 "max dev " + fmt("%.2e", worst_disjoint));
    suite.record("equilibrium.prices_consistent", consistent_ok);
    suite.record("equilibrium.agent_optimality", optimal_ok);
    suite.record("equilibrium.zero_sum_clearing", worst_zero_sum <= 1e-8,
                 "max per-atom total " + fmt("%.2e", worst_zero_sum));
}

}  // namespace

std::vector<CheckResult> run_selfchecks(unsigned seed) {
    Suite suite;
    Rng rng(seed);
    check_payoff_linearity(suite, rng);
    check_event_probability_bounds(suite, rng);
    check_consistency_oracle(suite, rng);
    check_prop1_sign_law(suite, rng);
    check_prop2_separability(suite, rng);
    check_prop3_correlation(suite, rng);
    check_prop4_equivalent(suite, rng);
    check_prop5_complementary(suite, rng);
    check_first_order_condition(suite, rng);
    check_inverse_c_scaling(suite, rng);
    check_grid_oracle(suite, rng);
    check_gradient_fd(suite, rng);
    check_super_agent(suite, rng);
    check_price_bullets(suite, rng);
    check_pooling_identities(suite, rng);
    check_equilibrium_numeric(suite, rng);
    return suite.results;
}

}  // namespace beliefmarket
