#include "beliefmarket/agent.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "beliefmarket/errors.hpp"

namespace beliefmarket {

namespace {

constexpr double kExpDomain = 700.0;  // |c * payoff| cap for finite accuracy

// Atoms with the same security-membership mask are interchangeable for
// utility purposes; collapse them into weighted classes. Sorted by mask so
// downstream arithmetic is order-deterministic.
struct Classes {
    std::vector<std::uint64_t> mask;
    std::vector<double> mass;
};

Classes collapse(const JointBelief& belief, const SecuritySet& securities) {
    if (!same_space(belief.space(), securities.space())) {
        throw std::invalid_argument("mismatched sample space");
    }
    std::map<std::uint64_t, double> grouped;
    for (std::size_t w = 0; w < belief.mass().size(); ++w) {
        grouped[securities.atom_mask(static_cast<std::uint32_t>(w))] += belief.mass()[w];
    }
    Classes c;
    c.mask.reserve(grouped.size());
    c.mass.reserve(grouped.size());
    for (const auto& [mask, mass] : grouped) {
        c.mask.push_back(mask);
        c.mass.push_back(mass);
    }
    return c;
}

// Payoff matrix row per class: v[z] = 1_{z in mask} - p_z, so that the class
// payoff of bundle x is v . x.
Eigen::MatrixXd payoff_matrix(const Classes& classes, const SecuritySet& securities) {
    const auto k = static_cast<Eigen::Index>(classes.mask.size());
    const auto m = static_cast<Eigen::Index>(securities.size());
    Eigen::MatrixXd v(k, m);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index z = 0; z < m; ++z) {
            double member = (classes.mask[static_cast<std::size_t>(i)] >>
                             static_cast<unsigned>(z)) & 1u;
            v(i, z) = member - securities.prices()[static_cast<std::size_t>(z)];
        }
    }
    return v;
}

// log(-U) = logsumexp over classes of (ln mass - c * payoff). Returns false
// when any exponent leaves the accuracy domain.
bool log_neg_utility(const Classes& classes, const Eigen::MatrixXd& v, double c,
                     const Eigen::VectorXd& x, double* out,
                     Eigen::VectorXd* exponents = nullptr) {
    Eigen::VectorXd pay = v * x;
    Eigen::VectorXd a(pay.size());
    for (Eigen::Index i = 0; i < pay.size(); ++i) {
        double scaled = c * pay[i];
        if (std::abs(scaled) > kExpDomain) return false;
        a[i] = std::log(classes.mass[static_cast<std::size_t>(i)]) - scaled;
    }
    double amax = a.maxCoeff();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) sum += std::exp(a[i] - amax);
    *out = amax + std::log(sum);
    if (exponents) *exponents = a;
    return true;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& a) {
    Eigen::VectorXd w = (a.array() - a.maxCoeff()).exp();
    return w / w.sum();
}

void require_consistent(const SecuritySet& securities, const SolverConfig& config) {
    if (config.assume_consistent) return;
    auto verdict = check_consistency(securities);
    if (!verdict.consistent()) {
        throw ArbitrageError("prices admit arbitrage; demand is unbounded",
                             verdict.direction);
    }
}

DemandSolution finish_solution(const CaraAgent& agent, const SecuritySet& securities,
                               std::vector<double> bundle, SolverTrace trace) {
    DemandSolution sol;
    sol.utility = expected_utility(agent, securities, bundle);
    sol.certainty_equivalent =
        -std::log(-sol.utility) / agent.risk_aversion;
    auto grad = utility_gradient(agent, securities, bundle);
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    sol.gradient_norm = std::sqrt(norm2);
    sol.bundle = std::move(bundle);
    sol.trace = std::move(trace);
    return sol;
}

}  // namespace

CaraAgent::CaraAgent(JointBelief belief_, double risk_aversion_)
    : belief(std::move(belief_)), risk_aversion(risk_aversion_) {
    if (!(risk_aversion > 0.0)) {
        throw std::invalid_argument("risk aversion coefficient must be positive");
    }
}

double expected_utility(const CaraAgent& agent, const SecuritySet& securities,
                        std::span<const double> bundle) {
    if (bundle.size() != securities.size()) {
        throw std::invalid_argument("bundle length must match security count");
    }
    auto classes = collapse(agent.belief, securities);
    auto v = payoff_matrix(classes, securities);
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
        bundle.data(), static_cast<Eigen::Index>(bundle.size()));
    double f;
    if (!log_neg_utility(classes, v, agent.risk_aversion, x, &f)) {
        throw std::range_error("bundle outside the finite-accuracy utility domain");
    }
    return -std::exp(f);
}

std::vector<double> utility_gradient(const CaraAgent& agent,
                                     const SecuritySet& securities,
                                     std::span<const double> bundle) {
    if (bundle.size() != securities.size()) {
        throw std::invalid_argument("bundle length must match security count");
    }
    auto classes = collapse(agent.belief, securities);
    auto v = payoff_matrix(classes, securities);
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
        bundle.data(), static_cast<Eigen::Index>(bundle.size()));
    double f;
    Eigen::VectorXd a;
    if (!log_neg_utility(classes, v, agent.risk_aversion, x, &f, &a)) {
        throw std::range_error("bundle outside the finite-accuracy utility domain");
    }
    // grad_z U = c * sum_k mass_k e^{-c pay_k} v_{k,z} = c * e^f * (V^T softmax)
    Eigen::VectorXd g = agent.risk_aversion * std::exp(f) * (v.transpose() * softmax(a));
    return std::vector<double>(g.data(), g.data() + g.size());
}

double demand_single(double pr_a, double c, double p) {
    if (!(pr_a > 0.0 && pr_a < 1.0) || !(p > 0.0 && p < 1.0)) {
        throw std::range_error("probability and price must lie strictly in (0,1)");
    }
    if (!(c > 0.0)) {
        throw std::invalid_argument("risk aversion coefficient must be positive");
    }
    return (std::log((1.0 - p) * pr_a) - std::log(p * (1.0 - pr_a))) / c;
}

std::pair<double, double> demand_disjoint_pair(double pr_a, double pr_b, double c,
                                               double p_a, double p_b) {
    if (!(pr_a > 0.0 && pr_b > 0.0) || !(p_a > 0.0 && p_a < 1.0) ||
        !(p_b > 0.0 && p_b < 1.0)) {
        throw std::range_error("probabilities and prices must lie strictly in (0,1)");
    }
    if (!(c > 0.0)) {
        throw std::invalid_argument("risk aversion coefficient must be positive");
    }
    if (pr_a + pr_b >= 1.0) {
        throw std::invalid_argument(
            "disjoint-pair beliefs must leave positive residual mass");
    }
    if (p_a + p_b >= 1.0) {
        // Selling one unit of each never loses and gains when neither occurs.
        throw ArbitrageError("p_a + p_b >= 1: selling both securities is arbitrage",
                             {-1.0, -1.0});
    }
    double residual_pr = 1.0 - pr_a - pr_b;
    double residual_p = 1.0 - p_a - p_b;
    double x_a = std::log(residual_p * pr_a / (p_a * residual_pr)) / c;
    double x_b = std::log(residual_p * pr_b / (p_b * residual_pr)) / c;
    return {x_a, x_b};
}

DemandSolution demand_general(const CaraAgent& agent, const SecuritySet& securities,
                              const SolverConfig& config) {
    require_consistent(securities, config);

    const double c = agent.risk_aversion;
    auto classes = collapse(agent.belief, securities);
    auto v = payoff_matrix(classes, securities);
    const auto m = static_cast<Eigen::Index>(securities.size());

    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    SolverTrace trace;
    trace.method = "newton";

    double f = 0.0;
    Eigen::VectorXd a;
    if (!log_neg_utility(classes, v, c, x, &f, &a)) {
        throw std::range_error("utility undefined at the origin");  // unreachable
    }

    double grad_u_norm = 0.0;
    // Extra full steps after the tolerance is first met; quadratic
    // convergence drives the argument error to the noise floor.
    int polish = 2;
    for (int iter = 0; iter < config.max_iter_newton; ++iter) {
        trace.iterations = iter;
        Eigen::VectorXd w = softmax(a);
        Eigen::VectorXd vbar = v.transpose() * w;
        Eigen::VectorXd grad = -c * vbar;  // gradient of log(-U)
        grad_u_norm = std::exp(f) * c * vbar.norm();
        if (grad_u_norm <= config.tol_grad) {
            trace.converged = true;
            if (polish-- <= 0) break;
        }

        Eigen::MatrixXd s = v.transpose() * w.asDiagonal() * v;
        Eigen::MatrixXd h = c * c * (s - vbar * vbar.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
        double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
        double thresh = std::max(lmax, 1e-300) * 1e-12;

        // Pseudo-inverse Newton step: stays in the row space, so flat ridge
        // directions are never entered.
        Eigen::VectorXd gproj = eig.eigenvectors().transpose() * grad;
        Eigen::VectorXd step_coeff = Eigen::VectorXd::Zero(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            if (eig.eigenvalues()[i] > thresh) {
                step_coeff[i] = -gproj[i] / eig.eigenvalues()[i];
            }
        }
        Eigen::VectorXd step = eig.eigenvectors() * step_coeff;
        double slope = grad.dot(step);
        if (step.norm() == 0.0 || slope >= 0.0) break;  // cannot improve

        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            double f_try;
            Eigen::VectorXd a_try;
            // The noise term keeps the final steps from being rejected once
            // the true decrement drops below representable precision.
            double noise = 1e-14 * std::max(1.0, std::abs(f));
            if (log_neg_utility(classes, v, c, x + t * step, &f_try, &a_try) &&
                f_try <= f + 1e-4 * t * slope + noise) {
                x += t * step;
                f = f_try;
                a = a_try;
                moved = true;
                break;
            }
            t *= config.damping;
        }
        if (!moved) break;
    }

    if (!trace.converged) {
        throw SolverFailure("demand solver hit its iteration cap", trace.iterations,
                            grad_u_norm);
    }

    // Flat directions (d with v_k . d = 0 for all classes) leave utility
    // unchanged; canonicalize to the minimum-norm optimum.
    Eigen::MatrixXd gram = v.transpose() * v;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> geig(gram);
    double gmax = geig.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < m; ++i) {
        if (geig.eigenvalues()[i] <= std::max(gmax, 1e-300) * 1e-10) {
            Eigen::VectorXd null_dir = geig.eigenvectors().col(i);
            x -= null_dir.dot(x) * null_dir;
            trace.ridge = true;
        }
    }

    return finish_solution(agent, securities,
                           std::vector<double>(x.data(), x.data() + x.size()),
                           std::move(trace));
}

DemandSolution demand_pair_fixed_point(const CaraAgent& agent,
                                       const SecuritySet& securities,
                                       const SolverConfig& config) {
    if (securities.size() != 2) {
        throw std::invalid_argument("fixed-point demand needs exactly two securities");
    }
    require_consistent(securities, config);

    auto classes = collapse(agent.belief, securities);
    double p_ab = 0.0, p_anb = 0.0, p_nab = 0.0, p_nanb = 0.0;
    for (std::size_t i = 0; i < classes.mask.size(); ++i) {
        switch (classes.mask[i]) {
            case 3: p_ab += classes.mass[i]; break;
            case 1: p_anb += classes.mass[i]; break;
            case 2: p_nab += classes.mass[i]; break;
            default: p_nanb += classes.mass[i]; break;
        }
    }
    const double c = agent.risk_aversion;
    const double pa = securities.prices()[0];
    const double pb = securities.prices()[1];

    auto safe_exp = [](double e) { return std::exp(std::clamp(e, -kExpDomain, kExpDomain)); };
    auto best_a = [&](double xb) {
        double e = safe_exp(-c * xb);
        return std::log((1.0 - pa) * (p_ab * e + p_anb) / (pa * (p_nab * e + p_nanb))) / c;
    };
    auto best_b = [&](double xa) {
        double e = safe_exp(-c * xa);
        return std::log((1.0 - pb) * (p_ab * e + p_nab) / (pb * (p_anb * e + p_nanb))) / c;
    };

    double xa = 0.0, xb = 0.0;
    double prev_da = 0.0, prev_db = 0.0;
    bool damped = false;
    SolverTrace trace;
    trace.method = "fixed_point";
    bool settled = false;
    for (int iter = 1; iter <= config.max_iter_fixpoint; ++iter) {
        trace.iterations = iter;
        double target_a = best_a(xb);
        double da = target_a - xa;
        xa += damped ? config.damping * da : da;
        double target_b = best_b(xa);
        double db = target_b - xb;
        xb += damped ? config.damping * db : db;

        if (!damped && iter > 1 && (da * prev_da < 0.0 || db * prev_db < 0.0)) {
            damped = true;
        }
        prev_da = da;
        prev_db = db;
        if (std::max(std::abs(da), std::abs(db)) < config.tol_fixpoint) {
            settled = true;
            break;
        }
    }

    if (settled) {
        auto sol = finish_solution(agent, securities, {xa, xb}, trace);
        if (sol.gradient_norm <= config.tol_grad) {
            sol.trace.converged = true;
            return sol;
        }
    }

    // Fixed point failed to settle (or settled short of the gradient
    // tolerance); hand off to the general solver.
    auto sol = demand_general(agent, securities, config);
    sol.trace.method = "fixed_point->newton";
    sol.trace.fallback = true;
    return sol;
}

}  // namespace beliefmarket
