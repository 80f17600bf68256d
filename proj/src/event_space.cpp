#include "beliefmarket/event_space.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "beliefmarket/errors.hpp"

namespace beliefmarket {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

SampleSpace::SampleSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {}

SampleSpacePtr SampleSpace::make(std::vector<std::string> labels) {
    require(labels.size() >= 2, "sample space needs at least two atoms");
    require(labels.size() <= kMaxAtoms, "sample space exceeds the atom cap");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels) {
        require(seen.insert(l).second, "sample space labels must be distinct");
    }
    return SampleSpacePtr(new SampleSpace(std::move(labels)));
}

std::optional<std::size_t> SampleSpace::index(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) return i;
    }
    return std::nullopt;
}

bool same_space(const SampleSpacePtr& a, const SampleSpacePtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return a->labels() == b->labels();
}

Event::Event(SampleSpacePtr space, std::vector<std::uint32_t> atoms)
    : space_(std::move(space)), atoms_(std::move(atoms)) {
    require(space_ != nullptr, "event needs a sample space");
    std::sort(atoms_.begin(), atoms_.end());
    atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
    require(!atoms_.empty(), "event must be nonempty");
    require(atoms_.size() < space_->size(), "event must be proper");
    require(atoms_.back() < space_->size(), "event atom index out of range");
}

bool Event::contains(std::uint32_t atom) const {
    return std::binary_search(atoms_.begin(), atoms_.end(), atom);
}

Event Event::complement() const {
    std::vector<std::uint32_t> rest;
    rest.reserve(space_->size() - atoms_.size());
    for (std::uint32_t i = 0; i < space_->size(); ++i) {
        if (!contains(i)) rest.push_back(i);
    }
    return Event(space_, std::move(rest));
}

JointBelief::JointBelief(SampleSpacePtr space, std::vector<double> mass)
    : space_(std::move(space)), mass_(std::move(mass)) {
    require(space_ != nullptr, "belief needs a sample space");
    require(mass_.size() == space_->size(), "belief mass count must match atom count");
    double sum = 0.0;
    for (double m : mass_) {
        // hair of slack below kEpsMass for renormalization rounding
        require(m >= kEpsMass * 0.999999, "atom mass below the positivity floor");
        require(m < 1.0, "atom mass must be below one");
        sum += m;
    }
    require(std::abs(sum - 1.0) <= kTolNorm, "belief masses must sum to one");
}

std::pair<JointBelief, bool> JointBelief::clamped(SampleSpacePtr space,
                                                  std::vector<double> mass) {
    bool warned = false;
    double sum = 0.0;
    for (double& m : mass) {
        if (m < kEpsMass) {
            m = kEpsMass;
            warned = true;
        }
        sum += m;
    }
    require(sum > 0.0, "belief mass must be positive");
    if (std::abs(sum - 1.0) > 1e-15) {
        for (double& m : mass) m /= sum;
        if (std::abs(sum - 1.0) > kTolNorm) warned = true;
    }
    return {JointBelief(std::move(space), std::move(mass)), warned};
}

namespace {

double intersection_mass(const JointBelief& belief, const Event& a, const Event& b) {
    double sum = 0.0;
    const auto& xs = a.atoms();
    const auto& ys = b.atoms();
    std::size_t i = 0, j = 0;
    while (i < xs.size() && j < ys.size()) {
        if (xs[i] < ys[j]) {
            ++i;
        } else if (ys[j] < xs[i]) {
            ++j;
        } else {
            sum += belief.mass()[xs[i]];
            ++i;
            ++j;
        }
    }
    return sum;
}

void require_shared_space(const SampleSpacePtr& a, const SampleSpacePtr& b) {
    require(same_space(a, b), "mismatched sample space");
}

}  // namespace

double event_probability(const JointBelief& belief, const Event& event) {
    require_shared_space(belief.space(), event.space());
    double sum = 0.0;
    for (auto atom : event.atoms()) sum += belief.mass()[atom];
    return sum;
}

double conditional_probability(const JointBelief& belief, const Event& a,
                               const Event& given) {
    require_shared_space(belief.space(), a.space());
    require_shared_space(belief.space(), given.space());
    return intersection_mass(belief, a, given) / event_probability(belief, given);
}

bool are_independent(const JointBelief& belief, const Event& a, const Event& b,
                     double tol) {
    require_shared_space(belief.space(), a.space());
    require_shared_space(belief.space(), b.space());
    double joint = intersection_mass(belief, a, b);
    return std::abs(joint - event_probability(belief, a) * event_probability(belief, b)) <= tol;
}

SecuritySet::SecuritySet(std::vector<Event> events, std::vector<double> prices)
    : events_(std::move(events)), prices_(std::move(prices)) {
    require(!events_.empty(), "security set must contain at least one security");
    require(events_.size() <= kMaxSecurities, "security set exceeds the security cap");
    require(events_.size() == prices_.size(), "price count must match security count");
    space_ = events_.front().space();
    for (const auto& e : events_) require_shared_space(space_, e.space());
    for (double p : prices_) {
        require(p > 0.0 && p < 1.0, "security price must lie strictly in (0,1)");
    }
    atom_masks_.assign(space_->size(), 0);
    for (std::size_t z = 0; z < events_.size(); ++z) {
        for (auto atom : events_[z].atoms()) {
            atom_masks_[atom] |= std::uint64_t{1} << z;
        }
    }
}

double SecuritySet::payoff_for_mask(std::span<const double> bundle,
                                    std::uint64_t mask) const {
    require(bundle.size() == events_.size(), "bundle length must match security count");
    double sum = 0.0;
    for (std::uint64_t bits = mask; bits != 0; bits &= bits - 1) {
        sum += bundle[std::countr_zero(bits)];
    }
    for (std::size_t z = 0; z < prices_.size(); ++z) sum -= prices_[z] * bundle[z];
    return sum;
}

double SecuritySet::payoff(std::span<const double> bundle, std::uint32_t atom) const {
    require(atom < atom_masks_.size(), "atom index out of range");
    return payoff_for_mask(bundle, atom_masks_[atom]);
}

// ---------------------------------------------------------------------------
// Consistency via phase-one simplex.
//
// Prices are consistent iff some probability measure q with q(w) >= eps prices
// every security exactly:
//     sum_w q(w) = 1,   sum_{w in Z} q(w) = p_Z  for each Z.
// Substituting r = q - eps >= 0 gives the feasibility system A r = b, r >= 0,
// solved by minimizing the sum of artificial variables with a revised simplex.
// On infeasibility the dual multipliers y satisfy y'A <= 0, y'b > 0 (Farkas),
// and d_Z = -y_Z is an arbitrage portfolio.
// ---------------------------------------------------------------------------

namespace {

struct PhaseOne {
    const SecuritySet& sec;
    std::size_t n;       // atoms (structural columns)
    std::size_t rows;    // m + 1
    std::vector<double> sign;  // row flips making rhs nonnegative
    std::vector<double> rhs;   // |b| after flips

    explicit PhaseOne(const SecuritySet& s) : sec(s), n(s.atom_count()), rows(s.size() + 1) {
        std::vector<double> b(rows);
        b[0] = 1.0 - static_cast<double>(n) * kEpsMeasure;
        for (std::size_t z = 0; z < sec.size(); ++z) {
            b[z + 1] = sec.prices()[z] -
                       static_cast<double>(sec.events()[z].size()) * kEpsMeasure;
        }
        sign.resize(rows);
        rhs.resize(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            sign[i] = b[i] >= 0.0 ? 1.0 : -1.0;
            rhs[i] = std::abs(b[i]);
        }
    }

    // Flipped structural column for atom w: sign[i] * (row 0 is the
    // normalization row, the rest indicator rows).
    Eigen::VectorXd column(std::uint32_t atom) const {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
        a[0] = sign[0];
        for (std::uint64_t bits = sec.atom_mask(atom); bits != 0; bits &= bits - 1) {
            int z = std::countr_zero(bits);
            a[z + 1] = sign[z + 1];
        }
        return a;
    }

    double reduced_cost(const Eigen::VectorXd& y, std::uint32_t atom) const {
        double dot = y[0] * sign[0];
        for (std::uint64_t bits = sec.atom_mask(atom); bits != 0; bits &= bits - 1) {
            int z = std::countr_zero(bits);
            dot += y[z + 1] * sign[z + 1];
        }
        return -dot;  // structural cost is zero in phase one
    }
};

}  // namespace

ConsistencyVerdict check_consistency(const SecuritySet& securities) {
    const PhaseOne lp(securities);
    const std::size_t rows = lp.rows;
    const std::size_t n = lp.n;
    const auto ri = [](std::size_t i) { return static_cast<Eigen::Index>(i); };

    // basis[i] < n: structural column (atom); otherwise artificial for row i.
    std::vector<std::size_t> basis(rows);
    for (std::size_t i = 0; i < rows; ++i) basis[i] = n + i;

    Eigen::VectorXd b = Eigen::VectorXd::Zero(ri(rows));
    for (std::size_t i = 0; i < rows; ++i) b[ri(i)] = lp.rhs[i];

    const int max_iter = 20000;
    const int bland_after = static_cast<int>(4 * (n + rows));
    const double rc_tol = 1e-10;

    Eigen::VectorXd x_basic, y;
    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(ri(rows), ri(rows));
        Eigen::VectorXd cost_basic = Eigen::VectorXd::Zero(ri(rows));
        for (std::size_t i = 0; i < rows; ++i) {
            if (basis[i] < n) {
                B.col(ri(i)) = lp.column(static_cast<std::uint32_t>(basis[i]));
            } else {
                B(ri(basis[i] - n), ri(i)) = 1.0;
                cost_basic[ri(i)] = 1.0;
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        x_basic = lu.solve(b);
        y = lu.transpose().solve(cost_basic);

        // Pricing: only structural columns may enter.
        std::vector<bool> in_basis(n, false);
        for (auto bi : basis) {
            if (bi < n) in_basis[bi] = true;
        }
        long entering = -1;
        double best = -rc_tol;
        const bool bland = iter >= bland_after;
        for (std::uint32_t w = 0; w < n; ++w) {
            if (in_basis[w]) continue;
            double rc = lp.reduced_cost(y, w);
            if (rc < -rc_tol) {
                if (bland) {
                    entering = w;
                    break;
                }
                if (rc < best) {
                    best = rc;
                    entering = w;
                }
            }
        }

        if (entering < 0) {
            double objective = cost_basic.dot(x_basic);
            // Threshold must be well below kEpsMeasure: infeasibilities of
            // boundary price vectors are of order eps times the atom count.
            if (objective <= 1e-11) {
                // Feasible: recover q = eps + r from the basic solution.
                std::vector<double> q(n, kEpsMeasure);
                for (std::size_t i = 0; i < rows; ++i) {
                    if (basis[i] < n) q[basis[i]] += std::max(0.0, x_basic[ri(i)]);
                }
                std::vector<double> residual(rows, 0.0);
                for (std::uint32_t w = 0; w < n; ++w) {
                    residual[0] += q[w];
                    for (std::uint64_t bits = securities.atom_mask(w); bits != 0;
                         bits &= bits - 1) {
                        residual[std::countr_zero(bits) + 1] += q[w];
                    }
                }
                double err = std::abs(residual[0] - 1.0);
                for (std::size_t z = 0; z < securities.size(); ++z) {
                    err = std::max(err, std::abs(residual[z + 1] - securities.prices()[z]));
                }
                if (err > kTolFeas) {
                    throw SolverFailure("consistency measure failed verification", iter, err);
                }
                return {Consistency::Consistent, std::move(q), {}};
            }

            // Infeasible: Farkas direction from the dual, signs unflipped.
            std::vector<double> d(securities.size());
            double scale = 0.0;
            for (std::size_t z = 0; z < securities.size(); ++z) {
                d[z] = -lp.sign[z + 1] * y[ri(z + 1)];
                scale = std::max(scale, std::abs(d[z]));
            }
            if (scale <= 0.0) {
                throw SolverFailure("empty arbitrage certificate", iter, objective);
            }
            for (double& v : d) v /= scale;
            double worst = 1e300, bestpay = -1e300;
            for (std::uint32_t w = 0; w < n; ++w) {
                double pay = securities.payoff(d, w);
                worst = std::min(worst, pay);
                bestpay = std::max(bestpay, pay);
            }
            if (worst < -kTolFeas || bestpay <= kTolFeas) {
                throw SolverFailure("arbitrage certificate failed verification", iter, worst);
            }
            return {Consistency::Inconsistent, {}, std::move(d)};
        }

        // Ratio test; prefer kicking artificials out on ties.
        Eigen::VectorXd w_dir = lu.solve(lp.column(static_cast<std::uint32_t>(entering)));
        long leave = -1;
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (w_dir[ri(i)] > 1e-11) {
                double ratio = x_basic[ri(i)] / w_dir[ri(i)];
                bool better = leave < 0 || ratio < best_ratio - 1e-12 ||
                              (ratio < best_ratio + 1e-12 &&
                               basis[static_cast<std::size_t>(leave)] < n &&
                               basis[i] >= n);
                if (better) {
                    leave = static_cast<long>(i);
                    best_ratio = ratio;
                }
            }
        }
        if (leave < 0) {
            throw SolverFailure("phase-one simplex column unbounded", iter, 0.0);
        }
        basis[static_cast<std::size_t>(leave)] = static_cast<std::size_t>(entering);
    }
    throw SolverFailure("phase-one simplex iteration cap", max_iter, 0.0);
}

ConsistencyVerdict check_unit_combinations(const SecuritySet& securities) {
    const std::size_t m = securities.size();
    if (m > kMaxUnitComboSecurities) {
        throw std::invalid_argument("unit-combination enumeration cap exceeded");
    }

    // Distinct membership masks are enough; payoff depends on the atom only
    // through its mask.
    std::vector<std::uint64_t> masks(securities.atom_masks());
    std::sort(masks.begin(), masks.end());
    masks.erase(std::unique(masks.begin(), masks.end()), masks.end());

    std::size_t total = 1;
    for (std::size_t z = 0; z < m; ++z) total *= 3;

    std::vector<double> s(m);
    for (std::size_t t = 1; t < total; ++t) {
        std::size_t code = t;
        for (std::size_t z = 0; z < m; ++z) {
            int digit = static_cast<int>(code % 3);
            code /= 3;
            s[z] = digit == 0 ? 0.0 : (digit == 1 ? -1.0 : 1.0);
        }
        bool loses = false;
        for (auto mask : masks) {
            if (securities.payoff_for_mask(s, mask) < -kTolFeas) {
                loses = true;
                break;
            }
        }
        if (!loses) {
            return {Consistency::Inconsistent, {}, s};
        }
    }
    return {Consistency::Consistent, {}, {}};
}

}  // namespace beliefmarket
