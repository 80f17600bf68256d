#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace beliefmarket {

// Numeric policy shared across modules.
inline constexpr double kEpsMass = 1e-9;     // minimum atom mass in a belief
inline constexpr double kEpsMeasure = 1e-9;  // strict positivity of implied measures
inline constexpr double kTolNorm = 1e-9;     // belief normalization tolerance
inline constexpr double kTolFeas = 1e-8;     // certificate verification tolerance
inline constexpr std::size_t kMaxAtoms = std::size_t{1} << 20;
inline constexpr std::size_t kMaxSecurities = 64;
inline constexpr std::size_t kMaxUnitComboSecurities = 12;

class SampleSpace;
using SampleSpacePtr = std::shared_ptr<const SampleSpace>;

// Finite sample space: an ordered list of distinct atom labels.
class SampleSpace {
public:
    static SampleSpacePtr make(std::vector<std::string> labels);

    std::size_t size() const { return labels_.size(); }
    const std::string& label(std::size_t atom) const { return labels_[atom]; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::optional<std::size_t> index(const std::string& label) const;

private:
    explicit SampleSpace(std::vector<std::string> labels);
    std::vector<std::string> labels_;
};

// Two handles denote the same space if they are the same object or carry
// identical label lists.
bool same_space(const SampleSpacePtr& a, const SampleSpacePtr& b);

// Nonempty proper subset of a sample space, stored as sorted atom indices.
class Event {
public:
    Event(SampleSpacePtr space, std::vector<std::uint32_t> atoms);

    const SampleSpacePtr& space() const { return space_; }
    const std::vector<std::uint32_t>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    bool contains(std::uint32_t atom) const;
    Event complement() const;

private:
    SampleSpacePtr space_;
    std::vector<std::uint32_t> atoms_;  // sorted, unique
};

// Strictly positive probability mass over the atoms of one space.
class JointBelief {
public:
    JointBelief(SampleSpacePtr space, std::vector<double> mass);

    // Clamps masses below kEpsMass up to it and renormalizes. Returns the
    // belief and whether any clamping happened (callers warn on true).
    static std::pair<JointBelief, bool> clamped(SampleSpacePtr space,
                                                std::vector<double> mass);

    const SampleSpacePtr& space() const { return space_; }
    const std::vector<double>& mass() const { return mass_; }

private:
    SampleSpacePtr space_;
    std::vector<double> mass_;
};

double event_probability(const JointBelief& belief, const Event& event);
double conditional_probability(const JointBelief& belief, const Event& a,
                               const Event& given);
bool are_independent(const JointBelief& belief, const Event& a, const Event& b,
                     double tol);

// Ordered list of securities ("$1 if Z") with a price vector. Duplicate or
// logically related events are allowed. Each atom's membership across the
// securities is cached as a bitmask (hence the 64-security cap).
class SecuritySet {
public:
    SecuritySet(std::vector<Event> events, std::vector<double> prices);

    const SampleSpacePtr& space() const { return space_; }
    std::size_t size() const { return events_.size(); }
    std::size_t atom_count() const { return atom_masks_.size(); }
    const std::vector<Event>& events() const { return events_; }
    const std::vector<double>& prices() const { return prices_; }
    std::uint64_t atom_mask(std::uint32_t atom) const { return atom_masks_[atom]; }
    const std::vector<std::uint64_t>& atom_masks() const { return atom_masks_; }

    // Dollar payoff of a bundle in the given atom:
    // sum over securities containing the atom of x_Z, minus sum p_Z x_Z.
    double payoff(std::span<const double> bundle, std::uint32_t atom) const;
    double payoff_for_mask(std::span<const double> bundle, std::uint64_t mask) const;

private:
    SampleSpacePtr space_;
    std::vector<Event> events_;
    std::vector<double> prices_;
    std::vector<std::uint64_t> atom_masks_;
};

enum class Consistency { Consistent, Inconsistent };

// Consistent: `measure` is a strictly positive probability over atoms pricing
// every security exactly. Inconsistent: `direction` is a portfolio whose
// payoff is >= 0 in every atom and > 0 in at least one.
struct ConsistencyVerdict {
    Consistency status = Consistency::Inconsistent;
    std::vector<double> measure;
    std::vector<double> direction;

    bool consistent() const { return status == Consistency::Consistent; }
};

// Authoritative no-arbitrage gate: existence of a strictly positive implied
// probability measure, decided by a phase-one simplex. The infeasibility
// certificate is read from the dual at termination.
ConsistencyVerdict check_consistency(const SecuritySet& securities);

// Literal unit-combination criterion: every nonzero sign vector in
// {-1,0,+1}^m must lose money in some atom. A sign vector whose payoff is
// identically zero is flagged Inconsistent (weak arbitrage excluded).
// Throws std::invalid_argument above kMaxUnitComboSecurities.
ConsistencyVerdict check_unit_combinations(const SecuritySet& securities);

}  // namespace beliefmarket
