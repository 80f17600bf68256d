#pragma once

#include <vector>

namespace beliefmarket {

// Expert weights: strictly positive, summing to one.
class WeightVector {
public:
    explicit WeightVector(std::vector<double> values);

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

private:
    std::vector<double> values_;
};

// alpha_i = (1/c_i) / sum_j (1/c_j): normalized inverse risk aversion.
WeightVector risk_weights(const std::vector<double>& cs);

// Normalized logarithmic opinion pool,
//   prod p_i^a_i / (prod p_i^a_i + prod (1-p_i)^a_i),
// evaluated as exponentials of weighted log sums.
double logop_normalized(const std::vector<double>& probs, const WeightVector& weights);

// Weighted geometric mean prod p_i^a_i; in general not a probability.
double logop_unnormalized(const std::vector<double>& probs, const WeightVector& weights);

// 1 - (unnormalized pool of the probs + unnormalized pool of complements).
// Zero iff all probs agree.
double disagreement(const std::vector<double>& probs, const WeightVector& weights);

// Weighted arithmetic mean, reported alongside the LogOPs for comparison.
double linear_pool(const std::vector<double>& probs, const WeightVector& weights);

}  // namespace beliefmarket
