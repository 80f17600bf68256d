#include "beliefmarket/pooling.hpp"

#include <cmath>
#include <stdexcept>

namespace beliefmarket {

namespace {

void check_probs(const std::vector<double>& probs, const WeightVector& weights) {
    if (probs.size() != weights.size()) {
        throw std::invalid_argument("probability and weight counts must match");
    }
    for (double p : probs) {
        if (!(p > 0.0 && p < 1.0)) {
            throw std::range_error("pooled probabilities must lie strictly in (0,1)");
        }
    }
}

double weighted_log_sum(const std::vector<double>& probs, const WeightVector& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        s += weights.values()[i] * std::log(probs[i]);
    }
    return s;
}

}  // namespace

WeightVector::WeightVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("weight vector must be nonempty");
    double sum = 0.0;
    for (double a : values_) {
        if (!(a > 0.0)) throw std::invalid_argument("weights must be positive");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("weights must sum to unity");
    }
}

WeightVector risk_weights(const std::vector<double>& cs) {
    if (cs.empty()) throw std::invalid_argument("need at least one risk coefficient");
    double total_inv = 0.0;
    for (double c : cs) {
        if (!(c > 0.0)) throw std::invalid_argument("risk coefficients must be positive");
        total_inv += 1.0 / c;
    }
    std::vector<double> alpha(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) alpha[i] = (1.0 / cs[i]) / total_inv;
    return WeightVector(std::move(alpha));
}

double logop_normalized(const std::vector<double>& probs, const WeightVector& weights) {
    check_probs(probs, weights);
    double s_event = weighted_log_sum(probs, weights);
    std::vector<double> comp(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) comp[i] = 1.0 - probs[i];
    double s_comp = weighted_log_sum(comp, weights);
    return 1.0 / (1.0 + std::exp(s_comp - s_event));
}

double logop_unnormalized(const std::vector<double>& probs, const WeightVector& weights) {
    check_probs(probs, weights);
    return std::exp(weighted_log_sum(probs, weights));
}

double disagreement(const std::vector<double>& probs, const WeightVector& weights) {
    check_probs(probs, weights);
    std::vector<double> comp(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) comp[i] = 1.0 - probs[i];
    return 1.0 - logop_unnormalized(probs, weights) - logop_unnormalized(comp, weights);
}

double linear_pool(const std::vector<double>& probs, const WeightVector& weights) {
    check_probs(probs, weights);
    double s = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        s += weights.values()[i] * probs[i];
    }
    return s;
}

}  // namespace beliefmarket
