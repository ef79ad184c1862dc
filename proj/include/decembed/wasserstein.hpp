#pragma once

#include <vector>

namespace decembed {

/// Finitely supported distribution over points of R^d.
struct DiscreteDistribution {
  std::vector<std::vector<double>> support;
  std::vector<double> probs;
};

/// Merges points closer than 1e-12 and drops zero-mass points. Throws
/// std::invalid_argument when probabilities are negative or do not sum to
/// 1 within 1e-9, or when dimensions disagree.
DiscreteDistribution make_distribution(const std::vector<std::vector<double>>& points, const std::vector<double>& probs);

double euclidean(const std::vector<double>& x, const std::vector<double>& y);

/// Exact 1-Wasserstein distance under the Euclidean ground metric, solved
/// as a transportation problem by successive shortest augmenting paths.
/// Throws GuardExceeded when either support exceeds `max_support` points.
double wasserstein(const DiscreteDistribution& mu, const DiscreteDistribution& nu, std::size_t max_support = 4096);

}  // namespace decembed
