#include "decembed/wasserstein.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "decembed/oracle.hpp"

namespace decembed {

double euclidean(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("euclidean: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s);
}

DiscreteDistribution make_distribution(const std::vector<std::vector<double>>& points, const std::vector<double>& probs) {
  if (points.size() != probs.size()) throw std::invalid_argument("distribution: support and probabilities differ in size");
  if (points.empty()) throw std::invalid_argument("distribution: empty support");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("distribution: negative or non-finite probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("distribution: probabilities sum to " + std::to_string(total));
  DiscreteDistribution d;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != points.front().size()) throw std::invalid_argument("distribution: dimension mismatch");
    if (probs[k] == 0.0) continue;
    bool merged = false;
    for (std::size_t j = 0; j < d.support.size(); ++j)
      if (euclidean(d.support[j], points[k]) <= 1e-12) {
        d.probs[j] += probs[k];
        merged = true;
        break;
      }
    if (!merged) {
      d.support.push_back(points[k]);
      d.probs.push_back(probs[k]);
    }
  }
  return d;
}

namespace {

struct Arc {
  int to;
  int rev;
  double cap;
  double cost;
};

class FlowNetwork {
 public:
  explicit FlowNetwork(int n) : adj_(static_cast<std::size_t>(n)) {}
  void add(int from, int to, double cap, double cost) {
    adj_[static_cast<std::size_t>(from)].push_back({to, static_cast<int>(adj_[static_cast<std::size_t>(to)].size()), cap, cost});
    adj_[static_cast<std::size_t>(to)].push_back({from, static_cast<int>(adj_[static_cast<std::size_t>(from)].size()) - 1, 0.0, -cost});
  }

  /// Sends up to `amount` from s to t along successive cheapest paths.
  double min_cost(int s, int t, double amount) {
    constexpr double kZero = 1e-15;
    const std::size_t n = adj_.size();
    double cost = 0.0;
    while (amount > kZero) {
      std::vector<double> dist(n, std::numeric_limits<double>::infinity());
      std::vector<int> prev_node(n, -1), prev_arc(n, -1);
      dist[static_cast<std::size_t>(s)] = 0.0;
      for (std::size_t round = 0; round + 1 < n; ++round) {
        bool changed = false;
        for (std::size_t u = 0; u < n; ++u) {
          if (dist[u] == std::numeric_limits<double>::infinity()) continue;
          for (std::size_t k = 0; k < adj_[u].size(); ++k) {
            const Arc& a = adj_[u][k];
            if (a.cap <= kZero) continue;
            const double nd = dist[u] + a.cost;
            if (nd < dist[static_cast<std::size_t>(a.to)] - 1e-14) {
              dist[static_cast<std::size_t>(a.to)] = nd;
              prev_node[static_cast<std::size_t>(a.to)] = static_cast<int>(u);
              prev_arc[static_cast<std::size_t>(a.to)] = static_cast<int>(k);
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (prev_node[static_cast<std::size_t>(t)] < 0) break;
      double push = amount;
      for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)]) {
        const Arc& a = adj_[static_cast<std::size_t>(prev_node[static_cast<std::size_t>(v)])]
                           [static_cast<std::size_t>(prev_arc[static_cast<std::size_t>(v)])];
        push = std::min(push, a.cap);
      }
      for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)]) {
        Arc& a = adj_[static_cast<std::size_t>(prev_node[static_cast<std::size_t>(v)])]
                     [static_cast<std::size_t>(prev_arc[static_cast<std::size_t>(v)])];
        a.cap -= push;
        adj_[static_cast<std::size_t>(v)][static_cast<std::size_t>(a.rev)].cap += push;
        cost += push * a.cost;
      }
      amount -= push;
    }
    return cost;
  }

 private:
  std::vector<std::vector<Arc>> adj_;
};

}  // namespace

double wasserstein(const DiscreteDistribution& mu, const DiscreteDistribution& nu, std::size_t max_support) {
  const std::size_t m = mu.support.size(), n = nu.support.size();
  if (m == 0 || n == 0) throw std::invalid_argument("wasserstein: empty distribution");
  if (std::max(m, n) > max_support)
    throw GuardExceeded("wasserstein support size", static_cast<double>(std::max(m, n)), static_cast<double>(max_support));
  if (m == 1 || n == 1) {
    // Only one transport plan exists.
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c += (m == 1 ? nu.probs[j] : mu.probs[i]) * euclidean(mu.support[i], nu.support[j]);
    return c;
  }
  const int source = 0, sink = static_cast<int>(m + n) + 1;
  FlowNetwork net(static_cast<int>(m + n) + 2);
  double total_mu = 0.0, total_nu = 0.0;
  for (double p : mu.probs) total_mu += p;
  for (double p : nu.probs) total_nu += p;
  for (std::size_t i = 0; i < m; ++i) net.add(source, static_cast<int>(1 + i), mu.probs[i] / total_mu, 0.0);
  for (std::size_t j = 0; j < n; ++j) net.add(static_cast<int>(1 + m + j), sink, nu.probs[j] / total_nu, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      net.add(static_cast<int>(1 + i), static_cast<int>(1 + m + j), 2.0, euclidean(mu.support[i], nu.support[j]));
  return net.min_cost(source, sink, 1.0);
}

}  // namespace decembed
