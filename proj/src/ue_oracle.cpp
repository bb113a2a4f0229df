#include <algorithm>
#include <cmath>
#include <limits>

#include "npsd/analysis.hpp"

namespace npsd {

namespace {

// Directional derivative of the Beckmann potential at f + alpha * d.
double potential_slope(const Network& net, std::span<const double> f, std::span<const double> d,
                       double alpha, std::vector<double>& trial) {
  for (std::size_t k = 0; k < f.size(); ++k) trial[k] = std::max(0.0, f[k] + alpha * d[k]);
  const auto C = route_costs_at(net, trial);
  double g = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) g += C[k] * d[k];
  return g;
}

std::vector<double> all_or_nothing_free_flow(const Network& net) {
  const std::vector<double> zero(net.link_count(), 0.0);
  const auto C = route_costs(net, link_costs(net, zero));
  std::vector<double> f(net.route_count(), 0.0);
  for (std::size_t w = 0; w < net.od_count(); ++w) {
    const auto routes = net.od_routes(w);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k : routes) best = std::min(best, C[k]);
    std::size_t ties = 0;
    for (std::size_t k : routes) ties += C[k] == best;
    for (std::size_t k : routes)
      if (C[k] == best) f[k] = net.od_pairs()[w].demand / static_cast<double>(ties);
  }
  return f;
}

}  // namespace

double relative_gap(const Network& net, std::span<const double> route_flows) {
  const auto C = route_costs_at(net, route_flows);
  double total = 0.0;
  double shortest = 0.0;
  for (std::size_t w = 0; w < net.od_count(); ++w) {
    double pi = std::numeric_limits<double>::infinity();
    for (std::size_t k : net.od_routes(w)) {
      pi = std::min(pi, C[k]);
      total += C[k] * route_flows[k];
    }
    shortest += net.od_pairs()[w].demand * pi;
  }
  if (total <= 0.0) return 0.0;
  return (total - shortest) / total;
}

UeSolution solve_ue_oracle(const Network& net, double rel_gap_tol, std::size_t max_iters) {
  if (!(rel_gap_tol >= 0.0)) throw std::invalid_argument("rel_gap_tol must be >= 0");

  std::vector<double> f = all_or_nothing_free_flow(net);
  std::vector<double> d(f.size());
  std::vector<double> trial(f.size());
  std::vector<double> into;
  std::vector<char> on_shortest(net.link_count());

  UeSolution sol;
  std::size_t it = 0;
  double gap = relative_gap(net, f);
  while (gap > rel_gap_tol && it < max_iters) {
    ++it;
    const auto v = link_flows(net, f);
    const auto C = route_costs(net, link_costs(net, v));
    const auto dc = link_cost_derivatives(net, v);
    std::fill(d.begin(), d.end(), 0.0);

    // Newton-scaled shift from every used route onto its OD's shortest route,
    // all OD pairs computed from the same link flows.
    for (std::size_t w = 0; w < net.od_count(); ++w) {
      const auto routes = net.od_routes(w);
      std::size_t s = routes.front();
      for (std::size_t k : routes)
        if (C[k] < C[s]) s = k;
      std::fill(on_shortest.begin(), on_shortest.end(), 0);
      for (std::size_t a : net.route_links(s)) on_shortest[a] = 1;

      into.clear();
      for (std::size_t k : routes) {
        if (k == s || f[k] <= 0.0 || !(C[k] > C[s])) continue;
        double h = 0.0;
        for (std::size_t a : net.route_links(k)) {
          if (on_shortest[a]) on_shortest[a] = 2;
          else h += dc[a];
        }
        for (std::size_t a : net.route_links(s)) {
          if (on_shortest[a] == 1) h += dc[a];
          else on_shortest[a] = 1;
        }
        const double shift = h > 0.0 ? std::min(f[k], (C[k] - C[s]) / h) : f[k];
        d[k] = -shift;
        into.push_back(shift);
      }
      d[s] = ordered_sum(into);
    }

    // Exact line search on [0, 1] along d; the slope is increasing in alpha.
    double alpha = 1.0;
    if (potential_slope(net, f, d, 1.0, trial) > 0.0) {
      double lo = 0.0;
      double hi = 1.0;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (potential_slope(net, f, d, mid, trial) > 0.0) hi = mid;
        else lo = mid;
      }
      alpha = lo;
    }
    if (alpha <= 0.0) break;
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = std::max(0.0, f[k] + alpha * d[k]);
    gap = relative_gap(net, f);
  }

  sol.flows = FlowState{f, 0};
  sol.link_flows = link_flows(net, f);
  sol.relative_gap = gap;
  sol.iterations = it;
  sol.converged = gap <= rel_gap_tol;
  return sol;
}

}  // namespace npsd
