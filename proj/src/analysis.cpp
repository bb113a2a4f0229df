#include "npsd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace npsd {

WardropCheck is_wardrop_ue(const Network& net, const FlowState& f, double epsilon,
                           double flow_floor) {
  const auto C = route_costs_at(net, f.flows);
  WardropCheck out;
  out.is_ue = true;
  out.min_costs.resize(net.od_count());
  for (std::size_t w = 0; w < net.od_count(); ++w) {
    double pi = std::numeric_limits<double>::infinity();
    for (std::size_t k : net.od_routes(w)) pi = std::min(pi, C[k]);
    out.min_costs[w] = pi;
    for (std::size_t k : net.od_routes(w)) {
      if (f.flows[k] <= flow_floor) continue;
      const double excess = C[k] - pi;
      out.max_excess = std::max(out.max_excess, excess);
      if (excess > epsilon) out.is_ue = false;
    }
  }
  return out;
}

double lyapunov_from_link_flows(const Network& net, std::span<const double> link_flow) {
  if (link_flow.size() != net.link_count())
    throw std::invalid_argument("lyapunov: link-flow vector does not match the network");
  const auto links = net.links();
  double V = 0.0;
  for (std::size_t a = 0; a < link_flow.size(); ++a) {
    const double v = link_flow[a];
    const double t0 = links[a].free_flow_time;
    const double x = v / links[a].capacity;
    const double x2 = x * x;
    // integral of t0 (1 + a y^4 / O^4) dy = t0 v (1 + (a / 5) x^4)
    V += t0 * v * (1.0 + kBprAlpha / 5.0 * x2 * x2);
  }
  return V;
}

double lyapunov_value(const Network& net, const FlowState& f) {
  return lyapunov_from_link_flows(net, link_flows(net, f));
}

double rbap_descent_value(std::span<const double> costs, std::span<const double> f_now,
                          std::span<const double> f_next) {
  if (costs.size() != f_now.size() || f_now.size() != f_next.size())
    throw std::invalid_argument("rbap_descent_value: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) s += costs[k] * (f_next[k] - f_now[k]);
  return s;
}

double rbap_descent_value(const Network& net, std::span<const double> costs,
                          std::span<const double> f_now, std::span<const double> f_next) {
  if (costs.size() != net.route_count() || f_now.size() != costs.size() || f_next.size() != costs.size())
    throw std::invalid_argument("rbap_descent_value: dimension mismatch");
  double s = 0.0;
  for (std::size_t w = 0; w < net.od_count(); ++w) {
    const auto routes = net.od_routes(w);
    double pi = std::numeric_limits<double>::infinity();
    for (std::size_t k : routes) pi = std::min(pi, costs[k]);
    for (std::size_t k : routes) s += (costs[k] - pi) * (f_next[k] - f_now[k]);
  }
  return s;
}

double ad_index(std::span<const FlowState> states, const FlowState& reference, std::size_t cycle) {
  if (cycle < 1) throw std::invalid_argument("ad_index: cycle must be >= 1");
  if (states.size() < cycle)
    throw std::invalid_argument("ad_index: trajectory retains fewer states than the cycle length");
  double total = 0.0;
  for (std::size_t i = states.size() - cycle; i < states.size(); ++i)
    total += euclidean_distance(states[i].flows, reference.flows);
  return total / static_cast<double>(cycle);
}

double ad_index(const TrajectoryRecord& traj, const FlowState& reference, std::size_t cycle) {
  return ad_index(std::span<const FlowState>(traj.states), reference, cycle);
}

const char* to_string(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::Stable: return "STABLE";
    case PhaseLabel::MetaStable: return "META_STABLE";
    case PhaseLabel::Unstable: return "UNSTABLE";
  }
  return "?";
}

PhaseLabel parse_phase_label(const std::string& s) {
  if (s == "STABLE") return PhaseLabel::Stable;
  if (s == "META_STABLE") return PhaseLabel::MetaStable;
  if (s == "UNSTABLE") return PhaseLabel::Unstable;
  throw std::invalid_argument("unknown phase label '" + s + "'");
}

std::map<double, PhaseLabel> classify_phase(std::span<const SweepCellResult> cells, double ad_tol) {
  std::set<CapSetting> grid;
  std::map<double, std::vector<const SweepCellResult*>> groups;
  for (const auto& c : cells) {
    grid.insert(c.cap);
    groups[c.theta].push_back(&c);
  }

  std::map<double, PhaseLabel> out;
  for (const auto& [theta, group] : groups) {
    std::set<CapSetting> seen;
    std::size_t converged = 0;
    for (const auto* c : group) {
      std::ostringstream who;
      who.precision(12);
      who << "theta " << theta << ", cap " << c->cap.link << "@" << c->cap.fraction;
      if (c->error) throw std::invalid_argument("classify_phase: failed cell (" + who.str() + ")");
      if (!seen.insert(c->cap).second)
        throw std::invalid_argument("classify_phase: duplicate cell (" + who.str() + ")");
      if (c->ad <= ad_tol) ++converged;
    }
    if (seen != grid) {
      std::ostringstream os;
      os.precision(12);
      os << "classify_phase: theta " << theta << " covers " << seen.size() << " of " << grid.size()
         << " capacity settings";
      throw std::invalid_argument(os.str());
    }
    if (converged == group.size())
      out[theta] = PhaseLabel::Stable;
    else if (converged == 0)
      out[theta] = PhaseLabel::Unstable;
    else
      out[theta] = PhaseLabel::MetaStable;
  }
  return out;
}

}  // namespace npsd
