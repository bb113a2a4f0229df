#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace npsd {

// BPR link performance: c = t0 * (1 + 0.15 * (v / O)^4).
inline constexpr double kBprAlpha = 0.15;

// Absolute per-OD tolerance for demand conservation.
inline constexpr double kFeasibilityTol = 1e-9;

struct Link {
  std::string id;
  double free_flow_time = 0.0;  // minutes
  double capacity = 0.0;        // pcu/min
};

struct Route {
  std::string id;
  std::string od_pair;
  std::vector<std::string> links;
};

struct ODPair {
  std::string id;
  std::string origin;
  std::string destination;
  double demand = 0.0;  // pcu/min
};

// Raw, possibly invalid network description as read from a file.
struct NetworkData {
  std::vector<Link> links;
  std::vector<ODPair> od_pairs;
  std::vector<Route> routes;
};

struct Violation {
  std::string entity;  // e.g. "route 4", "od_pair B"
  std::string message;
};

// Empty iff every link/route/OD-pair invariant holds.
std::vector<Violation> validate(const NetworkData& data);

class InvalidNetwork : public std::invalid_argument {
 public:
  explicit InvalidNetwork(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// Immutable path-based network. Route, link and OD-pair indices follow the
// order of the source data; all per-route and per-link vectors use them.
class Network {
 public:
  // Throws InvalidNetwork when validate(data) is nonempty.
  explicit Network(NetworkData data);

  const NetworkData& data() const noexcept { return data_; }
  std::span<const Link> links() const noexcept { return data_.links; }
  std::span<const Route> routes() const noexcept { return data_.routes; }
  std::span<const ODPair> od_pairs() const noexcept { return data_.od_pairs; }

  std::size_t link_count() const noexcept { return data_.links.size(); }
  std::size_t route_count() const noexcept { return data_.routes.size(); }
  std::size_t od_count() const noexcept { return data_.od_pairs.size(); }

  std::size_t link_index(const std::string& id) const;
  std::size_t route_index(const std::string& id) const;
  std::size_t od_index(const std::string& id) const;

  // Link indices used by route k (distinct, in route order).
  std::span<const std::size_t> route_links(std::size_t k) const { return route_links_.at(k); }
  // Route indices belonging to OD pair w, ascending.
  std::span<const std::size_t> od_routes(std::size_t w) const { return od_routes_.at(w); }
  std::size_t route_od(std::size_t k) const { return route_od_.at(k); }

  // Copy with link `link`'s capacity multiplied by `factor`.
  Network with_capacity_factor(std::size_t link, double factor) const;

 private:
  NetworkData data_;
  std::unordered_map<std::string, std::size_t> link_by_id_;
  std::unordered_map<std::string, std::size_t> route_by_id_;
  std::unordered_map<std::string, std::size_t> od_by_id_;
  std::vector<std::vector<std::size_t>> route_links_;
  std::vector<std::vector<std::size_t>> od_routes_;
  std::vector<std::size_t> route_od_;
};

// Path-flow vector indexed by route, stamped with its day.
struct FlowState {
  std::vector<double> flows;
  std::size_t day = 0;

  friend bool operator==(const FlowState&, const FlowState&) = default;
};

// Human-readable list of broken FlowState invariants (negative flow, demand
// mismatch beyond `tol`, wrong dimension). Empty means feasible.
std::vector<std::string> feasibility_violations(const Network& net, const FlowState& f,
                                                double tol = kFeasibilityTol);
bool is_feasible(const Network& net, const FlowState& f, double tol = kFeasibilityTol);

std::vector<double> link_flows(const Network& net, std::span<const double> route_flows);
inline std::vector<double> link_flows(const Network& net, const FlowState& f) {
  return link_flows(net, f.flows);
}

std::vector<double> link_costs(const Network& net, std::span<const double> link_flow);

// d c_a / d v_a for every link.
std::vector<double> link_cost_derivatives(const Network& net, std::span<const double> link_flow);

std::vector<double> route_costs(const Network& net, std::span<const double> link_cost);

// route_costs(link_costs(link_flows(f))).
std::vector<double> route_costs_at(const Network& net, std::span<const double> route_flows);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace npsd
