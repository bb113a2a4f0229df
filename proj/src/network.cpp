#include "npsd/network.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace npsd {

namespace {

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    std::ostringstream os;
    os << what << ": expected " << want << " entries, got " << got;
    throw std::invalid_argument(os.str());
  }
}

std::string join_messages(const std::vector<Violation>& vs) {
  std::ostringstream os;
  os << "invalid network";
  for (const auto& v : vs) os << "; " << v.entity << ": " << v.message;
  return os.str();
}

}  // namespace

std::vector<Violation> validate(const NetworkData& data) {
  std::vector<Violation> out;

  std::unordered_set<std::string> link_ids;
  for (const auto& l : data.links) {
    const std::string who = "link " + l.id;
    if (l.id.empty()) out.push_back({who, "empty identifier"});
    if (!link_ids.insert(l.id).second) out.push_back({who, "duplicate link id"});
    if (!(std::isfinite(l.free_flow_time) && l.free_flow_time > 0.0))
      out.push_back({who, "free_flow_time must be > 0"});
    if (!(std::isfinite(l.capacity) && l.capacity > 0.0))
      out.push_back({who, "capacity must be > 0"});
  }

  std::unordered_set<std::string> od_ids;
  for (const auto& w : data.od_pairs) {
    const std::string who = "od_pair " + w.id;
    if (w.id.empty()) out.push_back({who, "empty identifier"});
    if (!od_ids.insert(w.id).second) out.push_back({who, "duplicate od_pair id"});
    if (!(std::isfinite(w.demand) && w.demand >= 0.0))
      out.push_back({who, "demand must be >= 0"});
  }

  std::unordered_set<std::string> route_ids;
  std::unordered_set<std::string> served;
  for (const auto& r : data.routes) {
    const std::string who = "route " + r.id;
    if (r.id.empty()) out.push_back({who, "empty identifier"});
    if (!route_ids.insert(r.id).second) out.push_back({who, "duplicate route id"});
    if (od_ids.count(r.od_pair) == 0)
      out.push_back({who, "unknown od_pair '" + r.od_pair + "'"});
    else
      served.insert(r.od_pair);
    if (r.links.empty()) out.push_back({who, "route has no links"});
    std::unordered_set<std::string> seen;
    for (const auto& lid : r.links) {
      if (link_ids.count(lid) == 0) out.push_back({who, "unknown link '" + lid + "'"});
      if (!seen.insert(lid).second) out.push_back({who, "link '" + lid + "' listed twice"});
    }
  }

  for (const auto& w : data.od_pairs) {
    if (served.count(w.id) == 0) out.push_back({"od_pair " + w.id, "no route serves this OD pair"});
  }
  return out;
}

InvalidNetwork::InvalidNetwork(std::vector<Violation> violations)
    : std::invalid_argument(join_messages(violations)), violations_(std::move(violations)) {}

Network::Network(NetworkData data) : data_(std::move(data)) {
  if (auto vs = validate(data_); !vs.empty()) throw InvalidNetwork(std::move(vs));

  for (std::size_t a = 0; a < data_.links.size(); ++a) link_by_id_.emplace(data_.links[a].id, a);
  for (std::size_t w = 0; w < data_.od_pairs.size(); ++w) od_by_id_.emplace(data_.od_pairs[w].id, w);

  od_routes_.resize(data_.od_pairs.size());
  route_links_.resize(data_.routes.size());
  route_od_.resize(data_.routes.size());
  for (std::size_t k = 0; k < data_.routes.size(); ++k) {
    const auto& r = data_.routes[k];
    route_by_id_.emplace(r.id, k);
    const std::size_t w = od_by_id_.at(r.od_pair);
    route_od_[k] = w;
    od_routes_[w].push_back(k);
    for (const auto& lid : r.links) route_links_[k].push_back(link_by_id_.at(lid));
  }
}

std::size_t Network::link_index(const std::string& id) const {
  auto it = link_by_id_.find(id);
  if (it == link_by_id_.end()) throw std::out_of_range("unknown link id '" + id + "'");
  return it->second;
}

std::size_t Network::route_index(const std::string& id) const {
  auto it = route_by_id_.find(id);
  if (it == route_by_id_.end()) throw std::out_of_range("unknown route id '" + id + "'");
  return it->second;
}

std::size_t Network::od_index(const std::string& id) const {
  auto it = od_by_id_.find(id);
  if (it == od_by_id_.end()) throw std::out_of_range("unknown od_pair id '" + id + "'");
  return it->second;
}

Network Network::with_capacity_factor(std::size_t link, double factor) const {
  if (link >= data_.links.size()) throw std::out_of_range("link index out of range");
  NetworkData copy = data_;
  copy.links[link].capacity *= factor;
  return Network(std::move(copy));
}

std::vector<std::string> feasibility_violations(const Network& net, const FlowState& f, double tol) {
  std::vector<std::string> out;
  if (f.flows.size() != net.route_count()) {
    out.push_back("flow vector has " + std::to_string(f.flows.size()) + " entries, network has " +
                  std::to_string(net.route_count()) + " routes");
    return out;
  }
  for (std::size_t k = 0; k < f.flows.size(); ++k) {
    if (!(f.flows[k] >= 0.0) || !std::isfinite(f.flows[k])) {
      std::ostringstream os;
      os.precision(12);
      os << "route " << net.routes()[k].id << " has negative or non-finite flow " << f.flows[k];
      out.push_back(os.str());
    }
  }
  for (std::size_t w = 0; w < net.od_count(); ++w) {
    double total = 0.0;
    for (std::size_t k : net.od_routes(w)) total += f.flows[k];
    const double demand = net.od_pairs()[w].demand;
    if (!(std::abs(total - demand) <= tol)) {
      std::ostringstream os;
      os.precision(12);
      os << "od_pair " << net.od_pairs()[w].id << " carries " << total << " but demand is "
         << demand;
      out.push_back(os.str());
    }
  }
  return out;
}

bool is_feasible(const Network& net, const FlowState& f, double tol) {
  return feasibility_violations(net, f, tol).empty();
}

std::vector<double> link_flows(const Network& net, std::span<const double> route_flows) {
  require_size(route_flows.size(), net.route_count(), "link_flows");
  std::vector<double> v(net.link_count(), 0.0);
  for (std::size_t k = 0; k < route_flows.size(); ++k) {
    for (std::size_t a : net.route_links(k)) v[a] += route_flows[k];
  }
  return v;
}

std::vector<double> link_costs(const Network& net, std::span<const double> link_flow) {
  require_size(link_flow.size(), net.link_count(), "link_costs");
  std::vector<double> c(link_flow.size());
  const auto links = net.links();
  for (std::size_t a = 0; a < c.size(); ++a) {
    const double v = link_flow[a];
    if (!(v >= 0.0)) {
      std::ostringstream os;
      os << "link_costs: negative flow " << v << " on link " << links[a].id;
      throw std::domain_error(os.str());
    }
    const double x = v / links[a].capacity;
    const double x2 = x * x;
    c[a] = links[a].free_flow_time * (1.0 + kBprAlpha * x2 * x2);
  }
  return c;
}

std::vector<double> link_cost_derivatives(const Network& net, std::span<const double> link_flow) {
  require_size(link_flow.size(), net.link_count(), "link_cost_derivatives");
  std::vector<double> d(link_flow.size());
  const auto links = net.links();
  for (std::size_t a = 0; a < d.size(); ++a) {
    const double cap = links[a].capacity;
    const double x = link_flow[a] / cap;
    d[a] = links[a].free_flow_time * 4.0 * kBprAlpha * x * x * x / cap;
  }
  return d;
}

std::vector<double> route_costs(const Network& net, std::span<const double> link_cost) {
  require_size(link_cost.size(), net.link_count(), "route_costs");
  std::vector<double> C(net.route_count(), 0.0);
  for (std::size_t k = 0; k < C.size(); ++k) {
    for (std::size_t a : net.route_links(k)) C[k] += link_cost[a];
  }
  return C;
}

std::vector<double> route_costs_at(const Network& net, std::span<const double> route_flows) {
  const auto v = link_flows(net, route_flows);
  const auto c = link_costs(net, v);
  return route_costs(net, c);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  require_size(b.size(), a.size(), "euclidean_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace npsd
