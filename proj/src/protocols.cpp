#include "npsd/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace npsd {

namespace {

void require_same_od(const Network& net, std::size_t k, std::size_t p, std::size_t n_costs) {
  if (k >= net.route_count() || p >= net.route_count())
    throw std::out_of_range("route index out of range");
  if (n_costs != net.route_count())
    throw std::invalid_argument("cost vector does not match the network's routes");
  if (net.route_od(k) != net.route_od(p))
    throw std::invalid_argument("routes " + net.routes()[k].id + " and " + net.routes()[p].id +
                                " belong to different OD pairs");
}

bool is_candidate(double cost_from, double cost_to, double epsilon) {
  return cost_to < cost_from - epsilon;
}

}  // namespace

const char* to_string(ProtocolVariant v) {
  switch (v) {
    case ProtocolVariant::Npsd: return "npsd";
    case ProtocolVariant::PapFixed: return "pap_fixed";
    case ProtocolVariant::PapHe: return "pap_he";
  }
  return "?";
}

ProtocolVariant parse_protocol_variant(const std::string& s) {
  if (s == "npsd") return ProtocolVariant::Npsd;
  if (s == "pap_fixed") return ProtocolVariant::PapFixed;
  if (s == "pap_he") return ProtocolVariant::PapHe;
  throw std::invalid_argument("unknown protocol variant '" + s + "'");
}

double ProtocolParams::theta_for(const std::string& od_id) const {
  if (auto it = theta_by_od.find(od_id); it != theta_by_od.end()) return it->second;
  if (theta) return *theta;
  throw std::invalid_argument("no theta configured for od_pair '" + od_id + "'");
}

void ProtocolParams::check(const Network& net) const {
  if (!(cost_epsilon >= 0.0)) throw std::invalid_argument("cost_epsilon must be >= 0");
  switch (variant) {
    case ProtocolVariant::Npsd:
      for (const auto& w : net.od_pairs()) {
        const double t = theta_for(w.id);
        if (!(t > 0.0) || !std::isfinite(t))
          throw std::invalid_argument("theta for od_pair '" + w.id + "' must be > 0");
      }
      break;
    case ProtocolVariant::PapFixed:
      if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be > 0");
      break;
    case ProtocolVariant::PapHe:
      if (!(reluctance > 0.0) || !std::isfinite(reluctance))
        throw std::invalid_argument("reluctance H must be > 0");
      break;
  }
}

double SwapMatrix::rate(const Network& net, std::size_t k, std::size_t p) const {
  const std::size_t w = net.route_od(k);
  if (net.route_od(p) != w) return 0.0;
  const auto& b = blocks_.at(w);
  const auto i = static_cast<std::size_t>(std::find(b.routes.begin(), b.routes.end(), k) - b.routes.begin());
  const auto j = static_cast<std::size_t>(std::find(b.routes.begin(), b.routes.end(), p) - b.routes.begin());
  return b.at(i, j);
}

bool SwapMatrix::any_over_swapping() const noexcept {
  for (const auto& b : blocks_)
    if (std::find(b.over_swapping.begin(), b.over_swapping.end(), true) != b.over_swapping.end())
      return true;
  return false;
}

std::optional<std::size_t> SwapMatrix::first_over_swapping_route() const {
  for (const auto& b : blocks_)
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b.over_swapping[i]) return b.routes[i];
  return std::nullopt;
}

double ordered_sum(std::span<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

std::vector<std::size_t> candidate_set(const Network& net, std::size_t k,
                                       std::span<const double> costs, double epsilon) {
  if (k >= net.route_count() || k >= costs.size())
    throw std::out_of_range("candidate_set: route index out of range");
  if (costs.size() != net.route_count())
    throw std::invalid_argument("candidate_set: cost vector does not match the network's routes");
  std::vector<std::size_t> out;
  for (std::size_t p : net.od_routes(net.route_od(k)))
    if (p != k && is_candidate(costs[k], costs[p], epsilon)) out.push_back(p);
  return out;
}

double npsd_rate(const Network& net, std::size_t k, std::size_t p, std::span<const double> costs,
                 const ProtocolParams& params) {
  if (params.variant != ProtocolVariant::Npsd)
    throw std::invalid_argument("npsd_rate requires the npsd variant");
  require_same_od(net, k, p, costs.size());
  const double theta = params.theta_for(net.od_pairs()[net.route_od(k)].id);
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be > 0");

  const auto cands = candidate_set(net, k, costs, params.cost_epsilon);
  if (std::find(cands.begin(), cands.end(), p) == cands.end()) return 0.0;
  const double n = static_cast<double>(cands.size());
  return std::max(0.0, -std::expm1(-theta * (costs[k] - costs[p])) / n);
}

double pap_rate_fixed(const Network& net, std::size_t k, std::size_t p,
                      std::span<const double> costs, const ProtocolParams& params) {
  if (params.variant != ProtocolVariant::PapFixed)
    throw std::invalid_argument("pap_rate_fixed requires the pap_fixed variant");
  require_same_od(net, k, p, costs.size());
  if (!(params.kappa > 0.0)) throw std::invalid_argument("kappa must be > 0");
  if (!is_candidate(costs[k], costs[p], params.cost_epsilon)) return 0.0;
  return params.kappa * std::max(0.0, costs[k] - costs[p]);
}

double smith_wisten_kappa_bound(const Network& net, double cost_upper_bound) {
  if (!(cost_upper_bound > 0.0)) throw std::invalid_argument("cost upper bound B must be > 0");
  if (net.route_count() == 0) throw std::invalid_argument("network has no routes");
  return 1.0 / (cost_upper_bound * static_cast<double>(net.route_count()));
}

double pap_kappa_he(std::span<const double> od_costs, double reluctance) {
  if (!(reluctance > 0.0)) throw std::invalid_argument("reluctance H must be > 0");
  double spread = 0.0;
  for (double cp : od_costs)
    for (double ck : od_costs) spread += std::max(0.0, cp - ck);
  return 1.0 / (spread + reluctance);
}

SwapMatrix swap_matrix(const Network& net, std::span<const double> costs,
                       const ProtocolParams& params) {
  if (costs.size() != net.route_count())
    throw std::invalid_argument("swap_matrix: cost vector does not match the network's routes");
  params.check(net);

  std::vector<SwapBlock> blocks(net.od_count());
  std::vector<double> scratch;
  for (std::size_t w = 0; w < net.od_count(); ++w) {
    auto& b = blocks[w];
    const auto routes = net.od_routes(w);
    const std::size_t n = routes.size();
    b.routes.assign(routes.begin(), routes.end());
    b.rates.assign(n * n, 0.0);
    b.row_sums.assign(n, 0.0);
    b.over_swapping.assign(n, false);

    double kappa = params.kappa;
    double theta = 0.0;
    if (params.variant == ProtocolVariant::PapHe) {
      scratch.clear();
      for (std::size_t k : routes) scratch.push_back(costs[k]);
      kappa = pap_kappa_he(scratch, params.reluctance);
    } else if (params.variant == ProtocolVariant::Npsd) {
      theta = params.theta_for(net.od_pairs()[w].id);
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double ck = costs[routes[i]];
      std::size_t n_cand = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && is_candidate(ck, costs[routes[j]], params.cost_epsilon)) ++n_cand;
      if (n_cand == 0) continue;

      double* row = &b.rates[i * n];
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !is_candidate(ck, costs[routes[j]], params.cost_epsilon)) continue;
        const double gap = ck - costs[routes[j]];
        if (params.variant == ProtocolVariant::Npsd)
          row[j] = std::max(0.0, -std::expm1(-theta * gap) / static_cast<double>(n_cand));
        else
          row[j] = kappa * std::max(0.0, gap);
      }

      scratch.assign(row, row + n);
      double sum = ordered_sum(scratch);
      if (params.variant == ProtocolVariant::Npsd) {
        // Each term is at most 1/|R_k|; rounding can still push the sum an ulp past 1.
        while (sum > 1.0) {
          for (std::size_t j = 0; j < n; ++j) row[j] *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
          scratch.assign(row, row + n);
          sum = ordered_sum(scratch);
        }
      }
      b.row_sums[i] = sum;
      b.over_swapping[i] = sum > 1.0;
    }
  }
  return SwapMatrix(std::move(blocks));
}

}  // namespace npsd
