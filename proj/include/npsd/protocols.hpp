#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "npsd/network.hpp"

namespace npsd {

enum class ProtocolVariant {
  Npsd,      // nonlinear pairwise swapping
  PapFixed,  // proportional switch, constant kappa
  PapHe,     // proportional switch, kappa from pairwise cost spread plus reluctance H
};

const char* to_string(ProtocolVariant v);
ProtocolVariant parse_protocol_variant(const std::string& s);

struct ProtocolParams {
  ProtocolVariant variant = ProtocolVariant::Npsd;
  // Reaction sensitivity. `theta` applies to every OD pair unless the pair has
  // an entry in `theta_by_od`.
  std::optional<double> theta;
  std::map<std::string, double> theta_by_od;
  double kappa = 0.0;
  double reluctance = 0.0;
  double cost_epsilon = 0.0;

  double theta_for(const std::string& od_id) const;

  // Throws std::invalid_argument on the first broken invariant for `net`.
  void check(const Network& net) const;

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

// Swap proportions for one OD pair: rates[i * n + j] is the share of route
// routes[i]'s flow moving to routes[j].
struct SwapBlock {
  std::vector<std::size_t> routes;
  std::vector<double> rates;
  std::vector<double> row_sums;
  std::vector<bool> over_swapping;

  std::size_t size() const noexcept { return routes.size(); }
  double at(std::size_t i, std::size_t j) const { return rates[i * routes.size() + j]; }
};

class SwapMatrix {
 public:
  SwapMatrix() = default;
  explicit SwapMatrix(std::vector<SwapBlock> blocks) : blocks_(std::move(blocks)) {}

  std::span<const SwapBlock> blocks() const noexcept { return blocks_; }
  const SwapBlock& block(std::size_t w) const { return blocks_.at(w); }

  // rho_{kp} by route index; 0 when k and p belong to different OD pairs.
  double rate(const Network& net, std::size_t k, std::size_t p) const;

  bool any_over_swapping() const noexcept;
  // Route index of the first over-swapping row (in OD, then route order).
  std::optional<std::size_t> first_over_swapping_route() const;

 private:
  std::vector<SwapBlock> blocks_;
};

// Routes of k's OD pair with cost strictly below C_k - epsilon.
std::vector<std::size_t> candidate_set(const Network& net, std::size_t k,
                                       std::span<const double> costs, double epsilon = 0.0);

double npsd_rate(const Network& net, std::size_t k, std::size_t p, std::span<const double> costs,
                 const ProtocolParams& params);

// kappa * max(0, C_k - C_p); not bounded by 1.
double pap_rate_fixed(const Network& net, std::size_t k, std::size_t p,
                      std::span<const double> costs, const ProtocolParams& params);

// 1 / (B * M) with M the number of routes in `net`.
double smith_wisten_kappa_bound(const Network& net, double cost_upper_bound);

// 1 / (sum over ordered pairs (p, k) of max(0, C_p - C_k) + H) for the costs
// of a single OD pair.
double pap_kappa_he(std::span<const double> od_costs, double reluctance);

SwapMatrix swap_matrix(const Network& net, std::span<const double> costs,
                       const ProtocolParams& params);

// Sum of a small set of terms in ascending order, so the result does not
// depend on the order the terms were produced in.
double ordered_sum(std::span<double> terms);

}  // namespace npsd
