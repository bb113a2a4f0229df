#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npsd/dynamics.hpp"
#include "npsd/network.hpp"

namespace npsd {

// Flows at or below this count as unused routes in the equilibrium test.
inline constexpr double kUsedFlowFloor = 1e-9;
inline constexpr double kDefaultAdTol = 1e-6;

struct WardropCheck {
  bool is_ue = false;
  std::vector<double> min_costs;  // pi^w per OD pair
  // Largest C_k - pi^w over used routes.
  double max_excess = 0.0;
};

WardropCheck is_wardrop_ue(const Network& net, const FlowState& f, double epsilon,
                           double flow_floor = kUsedFlowFloor);

// Beckmann potential sum_a integral_0^{v_a} c_a(y) dy for BPR costs:
// t0 * v + 0.03 * t0 * v^5 / O^4.
double lyapunov_value(const Network& net, const FlowState& f);
double lyapunov_from_link_flows(const Network& net, std::span<const double> link_flow);

// sum_k C_k^t (f_k^{t+1} - f_k^t).
double rbap_descent_value(std::span<const double> costs, std::span<const double> f_now,
                          std::span<const double> f_next);

// The same sum with each OD pair's costs taken relative to its cheapest
// route. Equal to the plain sum whenever demand is conserved, but free of the
// rounding left in the per-OD totals.
double rbap_descent_value(const Network& net, std::span<const double> costs,
                          std::span<const double> f_now, std::span<const double> f_next);

// Mean Euclidean distance to `reference` over the last `cycle` states.
double ad_index(std::span<const FlowState> states, const FlowState& reference, std::size_t cycle);
double ad_index(const TrajectoryRecord& traj, const FlowState& reference, std::size_t cycle);

enum class PhaseLabel { Stable, MetaStable, Unstable };

const char* to_string(PhaseLabel p);
PhaseLabel parse_phase_label(const std::string& s);

// Capacity-reduction descriptor of one sweep cell. An empty link means no
// reduction.
struct CapSetting {
  std::string link;
  double fraction = 0.0;

  friend auto operator<=>(const CapSetting&, const CapSetting&) = default;
};

struct SweepCellResult {
  double theta = 0.0;
  CapSetting cap;
  TerminationVerdict termination;
  double ad = 0.0;
  std::optional<std::size_t> days_to_converge;
  std::optional<std::string> error;
};

// STABLE when every cell of a theta group has ad <= ad_tol, UNSTABLE when
// every cell exceeds it, META_STABLE otherwise. Throws std::invalid_argument
// when a group misses part of the capacity grid or holds a failed cell.
std::map<double, PhaseLabel> classify_phase(std::span<const SweepCellResult> cells,
                                            double ad_tol = kDefaultAdTol);

struct UeSolution {
  FlowState flows;
  std::vector<double> link_flows;
  double relative_gap = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// (sum_k C_k f_k - sum_w d^w pi^w) / sum_k C_k f_k.
double relative_gap(const Network& net, std::span<const double> route_flows);

// Independent equilibrium solver: path-based gradient projection with an
// exact line search on the Beckmann potential, started from an
// all-or-nothing assignment at free-flow costs. Does not throw when the
// iteration limit is reached; check `converged`.
UeSolution solve_ue_oracle(const Network& net, double rel_gap_tol, std::size_t max_iters);

}  // namespace npsd
