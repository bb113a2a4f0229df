#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "npsd/network.hpp"
#include "npsd/protocols.hpp"

namespace npsd {

// Raised when a swap matrix would move more than a route's whole flow.
class OverSwappingError : public std::runtime_error {
 public:
  OverSwappingError(std::string route_id, double row_sum);
  const std::string& route_id() const noexcept { return route_id_; }
  double row_sum() const noexcept { return row_sum_; }

 private:
  std::string route_id_;
  double row_sum_;
};

enum class StepMode { Discrete, Euler };

const char* to_string(StepMode m);
StepMode parse_step_mode(const std::string& s);

struct CycleConfig {
  std::size_t period_max = 8;
  double tol = 1e-6;
  std::size_t window = 32;
  std::size_t burn_in = 100;

  friend bool operator==(const CycleConfig&, const CycleConfig&) = default;
};

struct StepperConfig {
  std::size_t max_days = 2000;
  double convergence_tol = 1e-5;
  StepMode mode = StepMode::Discrete;
  double euler_step = 1.0;
  std::size_t record_every = 1;
  // The last `tail_window` states are always recorded.
  std::size_t tail_window = 32;
  // When false the run always continues to max_days and the verdict describes
  // the final state.
  bool stop_on_convergence = true;
  CycleConfig cycle;

  void check() const;

  friend bool operator==(const StepperConfig&, const StepperConfig&) = default;
};

// One-link capacity reduction, multiplicative, active on days
// [first_day, last_day].
struct CapacityReduction {
  std::string link;
  double fraction = 0.0;
  std::size_t first_day = 0;
  std::size_t last_day = 0;

  friend bool operator==(const CapacityReduction&, const CapacityReduction&) = default;
};

// The network in force on each day: the base network with every reduction
// active on that day applied.
class NetworkTimeline {
 public:
  explicit NetworkTimeline(const Network& base, std::vector<CapacityReduction> reductions = {});

  const Network& base() const noexcept { return *base_; }
  const Network& at(std::size_t day) const;

 private:
  const Network* base_;
  std::vector<CapacityReduction> reductions_;
  std::vector<std::size_t> reduction_links_;
  // Reduced networks keyed by the bitmask of active reductions.
  std::vector<std::pair<unsigned long long, Network>> variants_;
};

enum class Termination { Converged, MaxDays, Cycle };

const char* to_string(Termination t);
Termination parse_termination(const std::string& s);

struct TerminationVerdict {
  Termination kind = Termination::MaxDays;
  // Converged: first day of the final run of sub-tolerance steps. Otherwise
  // the final day.
  std::size_t day = 0;
  std::size_t period = 0;
  // Largest ||f^t - f^{t-L}|| over the matched window (cycle only).
  double cycle_residual = 0.0;
};

struct DayDiagnostics {
  std::size_t day = 0;
  std::vector<double> route_costs;
  std::vector<double> link_flows;
  // ||f^{t+1} - f^t|| and sum_k C_k^t (f_k^{t+1} - f_k^t); NaN on the final
  // day, which has no outgoing step.
  double step_norm = 0.0;
  double rbap_value = 0.0;
  double lyapunov_value = 0.0;
};

struct TrajectoryRecord {
  std::vector<FlowState> states;
  std::vector<DayDiagnostics> diagnostics;  // parallel to states
  TerminationVerdict termination;
  StepMode mode = StepMode::Discrete;
  double euler_step = 1.0;
};

// f'_k = f_k + sum_p f_p rho_pk - f_k sum_p rho_kp. Throws OverSwappingError
// when any row of rho sums past 1.
FlowState step_discrete(const Network& net, const FlowState& f, const SwapMatrix& rho);

// f' = f + tau * (inflow - outflow), 0 < tau <= 1.
FlowState step_euler(const Network& net, const FlowState& f, const SwapMatrix& rho, double tau);

struct CycleMatch {
  std::size_t period = 0;
  double residual = 0.0;
};

// Smallest L <= period_max such that ||x_t - x_{t-L}|| <= tol for every t in
// the last 2L samples of the window. Requires window.size() >= 2 * period_max.
std::optional<CycleMatch> detect_cycle(std::span<const std::vector<double>> window,
                                       std::size_t period_max, double tol);

TrajectoryRecord run_trajectory(const NetworkTimeline& timeline, const FlowState& f0,
                                const ProtocolParams& params, const StepperConfig& cfg);

inline TrajectoryRecord run_trajectory(const Network& net, const FlowState& f0,
                                       const ProtocolParams& params, const StepperConfig& cfg) {
  return run_trajectory(NetworkTimeline(net), f0, params, cfg);
}

}  // namespace npsd
