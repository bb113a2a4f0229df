#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npsd/analysis.hpp"
#include "npsd/dynamics.hpp"
#include "npsd/network.hpp"
#include "npsd/protocols.hpp"

namespace npsd {

// The two-OD, eight-route, seventeen-link example network. Link parameters
// are symmetric under the mirror map that swaps the two OD pairs (routes
// 1..4 <-> 8..5); link 11 is the only link shared across OD pairs.
Network build_example_network();

// Mirror image of each route / link of the example network (0-based).
const std::vector<std::size_t>& example_route_mirror();
const std::vector<std::size_t>& example_link_mirror();

// Copy of `net` with the capacity of `link` scaled by (1 - fraction).
Network apply_reduction(const Network& net, const std::string& link, double fraction);

struct ScenarioSpec {
  Network network;
  // Reduction template: link and active days. Sweeps replace each entry's
  // fraction with the capacity-grid value.
  std::vector<CapacityReduction> reductions;
  std::vector<double> theta_grid;
  std::vector<double> cap_grid;
  ProtocolParams protocol;
  StepperConfig stepper;
  // Starting state and AD reference (the pre-disruption equilibrium).
  FlowState reference;
  std::size_t ad_cycle = 2;
  double ad_tol = kDefaultAdTol;

  // Throws std::invalid_argument on a broken invariant.
  void check() const;
};

// Link label of a reduction template, e.g. "11" or "9+11".
std::string reduction_label(const std::vector<CapacityReduction>& reductions);

struct ScenarioRun {
  TrajectoryRecord trajectory;
  SweepCellResult cell;
};

// Starts from spec.reference, applies the reductions (fractions as given) on
// their active days and scores the run against the reference. A given theta
// replaces the protocol's theta for every OD pair.
ScenarioRun simulate(const ScenarioSpec& spec, std::optional<double> theta,
                     const std::vector<CapacityReduction>& reductions);

// One sweep cell: every reduction in the template at fraction `cap`.
SweepCellResult run_scenario(const ScenarioSpec& spec, double theta, double cap);

struct SweepResult {
  std::vector<SweepCellResult> cells;  // sorted by (theta, cap)
  std::map<double, PhaseLabel> phases;
};

// All (theta, cap) cells in parallel over `jobs` OpenMP threads. Output is
// identical for every jobs value.
SweepResult run_sweep(const ScenarioSpec& spec, int jobs);

// Single-threaded reference for run_sweep.
SweepResult run_sweep_serial(const ScenarioSpec& spec);

// Phase per theta for groups with no failed cell.
std::map<double, PhaseLabel> classify_sweep(const std::vector<SweepCellResult>& cells,
                                            double ad_tol);

}  // namespace npsd
