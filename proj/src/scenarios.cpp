#include "npsd/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace npsd {

namespace {

struct ExampleLink {
  const char* id;
  double free_flow_time;
  double capacity;
};

// Calibrated so that the equilibrium sits near f = (20, 20, 25, 25, 25, 25,
// 20, 20) with route costs close to 20 min at demand 90 per OD pair.
constexpr ExampleLink kExampleLinks[] = {
    {"1", 2.26, 47.6},   {"2", 2.26, 50.2},   {"3", 2.26, 50.2},   {"4", 2.26, 47.6},
    {"5", 13.72, 21.6},  {"6", 14.53, 35.5},  {"7", 14.53, 35.5},  {"8", 13.72, 21.6},
    {"9", 2.25, 26.5},   {"10", 2.26, 63.8},  {"11", 2.26, 91.4},  {"12", 2.26, 63.8},
    {"13", 2.25, 26.5},  {"14", 14.91, 33.1}, {"15", 14.72, 38.2}, {"16", 14.72, 38.2},
    {"17", 14.91, 33.1},
};

SweepCellResult score_cell(const ScenarioSpec& spec, double theta, double cap) {
  SweepCellResult cell;
  cell.theta = theta;
  cell.cap = CapSetting{reduction_label(spec.reductions), cap};
  try {
    cell = run_scenario(spec, theta, cap);
  } catch (const std::exception& e) {
    cell.error = e.what();
    cell.ad = std::numeric_limits<double>::quiet_NaN();
  }
  return cell;
}

std::vector<std::pair<double, double>> grid_points(const ScenarioSpec& spec) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(spec.theta_grid.size() * spec.cap_grid.size());
  for (double t : spec.theta_grid)
    for (double c : spec.cap_grid) pts.emplace_back(t, c);
  return pts;
}

void check_strictly_increasing(const std::vector<double>& g, const char* what) {
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1])) throw std::invalid_argument(std::string(what) + " is not strictly increasing");
}

}  // namespace

Network build_example_network() {
  NetworkData data;
  for (const auto& l : kExampleLinks) data.links.push_back({l.id, l.free_flow_time, l.capacity});
  data.od_pairs = {{"1", "1", "11", 90.0}, {"2", "2", "12", 90.0}};
  data.routes = {
      {"1", "1", {"1", "9", "14"}},  {"2", "1", {"1", "5", "10"}},
      {"3", "1", {"2", "6", "10"}},  {"4", "1", {"2", "11", "15"}},
      {"5", "2", {"3", "11", "16"}}, {"6", "2", {"3", "7", "12"}},
      {"7", "2", {"4", "8", "12"}},  {"8", "2", {"4", "13", "17"}},
  };
  return Network(std::move(data));
}

const std::vector<std::size_t>& example_route_mirror() {
  static const std::vector<std::size_t> m = {7, 6, 5, 4, 3, 2, 1, 0};
  return m;
}

const std::vector<std::size_t>& example_link_mirror() {
  // 1<->4, 2<->3, 5<->8, 6<->7, 9<->13, 10<->12, 11, 14<->17, 15<->16
  static const std::vector<std::size_t> m = {3, 2, 1, 0, 7, 6, 5, 4, 12, 11, 10, 9, 8, 16, 15, 14, 13};
  return m;
}

Network apply_reduction(const Network& net, const std::string& link, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("capacity reduction fraction must lie in [0, 1)");
  return net.with_capacity_factor(net.link_index(link), 1.0 - fraction);
}

void ScenarioSpec::check() const {
  for (const auto& r : reductions) {
    network.link_index(r.link);
    if (!(r.fraction >= 0.0 && r.fraction < 1.0))
      throw std::invalid_argument("reduction fraction must lie in [0, 1)");
  }
  check_strictly_increasing(theta_grid, "theta_grid");
  check_strictly_increasing(cap_grid, "cap_grid");
  for (double t : theta_grid)
    if (!(t > 0.0)) throw std::invalid_argument("theta_grid values must be > 0");
  for (double c : cap_grid)
    if (!(c >= 0.0 && c < 1.0)) throw std::invalid_argument("cap_grid values must lie in [0, 1)");
  if (ad_cycle < 1) throw std::invalid_argument("ad_cycle must be >= 1");
  if (stepper.tail_window < ad_cycle)
    throw std::invalid_argument("stepper.tail_window must retain at least ad_cycle states");
  stepper.check();
  if (auto vs = feasibility_violations(network, reference); !vs.empty())
    throw std::invalid_argument("infeasible reference flows: " + vs.front());
}

std::string reduction_label(const std::vector<CapacityReduction>& reductions) {
  std::string s;
  for (const auto& r : reductions) {
    if (!s.empty()) s += '+';
    s += r.link;
  }
  return s;
}

ScenarioRun simulate(const ScenarioSpec& spec, std::optional<double> theta,
                     const std::vector<CapacityReduction>& reductions) {
  ProtocolParams params = spec.protocol;
  if (theta) {
    params.theta = theta;
    params.theta_by_od.clear();
  }

  std::vector<CapacityReduction> active;
  for (const auto& r : reductions)
    if (r.fraction > 0.0) active.push_back(r);

  const NetworkTimeline timeline(spec.network, active);
  ScenarioRun run;
  run.trajectory = run_trajectory(timeline, spec.reference, params, spec.stepper);

  auto& cell = run.cell;
  cell.theta = params.theta.value_or(std::numeric_limits<double>::quiet_NaN());
  cell.cap = CapSetting{reduction_label(reductions), reductions.empty() ? 0.0 : reductions.front().fraction};
  cell.termination = run.trajectory.termination;
  cell.ad = ad_index(run.trajectory, spec.reference, spec.ad_cycle);
  if (cell.termination.kind == Termination::Converged) cell.days_to_converge = cell.termination.day;
  return run;
}

SweepCellResult run_scenario(const ScenarioSpec& spec, double theta, double cap) {
  if (!(cap >= 0.0 && cap < 1.0)) throw std::invalid_argument("cap must lie in [0, 1)");
  std::vector<CapacityReduction> reductions = spec.reductions;
  for (auto& r : reductions) r.fraction = cap;
  auto cell = simulate(spec, theta, reductions).cell;
  cell.cap = CapSetting{reduction_label(spec.reductions), cap};
  return cell;
}

std::map<double, PhaseLabel> classify_sweep(const std::vector<SweepCellResult>& cells, double ad_tol) {
  std::map<double, std::vector<SweepCellResult>> groups;
  for (const auto& c : cells) groups[c.theta].push_back(c);
  std::map<double, PhaseLabel> out;
  for (const auto& [theta, group] : groups) {
    const bool failed = std::any_of(group.begin(), group.end(), [](const auto& c) { return c.error.has_value(); });
    if (failed) continue;
    out.merge(classify_phase(group, ad_tol));
  }
  return out;
}

static void check_sweepable(const ScenarioSpec& spec) {
  spec.check();
  if (spec.theta_grid.empty()) throw std::invalid_argument("theta_grid is empty");
  if (spec.cap_grid.empty()) throw std::invalid_argument("cap_grid is empty");
  if (spec.reductions.empty()) throw std::invalid_argument("sweep needs at least one reduction");
}

SweepResult run_sweep_serial(const ScenarioSpec& spec) {
  check_sweepable(spec);
  SweepResult res;
  for (const auto& [theta, cap] : grid_points(spec)) res.cells.push_back(score_cell(spec, theta, cap));
  res.phases = classify_sweep(res.cells, spec.ad_tol);
  return res;
}

SweepResult run_sweep(const ScenarioSpec& spec, int jobs) {
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  check_sweepable(spec);
  const auto pts = grid_points(spec);
  const auto n = static_cast<std::ptrdiff_t>(pts.size());
  SweepResult res;
  res.cells.resize(pts.size());

#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& [theta, cap] = pts[static_cast<std::size_t>(i)];
    res.cells[static_cast<std::size_t>(i)] = score_cell(spec, theta, cap);
  }

  res.phases = classify_sweep(res.cells, spec.ad_tol);
  return res;
}

}  // namespace npsd
