// Times run_sweep_serial against the OpenMP run_sweep on the example SCR grid.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>

#include "npsd/scenarios.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

template <class F>
double seconds(F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_cells(const npsd::SweepResult& a, const npsd::SweepResult& b) {
  if (a.cells.size() != b.cells.size() || a.phases != b.phases) return false;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto& x = a.cells[i];
    const auto& y = b.cells[i];
    if (x.theta != y.theta || x.cap != y.cap || x.termination.kind != y.termination.kind ||
        x.termination.day != y.termination.day || x.ad != y.ad || x.error != y.error)
      return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs parallel sweep benchmark"};
  int jobs = 0;
  std::size_t thetas = 10;
  std::size_t caps = 9;
  std::size_t days = 2000;
  app.add_option("--jobs", jobs, "Threads for the parallel run (0: all)");
  app.add_option("--thetas", thetas, "Theta grid size")->capture_default_str();
  app.add_option("--caps", caps, "Cap grid size")->capture_default_str();
  app.add_option("--days", days, "Days per trajectory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (jobs <= 0) jobs = omp_get_max_threads();
#else
  if (jobs <= 0) jobs = 1;
#endif

  auto net = npsd::build_example_network();
  const auto ue = npsd::solve_ue_oracle(net, 1e-14, 100000);
  npsd::ScenarioSpec spec{net, {{"11", 0.0, 0, 0}}, {}, {}, {}, {}, ue.flows, 2, npsd::kDefaultAdTol};
  for (std::size_t i = 1; i <= thetas; ++i) spec.theta_grid.push_back(0.3 * static_cast<double>(i) / static_cast<double>(thetas));
  for (std::size_t i = 1; i <= caps; ++i) spec.cap_grid.push_back(0.9 * static_cast<double>(i) / static_cast<double>(caps));
  spec.protocol.theta = 0.1;
  spec.stepper.max_days = days;
  spec.stepper.stop_on_convergence = false;

  npsd::SweepResult serial, parallel;
  const double ts = seconds([&] { serial = npsd::run_sweep_serial(spec); });
  const double tp = seconds([&] { parallel = npsd::run_sweep(spec, jobs); });

  std::printf("cells      %zu\n", serial.cells.size());
  std::printf("serial     %.3f s\n", ts);
  std::printf("parallel   %.3f s (%d threads)\n", tp, jobs);
  std::printf("speedup    %.2fx\n", ts / tp);
  std::printf("identical  %s\n", same_cells(serial, parallel) ? "yes" : "NO");
  return same_cells(serial, parallel) ? 0 : 1;
}
