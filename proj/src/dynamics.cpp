#include "npsd/dynamics.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "npsd/analysis.hpp"

namespace npsd {

namespace {

std::string over_swap_message(const std::string& route, double row_sum) {
  std::ostringstream os;
  os.precision(12);
  os << "over-swapping on route " << route << ": outgoing swap proportions sum to " << row_sum
     << " > 1";
  return os.str();
}

void check_swap_shape(const Network& net, const FlowState& f, const SwapMatrix& rho) {
  if (f.flows.size() != net.route_count())
    throw std::invalid_argument("flow state does not match the network's routes");
  if (rho.blocks().size() != net.od_count())
    throw std::invalid_argument("swap matrix does not match the network's OD pairs");
  for (std::size_t w = 0; w < net.od_count(); ++w)
    if (rho.block(w).size() != net.od_routes(w).size())
      throw std::invalid_argument("swap matrix block size mismatch for od_pair " +
                                  net.od_pairs()[w].id);
  if (auto k = rho.first_over_swapping_route()) {
    const auto& b = rho.block(net.route_od(*k));
    double sum = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b.routes[i] == *k) sum = b.row_sums[i];
    throw OverSwappingError(net.routes()[*k].id, sum);
  }
}

// f' = f (1 - tau * out) + tau * in, evaluated per OD block.
FlowState apply_swaps(const Network& net, const FlowState& f, const SwapMatrix& rho, double tau) {
  check_swap_shape(net, f, rho);
  FlowState next{std::vector<double>(f.flows.size(), 0.0), f.day + 1};
  std::vector<double> terms;
  for (const auto& b : rho.blocks()) {
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n; ++i) {
      terms.clear();
      for (std::size_t j = 0; j < n; ++j) {
        const double r = b.at(j, i);
        if (r != 0.0) terms.push_back(f.flows[b.routes[j]] * r);
      }
      const double inflow = ordered_sum(terms);
      const std::size_t k = b.routes[i];
      next.flows[k] = f.flows[k] * (1.0 - tau * b.row_sums[i]) + tau * inflow;
    }
  }
  return next;
}

struct Sample {
  FlowState state;
  DayDiagnostics diag;
};

}  // namespace

OverSwappingError::OverSwappingError(std::string route_id, double row_sum)
    : std::runtime_error(over_swap_message(route_id, row_sum)),
      route_id_(std::move(route_id)),
      row_sum_(row_sum) {}

const char* to_string(StepMode m) { return m == StepMode::Discrete ? "discrete" : "euler"; }

StepMode parse_step_mode(const std::string& s) {
  if (s == "discrete") return StepMode::Discrete;
  if (s == "euler") return StepMode::Euler;
  throw std::invalid_argument("unknown stepper mode '" + s + "'");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "CONVERGED";
    case Termination::MaxDays: return "MAX_DAYS";
    case Termination::Cycle: return "CYCLE";
  }
  return "?";
}

Termination parse_termination(const std::string& s) {
  if (s == "CONVERGED") return Termination::Converged;
  if (s == "MAX_DAYS") return Termination::MaxDays;
  if (s == "CYCLE") return Termination::Cycle;
  throw std::invalid_argument("unknown termination '" + s + "'");
}

void StepperConfig::check() const {
  if (max_days < 1) throw std::invalid_argument("max_days must be >= 1");
  if (!(convergence_tol > 0.0)) throw std::invalid_argument("convergence_tol must be > 0");
  if (!(euler_step > 0.0 && euler_step <= 1.0))
    throw std::invalid_argument("euler_step must lie in (0, 1]");
  if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  if (tail_window < 1) throw std::invalid_argument("tail_window must be >= 1");
  if (cycle.period_max < 1) throw std::invalid_argument("cycle.period_max must be >= 1");
  if (cycle.window < 2 * cycle.period_max)
    throw std::invalid_argument("cycle.window must be >= 2 * cycle.period_max");
  if (!(cycle.tol > 0.0)) throw std::invalid_argument("cycle.tol must be > 0");
}

NetworkTimeline::NetworkTimeline(const Network& base, std::vector<CapacityReduction> reductions)
    : base_(&base), reductions_(std::move(reductions)) {
  if (reductions_.size() > 64) throw std::invalid_argument("at most 64 capacity reductions");
  for (const auto& r : reductions_) {
    if (!(r.fraction >= 0.0 && r.fraction < 1.0))
      throw std::invalid_argument("capacity reduction fraction must lie in [0, 1)");
    if (r.last_day < r.first_day)
      throw std::invalid_argument("capacity reduction day range is empty");
    reduction_links_.push_back(base.link_index(r.link));
  }
  // The active set only changes on a first day or the day after a last day.
  std::vector<std::size_t> change_days;
  for (const auto& r : reductions_) {
    change_days.push_back(r.first_day);
    change_days.push_back(r.last_day + 1);
  }
  for (std::size_t day : change_days) {
    unsigned long long mask = 0;
    for (std::size_t i = 0; i < reductions_.size(); ++i)
      if (reductions_[i].first_day <= day && day <= reductions_[i].last_day) mask |= 1ULL << i;
    if (mask == 0) continue;
    bool known = false;
    for (const auto& v : variants_) known = known || v.first == mask;
    if (known) continue;
    NetworkData data = base.data();
    for (std::size_t i = 0; i < reductions_.size(); ++i)
      if (mask & (1ULL << i)) data.links[reduction_links_[i]].capacity *= 1.0 - reductions_[i].fraction;
    variants_.emplace_back(mask, Network(std::move(data)));
  }
}

const Network& NetworkTimeline::at(std::size_t day) const {
  unsigned long long mask = 0;
  for (std::size_t i = 0; i < reductions_.size(); ++i)
    if (reductions_[i].first_day <= day && day <= reductions_[i].last_day) mask |= 1ULL << i;
  if (mask == 0) return *base_;
  for (const auto& v : variants_)
    if (v.first == mask) return v.second;
  throw std::logic_error("capacity timeline has no network for the active reduction set");
}

FlowState step_discrete(const Network& net, const FlowState& f, const SwapMatrix& rho) {
  return apply_swaps(net, f, rho, 1.0);
}

FlowState step_euler(const Network& net, const FlowState& f, const SwapMatrix& rho, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("euler step tau must lie in (0, 1]");
  return apply_swaps(net, f, rho, tau);
}

std::optional<CycleMatch> detect_cycle(std::span<const std::vector<double>> window,
                                       std::size_t period_max, double tol) {
  const std::size_t n = window.size();
  if (period_max < 1 || n < 2 * period_max)
    throw std::invalid_argument("cycle window must hold at least 2 * period_max states");
  for (std::size_t L = 1; L <= period_max; ++L) {
    const std::size_t first = std::max(L, n - 2 * L);
    double worst = 0.0;
    bool ok = true;
    for (std::size_t t = first; t < n && ok; ++t) {
      const double d = euclidean_distance(window[t], window[t - L]);
      worst = std::max(worst, d);
      ok = d <= tol;
    }
    if (ok) return CycleMatch{L, worst};
  }
  return std::nullopt;
}

TrajectoryRecord run_trajectory(const NetworkTimeline& timeline, const FlowState& f0,
                                const ProtocolParams& params, const StepperConfig& cfg) {
  cfg.check();
  const Network& base = timeline.base();
  params.check(base);
  if (auto vs = feasibility_violations(base, f0); !vs.empty())
    throw std::invalid_argument("infeasible initial flows: " + vs.front());

  const bool euler = cfg.mode == StepMode::Euler;
  const double tau = euler ? cfg.euler_step : 1.0;
  const std::size_t n_steps =
      euler ? static_cast<std::size_t>(std::llround(static_cast<double>(cfg.max_days) / tau))
            : cfg.max_days;
  auto day_of = [&](std::size_t s) {
    return euler ? static_cast<std::size_t>(std::floor(static_cast<double>(s) * tau + 1e-9)) : s;
  };
  const bool detect_cycles = !euler;

  TrajectoryRecord rec;
  rec.mode = cfg.mode;
  rec.euler_step = tau;

  std::vector<Sample> kept;
  std::deque<Sample> tail;
  std::deque<std::vector<double>> recent;

  auto emit = [&](Sample&& s) {
    if (s.state.day % cfg.record_every == 0) kept.push_back(s);
    tail.push_back(std::move(s));
    if (tail.size() > cfg.tail_window) tail.pop_front();
  };
  auto cycle_check = [&]() -> std::optional<CycleMatch> {
    if (!detect_cycles || recent.size() < cfg.cycle.window) return std::nullopt;
    const std::vector<std::vector<double>> win(recent.begin(), recent.end());
    auto m = detect_cycle(win, cfg.cycle.period_max, cfg.cycle.tol);
    if (m && m->period >= 2) return m;
    return std::nullopt;
  };

  FlowState f = f0;
  f.day = 0;
  recent.push_back(f.flows);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t converged_since = kNone;
  std::optional<TerminationVerdict> verdict;

  std::size_t s = 0;
  for (; s < n_steps; ++s) {
    const Network& net = timeline.at(day_of(s));
    auto v = link_flows(net, f);
    auto C = route_costs(net, link_costs(net, v));
    const SwapMatrix rho = swap_matrix(net, C, params);
    FlowState next = euler ? step_euler(net, f, rho, tau) : step_discrete(net, f, rho);

    DayDiagnostics d;
    d.day = s;
    d.step_norm = euclidean_distance(next.flows, f.flows);
    d.rbap_value = rbap_descent_value(net, C, f.flows, next.flows);
    d.lyapunov_value = lyapunov_from_link_flows(net, v);
    d.route_costs = std::move(C);
    d.link_flows = std::move(v);
    const double rate = d.step_norm / tau;
    emit(Sample{f, std::move(d)});

    f = std::move(next);
    recent.push_back(f.flows);
    if (recent.size() > cfg.cycle.window) recent.pop_front();

    if (rate <= cfg.convergence_tol) {
      if (converged_since == kNone) converged_since = s + 1;
    } else {
      converged_since = kNone;
    }

    if (!cfg.stop_on_convergence) continue;
    if (converged_since != kNone) {
      verdict = TerminationVerdict{Termination::Converged, s + 1, 0, 0.0};
      ++s;
      break;
    }
    if (s + 1 >= cfg.cycle.burn_in) {
      if (auto m = cycle_check()) {
        verdict = TerminationVerdict{Termination::Cycle, s + 1, m->period, m->residual};
        ++s;
        break;
      }
    }
  }

  // Terminal state: no outgoing step.
  {
    const Network& net = timeline.at(day_of(s));
    DayDiagnostics d;
    d.day = s;
    d.link_flows = link_flows(net, f);
    d.route_costs = route_costs(net, link_costs(net, d.link_flows));
    d.step_norm = std::numeric_limits<double>::quiet_NaN();
    d.rbap_value = std::numeric_limits<double>::quiet_NaN();
    d.lyapunov_value = lyapunov_from_link_flows(net, d.link_flows);
    emit(Sample{f, std::move(d)});
  }

  if (!verdict) {
    if (converged_since != kNone) {
      verdict = TerminationVerdict{Termination::Converged, converged_since, 0, 0.0};
    } else if (s >= cfg.cycle.burn_in && cycle_check()) {
      const auto m = *cycle_check();
      verdict = TerminationVerdict{Termination::Cycle, s, m.period, m.residual};
    } else {
      verdict = TerminationVerdict{Termination::MaxDays, s, 0, 0.0};
    }
  }
  rec.termination = *verdict;

  const std::size_t tail_start = tail.front().state.day;
  for (auto& k : kept) {
    if (k.state.day >= tail_start) break;
    rec.states.push_back(std::move(k.state));
    rec.diagnostics.push_back(std::move(k.diag));
  }
  for (auto& t : tail) {
    rec.states.push_back(std::move(t.state));
    rec.diagnostics.push_back(std::move(t.diag));
  }
  return rec;
}

}  // namespace npsd
