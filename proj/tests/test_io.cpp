#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "npsd/io.hpp"
#include "support/random_network.hpp"

using namespace npsd;
using nlohmann::json;

namespace {

const std::filesystem::path kData = NPSD_DATA_DIR;

ScenarioConfig random_config(std::mt19937_64& rng) {
  using npsd::testing::pick;
  using npsd::testing::uniform;
  ScenarioConfig c;
  c.network = "net" + std::to_string(pick(rng, 0, 9)) + ".json";
  c.protocol.variant = static_cast<ProtocolVariant>(pick(rng, 0, 2));
  switch (pick(rng, 0, 3)) {
    case 0: c.protocol.theta = uniform(rng, 0.001, 2.0); break;
    case 1: c.protocol.theta_by_od = {{"1", uniform(rng, 0, 1)}, {"2", uniform(rng, 0, 1)}}; break;
    case 2:
      c.protocol.theta = uniform(rng, 0.001, 2.0);
      c.protocol.theta_by_od = {{"x", uniform(rng, 0, 1)}};
      break;
    default: break;
  }
  c.protocol.kappa = uniform(rng, 0, 1);
  c.protocol.reluctance = uniform(rng, 0, 5);
  c.protocol.cost_epsilon = pick(rng, 0, 1) ? 0.0 : uniform(rng, 0, 1e-3);
  c.stepper.max_days = pick(rng, 1, 5000);
  c.stepper.convergence_tol = uniform(rng, 1e-12, 1e-3);
  c.stepper.mode = pick(rng, 0, 1) ? StepMode::Euler : StepMode::Discrete;
  c.stepper.euler_step = uniform(rng, 0.01, 1.0);
  c.stepper.record_every = pick(rng, 1, 50);
  c.stepper.tail_window = pick(rng, 2, 64);
  c.stepper.stop_on_convergence = pick(rng, 0, 1);
  c.stepper.cycle = {pick(rng, 1, 8), uniform(rng, 1e-9, 1e-3), pick(rng, 16, 64), pick(rng, 0, 300)};
  for (std::size_t i = pick(rng, 0, 3); i > 0; --i) {
    const std::size_t first = pick(rng, 0, 10);
    c.reductions.push_back({std::to_string(pick(rng, 1, 17)), uniform(rng, 0, 0.99), first, first + pick(rng, 0, 3)});
  }
  if (pick(rng, 0, 1)) c.theta_grid = GridSpec{GridRange{0.01, 0.01, 0.3}};
  else c.theta_grid = GridSpec{std::vector<double>{uniform(rng, 0, 1), uniform(rng, 1, 2)}};
  c.cap_grid = GridSpec{GridRange{0.1, 0.1, 0.9}};
  c.reference = pick(rng, 0, 1) ? "oracle" : "ref.json";
  c.ad_cycle = pick(rng, 1, 4);
  c.ad_tol = uniform(rng, 1e-9, 1e-3);
  c.oracle_rel_gap = uniform(rng, 1e-15, 1e-8);
  c.oracle_max_iters = pick(rng, 1, 1000000);
  return c;
}

}  // namespace

TEST_CASE("grid ranges use exact decimal steps") {
  const GridSpec theta{GridRange{0.01, 0.01, 0.3}};
  const auto t = theta.values();
  REQUIRE(t.size() == 30);
  CHECK(t.front() == 0.01);
  CHECK(t[2] == 0.03);
  CHECK(t[6] == 0.07);
  CHECK(t.back() == 0.3);

  const auto c = GridSpec{GridRange{0.1, 0.1, 0.9}}.values();
  REQUIRE(c.size() == 9);
  CHECK(c[2] == 0.3);
  CHECK(c[6] == 0.7);

  CHECK(GridSpec{GridRange{1, 2, 6}}.values() == std::vector<double>{1, 3, 5});
  CHECK(GridSpec{GridRange{0.5, 0.25, 0.5}}.values() == std::vector<double>{0.5});
  CHECK(GridSpec{std::vector<double>{0.3, 0.1}}.values() == std::vector<double>{0.3, 0.1});
  CHECK_THROWS(GridSpec{GridRange{0.1, 0.0, 0.9}}.values());
  CHECK_THROWS(GridSpec{GridRange{0.9, 0.1, 0.1}}.values());
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1 + 0.2) == "0.3");
  CHECK(format_number(17.59375) == "17.59375");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(std::nan("")) == "");
  CHECK(round12(1.0 / 3.0) == 0.333333333333);
}

TEST_CASE("scenario config round trip") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 500; ++i) {
    const auto c = random_config(rng);
    const auto text = scenario_config_to_json(c).dump();
    const auto back = scenario_config_from_json(json::parse(text));
    CHECK(back == c);
  }
}

TEST_CASE("scenario config parsing") {
  const auto c = load_scenario_config(kData / "scr_sweep.json");
  CHECK(c.network == "example_network.json");
  CHECK(c.protocol.theta == 0.1);
  CHECK_FALSE(c.stepper.stop_on_convergence);
  CHECK(c.stepper.max_days == 2000);
  REQUIRE(c.reductions.size() == 1);
  CHECK(c.reductions[0] == CapacityReduction{"11", 0.5, 0, 0});
  CHECK(c.theta_grid.values().size() == 30);
  CHECK(c.cap_grid.values().size() == 9);

  const json base = json::parse(scenario_config_to_json(c).dump());
  auto with = [&](const char* key, json v) {
    json j = base;
    j[key] = std::move(v);
    return j;
  };
  CHECK_THROWS_AS(scenario_config_from_json(with("typo", 1)), IoError);
  CHECK_THROWS_AS(scenario_config_from_json(with("ad_cycle", "two")), IoError);
  CHECK_THROWS_AS(scenario_config_from_json(with("protocol", json{{"variant", "logit"}})), IoError);
  CHECK_THROWS_AS(scenario_config_from_json(with("reductions", json::array({{{"link", "11"}, {"day", {1, 2, 3}}}}))),
                  IoError);
  auto range = with("reductions", json::array({{{"link", "11"}, {"fraction", 0.2}, {"day", {2, 4}}}}));
  CHECK(scenario_config_from_json(range).reductions[0] == CapacityReduction{"11", 0.2, 2, 4});
}

TEST_CASE("building a scenario") {
  const auto spec = build_scenario(load_scenario_config(kData / "acr_sweep.json"), kData);
  CHECK(spec.network.link_count() == 17);
  CHECK(spec.theta_grid.size() == 30);
  CHECK(relative_gap(spec.network, spec.reference.flows) <= 1e-14);

  const auto frozen = load_flow_file(spec.network, kData / "example_reference_ue.json");
  CHECK(euclidean_distance(frozen.flows, spec.reference.flows) < 1e-9);

  auto cfg = load_scenario_config(kData / "acr_sweep.json");
  cfg.reference = "example_reference_ue.json";
  CHECK(build_scenario(cfg, kData).reference.flows == frozen.flows);
  cfg.network = "missing.json";
  CHECK_THROWS_AS(build_scenario(cfg, kData), IoError);
}

TEST_CASE("network and flow files") {
  const auto data = load_network_file(kData / "example_network.json");
  const Network net(data);
  const auto again = network_from_json(json::parse(network_to_json(data).dump()));
  CHECK(network_to_json(again) == network_to_json(data));

  const FlowState f{{20, 20, 25, 25, 25, 25, 20, 20}, 3};
  const auto back = flow_state_from_json(net, json::parse(flow_state_to_json(net, f).dump()));
  CHECK(back == f);

  json missing = json::parse(flow_state_to_json(net, f).dump());
  missing["flows"].erase("8");
  CHECK_THROWS_AS(flow_state_from_json(net, missing), std::invalid_argument);
  json unknown = json::parse(flow_state_to_json(net, f).dump());
  unknown["flows"]["99"] = 1.0;
  CHECK_THROWS_AS(flow_state_from_json(net, unknown), std::invalid_argument);

  CHECK_THROWS_AS(load_network_file(kData / "nope.json"), IoError);
  CHECK_THROWS_AS(network_from_json(json{{"links", 3}}), IoError);
}

TEST_CASE("sweep CSV round trip") {
  std::vector<SweepCellResult> cells(3);
  cells[0].theta = 0.1;
  cells[0].cap = {"11", 0.5};
  cells[0].termination = {Termination::Converged, 40, 0, 0.0};
  cells[0].ad = 1e-13;
  cells[1].theta = 0.3;
  cells[1].cap = {"11", 0.5};
  cells[1].termination = {Termination::Cycle, 2000, 2, 1e-14};
  cells[1].ad = 12.5;
  cells[2].theta = 0.4;
  cells[2].cap = {"11", 0.5};
  cells[2].ad = std::nan("");
  cells[2].error = "over-swapping on route 4, \"bad\"";
  const std::map<double, PhaseLabel> phases = {{0.1, PhaseLabel::Stable}, {0.3, PhaseLabel::Unstable}};

  std::ostringstream os;
  write_sweep_csv(os, cells, phases);
  const auto text = os.str();
  CHECK(text.substr(0, text.find('\n')) == "theta,cap_link,cap_fraction,termination,days,ad,phase,period,error");

  std::istringstream is(text);
  const auto back = read_sweep_csv(is);
  REQUIRE(back.size() == 3);
  CHECK(back[0].termination.kind == Termination::Converged);
  CHECK(back[0].termination.day == 40);
  CHECK(back[0].ad == 1e-13);
  CHECK(back[1].termination.period == 2);
  CHECK(back[1].ad == 12.5);
  CHECK(back[2].error == cells[2].error);
  CHECK(classify_sweep(back, kDefaultAdTol) == phases);

  std::istringstream broken("theta,ad\n0.1,2\n");
  CHECK_THROWS_AS(read_sweep_csv(broken), IoError);
}
