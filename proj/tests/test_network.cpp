#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "npsd/network.hpp"
#include "npsd/scenarios.hpp"
#include "support/random_network.hpp"

using namespace npsd;

namespace {

NetworkData two_route_data() {
  NetworkData d;
  d.links = {{"a", 10.0, 40.0}, {"b", 5.0, 20.0}};
  d.od_pairs = {{"w", "o", "d", 30.0}};
  d.routes = {{"1", "w", {"a"}}, {"2", "w", {"b"}}};
  return d;
}

bool mentions(const std::vector<Violation>& vs, const std::string& entity) {
  for (const auto& v : vs)
    if (v.entity == entity) return true;
  return false;
}

}  // namespace

TEST_CASE("link flows") {
  const auto net = build_example_network();

  SUBCASE("all-zero route flows give all-zero link flows") {
    const std::vector<double> zero(net.route_count(), 0.0);
    for (double v : link_flows(net, zero)) CHECK(v == 0.0);
  }

  SUBCASE("link 11 carries routes 4 and 5") {
    const std::vector<double> f0 = {20, 20, 25, 25, 25, 25, 20, 20};
    const auto v = link_flows(net, f0);
    CHECK(v[net.link_index("11")] == 50.0);
  }

  SUBCASE("disjoint routes map flows identically") {
    const Network two(two_route_data());
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
      const double x = testing::uniform(rng, 0.0, 30.0);
      const std::vector<double> f = {x, 30.0 - x};
      const auto v = link_flows(two, f);
      CHECK(v[0] == f[0]);
      CHECK(v[1] == f[1]);
    }
  }
}

TEST_CASE("BPR link cost") {
  NetworkData d;
  d.links = {{"a", 10.0, 40.0}};
  d.od_pairs = {{"w", "o", "d", 60.0}};
  d.routes = {{"1", "w", {"a"}}};
  const Network net(d);

  CHECK(link_costs(net, std::vector<double>{0.0})[0] == 10.0);
  CHECK(link_costs(net, std::vector<double>{40.0})[0] == doctest::Approx(11.5).epsilon(1e-15));
  CHECK(link_costs(net, std::vector<double>{60.0})[0] == doctest::Approx(17.59375).epsilon(1e-15));
  CHECK_THROWS_AS(link_costs(net, std::vector<double>{-1.0}), std::domain_error);

  // derivative against a central difference
  const double h = 1e-4;
  const double num = (link_costs(net, std::vector<double>{30.0 + h})[0] -
                      link_costs(net, std::vector<double>{30.0 - h})[0]) /
                     (2 * h);
  CHECK(link_cost_derivatives(net, std::vector<double>{30.0})[0] == doctest::Approx(num).epsilon(1e-8));
}

TEST_CASE("route costs") {
  NetworkData d;
  d.links = {{"x", 1.0, 10.0}, {"y", 2.0, 10.0}, {"z", 3.0, 10.0}};
  d.od_pairs = {{"w", "o", "d", 1.0}};
  d.routes = {{"single", "w", {"y"}}, {"triple", "w", {"x", "y", "z"}}};
  const Network net(d);
  const std::vector<double> c = {1.0, 2.0, 3.0};
  const auto C = route_costs(net, c);
  CHECK(C[0] == 2.0);
  CHECK(C[1] == 6.0);

  SUBCASE("example network free-flow route costs") {
    const auto ex = build_example_network();
    const std::vector<double> zero(ex.link_count(), 0.0);
    const auto C0 = route_costs(ex, link_costs(ex, zero));
    for (std::size_t k = 0; k < ex.route_count(); ++k) {
      double t = 0.0;
      for (const auto& id : ex.routes()[k].links) t += ex.links()[ex.link_index(id)].free_flow_time;
      CHECK(C0[k] == doctest::Approx(t).epsilon(1e-15));
    }
    CHECK(C0[0] == doctest::Approx(2.26 + 2.25 + 14.91));
  }
}

TEST_CASE("network validation") {
  CHECK(validate(build_example_network().data()).empty());

  SUBCASE("dangling link id names the route") {
    auto d = two_route_data();
    d.routes[1].links = {"missing"};
    const auto vs = validate(d);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].entity == "route 2");
    CHECK_THROWS_AS(Network{d}, InvalidNetwork);
  }

  SUBCASE("OD pair without routes") {
    auto d = two_route_data();
    d.od_pairs.push_back({"empty", "o", "d", 5.0});
    const auto vs = validate(d);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].entity == "od_pair empty");
  }

  SUBCASE("bad numbers and duplicates") {
    auto d = two_route_data();
    d.links[0].capacity = 0.0;
    d.links[1].free_flow_time = -1.0;
    d.od_pairs[0].demand = -3.0;
    d.routes.push_back({"1", "w", {"a"}});
    d.routes.push_back({"3", "nowhere", {"a", "a"}});
    const auto vs = validate(d);
    CHECK(mentions(vs, "link a"));
    CHECK(mentions(vs, "link b"));
    CHECK(mentions(vs, "od_pair w"));
    CHECK(mentions(vs, "route 1"));
    CHECK(mentions(vs, "route 3"));
  }
}

TEST_CASE("flow feasibility") {
  const Network net(two_route_data());
  CHECK(is_feasible(net, FlowState{{10.0, 20.0}, 0}));
  CHECK_FALSE(is_feasible(net, FlowState{{-1.0, 31.0}, 0}));
  CHECK_FALSE(is_feasible(net, FlowState{{10.0, 21.0}, 0}));
  CHECK_FALSE(is_feasible(net, FlowState{{30.0}, 0}));
  CHECK(is_feasible(net, FlowState{{10.0, 20.0 + 1e-10}, 0}));
}

TEST_CASE("indices and capacity scaling") {
  const auto net = build_example_network();
  CHECK(net.link_index("11") == 10);
  CHECK(net.route_index("5") == 4);
  CHECK(net.od_index("2") == 1);
  CHECK_THROWS_AS(net.link_index("99"), std::out_of_range);

  const auto scaled = net.with_capacity_factor(net.link_index("11"), 0.5);
  CHECK(scaled.links()[10].capacity == 0.5 * net.links()[10].capacity);
  for (std::size_t a = 0; a < net.link_count(); ++a)
    if (a != 10) CHECK(scaled.links()[a].capacity == net.links()[a].capacity);
}

TEST_CASE("euclidean distance") {
  const std::vector<double> a = {0.0, 3.0};
  const std::vector<double> b = {4.0, 0.0};
  CHECK(euclidean_distance(a, b) == 5.0);
}
