#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "npsd/protocols.hpp"
#include "support/random_network.hpp"

using namespace npsd;
using npsd::testing::parallel_network;

namespace {

ProtocolParams npsd_params(double theta) {
  ProtocolParams p;
  p.theta = theta;
  return p;
}

ProtocolParams pap_params(double kappa) {
  ProtocolParams p;
  p.variant = ProtocolVariant::PapFixed;
  p.kappa = kappa;
  return p;
}

}  // namespace

TEST_CASE("candidate set") {
  const auto net = parallel_network(4, 10.0);
  const std::vector<double> C = {10, 8, 8, 12};
  CHECK(candidate_set(net, 0, C) == std::vector<std::size_t>{1, 2});
  CHECK(candidate_set(net, 1, C).empty());
  CHECK(candidate_set(net, 3, C) == std::vector<std::size_t>{0, 1, 2});
  CHECK(candidate_set(net, 0, C, 2.0).empty());
  CHECK(candidate_set(net, 0, C, 1.5) == std::vector<std::size_t>{1, 2});

  const auto two = parallel_network(2, 10.0);
  const std::vector<double> tie = {10, 10};
  CHECK(candidate_set(two, 0, tie).empty());
}

TEST_CASE("NPSD rate") {
  const auto net = parallel_network(3, 10.0);
  const auto p = npsd_params(0.1);

  SUBCASE("no swap towards a route that is not cheaper") {
    const std::vector<double> C = {10, 10, 12};
    CHECK(npsd_rate(net, 0, 1, C, p) == 0.0);
    CHECK(npsd_rate(net, 0, 2, C, p) == 0.0);
  }

  SUBCASE("two candidates, cost gap 5") {
    const std::vector<double> C = {15, 10, 10};
    const double expected = 0.5 * (1.0 - std::exp(-0.1 * 5.0));
    CHECK(npsd_rate(net, 0, 1, C, p) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(expected == doctest::Approx(0.196734).epsilon(1e-6));
  }

  SUBCASE("large theta never exceeds 1") {
    const auto two = parallel_network(2, 10.0);
    const std::vector<double> C = {15, 10};
    for (double theta : {1.0, 10.0, 1e3, 1e9}) {
      const double r = npsd_rate(two, 0, 1, C, npsd_params(theta));
      CHECK(r <= 1.0);
      CHECK(r > 0.99);
    }
  }
}

TEST_CASE("PAP rates and kappa") {
  const auto net = parallel_network(2, 10.0);
  const std::vector<double> C = {15, 10};
  CHECK(pap_rate_fixed(net, 1, 0, C, pap_params(0.01)) == 0.0);
  CHECK(pap_rate_fixed(net, 0, 1, C, pap_params(0.01)) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(pap_rate_fixed(net, 0, 1, C, pap_params(0.5)) == 2.5);

  const auto m = swap_matrix(net, C, pap_params(0.5));
  CHECK(m.any_over_swapping());
  REQUIRE(m.first_over_swapping_route());
  CHECK(*m.first_over_swapping_route() == 0);

  SUBCASE("Smith-Wisten bound") {
    CHECK(smith_wisten_kappa_bound(parallel_network(8, 1.0), 20.0) == doctest::Approx(0.00625));
    CHECK(smith_wisten_kappa_bound(parallel_network(1, 1.0), 1.0) == 1.0);
    CHECK(smith_wisten_kappa_bound(parallel_network(4, 1.0), 5.0) ==
          doctest::Approx(2.0 * smith_wisten_kappa_bound(parallel_network(8, 1.0), 5.0)));
  }

  SUBCASE("kappa from cost spread") {
    const std::vector<double> equal = {7, 7, 7};
    CHECK(pap_kappa_he(equal, 2.0) == 0.5);
    const std::vector<double> spread = {10, 8};
    CHECK(pap_kappa_he(spread, 2.0) == 0.25);
    CHECK(pap_kappa_he(spread, 3.0) < pap_kappa_he(spread, 2.0));
  }

  SUBCASE("PapHe swap matrix uses the per-OD kappa") {
    ProtocolParams he;
    he.variant = ProtocolVariant::PapHe;
    he.reluctance = 2.0;
    const std::vector<double> c = {10, 8};
    const auto mh = swap_matrix(net, c, he);
    CHECK(mh.rate(net, 0, 1) == doctest::Approx(0.25 * 2.0));
    CHECK(mh.rate(net, 1, 0) == 0.0);
  }
}

TEST_CASE("NPSD swap matrix") {
  const auto net = parallel_network(3, 10.0);

  SUBCASE("equal costs give a zero block") {
    const std::vector<double> C = {9, 9, 9};
    const auto m = swap_matrix(net, C, npsd_params(0.3));
    for (double r : m.block(0).rates) CHECK(r == 0.0);
  }

  SUBCASE("costs (12, 10, 10), theta 0.2") {
    const std::vector<double> C = {12, 10, 10};
    const auto m = swap_matrix(net, C, npsd_params(0.2));
    const double expected = 0.5 * (1.0 - std::exp(-0.2 * 2.0));
    CHECK(expected == doctest::Approx(0.164840).epsilon(1e-6));
    CHECK(m.rate(net, 0, 1) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(m.rate(net, 0, 2) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(m.rate(net, 0, 0) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(m.rate(net, 1, j) == 0.0);
      CHECK(m.rate(net, 2, j) == 0.0);
    }
    CHECK_FALSE(m.any_over_swapping());
  }

  SUBCASE("row sums stay within [0, 1]") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
      const std::size_t n = npsd::testing::pick(rng, 1, 6);
      const auto pn = parallel_network(n, 10.0);
      std::vector<double> C(n);
      for (auto& c : C) c = npsd::testing::uniform(rng, 0.0, 100.0);
      const double theta = std::exp(npsd::testing::uniform(rng, -6.0, 6.0));
      const auto m = swap_matrix(pn, C, npsd_params(theta));
      for (double s : m.block(0).row_sums) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
      }
    }
  }

  SUBCASE("per-OD theta") {
    ProtocolParams p;
    p.theta_by_od["w"] = 0.2;
    const std::vector<double> C = {12, 10, 10};
    CHECK(swap_matrix(net, C, p).rate(net, 0, 1) ==
          swap_matrix(net, C, npsd_params(0.2)).rate(net, 0, 1));
    ProtocolParams none;
    CHECK_THROWS_AS(none.check(net), std::invalid_argument);
  }
}

TEST_CASE("protocol parameter checks") {
  const auto net = parallel_network(2, 10.0);
  CHECK_THROWS(npsd_params(0.0).check(net));
  CHECK_THROWS(npsd_params(-1.0).check(net));
  CHECK_NOTHROW(npsd_params(0.1).check(net));
  CHECK_THROWS(pap_params(0.0).check(net));
  CHECK(parse_protocol_variant("pap_he") == ProtocolVariant::PapHe);
  CHECK(std::string(to_string(ProtocolVariant::PapFixed)) == "pap_fixed");
  CHECK_THROWS(parse_protocol_variant("logit"));
}

TEST_CASE("ordered sum is order independent") {
  std::vector<double> a = {1e16, 1.0, -1e16, 3.0};
  std::vector<double> b = {3.0, -1e16, 1.0, 1e16};
  CHECK(ordered_sum(a) == ordered_sum(b));
}
