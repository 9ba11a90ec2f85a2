#include <doctest.h>

#include "helpers.hpp"
#include "streamgp/latent.hpp"
#include "streamgp/network.hpp"

using namespace streamgp;

namespace {

StreamNetwork truth_net() {
    // tau from the ground-truth table, squared
    return StreamNetwork::from_edges({3.8730 * 3.8730, 2.2361 * 2.2361, 3.1623 * 3.1623});
}

std::array<double, 4> truth_weights() { return {1.0, 1.0, norm_cdf(0.9808), norm_cdf(0.1199)}; }

}  // namespace

TEST_CASE("flow connectivity on the three-segment network") {
    const auto net = truth_net();
    const SiteId s1 = net.find("s1"), s2 = net.find("s2"), s3 = net.find("s3");
    CHECK(net.flow_connected(s1, s2));
    CHECK_FALSE(net.flow_connected(s2, s3));
    CHECK(net.flow_connected(s1, s1));
    for (SiteId a : {s1, s2, s3})
        for (SiteId b : {s1, s2, s3}) CHECK(net.flow_connected(a, b) == net.flow_connected(b, a));
    CHECK_THROWS_AS(net.flow_connected(s1, 17), Error);
    CHECK_THROWS_AS(net.find("s9"), Error);
}

TEST_CASE("hydrological distances") {
    const auto net = StreamNetwork::from_edges({15.0, 5.0, 10.0});
    CHECK(net.hydro_distance(0, 1) == doctest::Approx(20.0));
    CHECK(net.hydro_distance(1, 2) == doctest::Approx(15.0));
    CHECK(net.hydro_distance(0, 0) == 0.0);
    CHECK(net.hydro_distance(1, 0) == net.hydro_distance(0, 1));

    // stacked site above s2 on the same segment
    auto net2 = StreamNetwork::from_edges({15.0, 5.0, 10.0});
    const SiteId up = net2.add_site("s2+", 2, 15.0 + 5.0 + 3.0);
    CHECK(net2.hydro_distance(0, up) == doctest::Approx(net2.hydro_distance(0, 1) + net2.hydro_distance(1, up)));
}

TEST_CASE("edge distances must be given and positive") {
    CHECK_THROWS_AS(StreamNetwork::from_edges({15.0, 0.0, 10.0}), Error);
    CHECK_THROWS_AS(StreamNetwork::from_edges({15.0, -1.0, 10.0}), Error);
    try {
        StreamNetwork::from_edges({std::nan(""), 1.0, 1.0});
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
}

TEST_CASE("segment sets") {
    const auto net = truth_net();
    for (SiteId s = 0; s < 3; ++s) {
        const auto ss = net.sets(s);
        CHECK(ss.downstream.count(net.site(s).segment));
        CHECK(ss.upstream.count(net.site(s).segment));
    }
    // D_s1 inside D_s2 for the flow-connected pair
    for (int k : net.sets(0).downstream) CHECK(net.sets(1).downstream.count(k));
    CHECK(net.between(0, 1) == std::set<int>{2});
    CHECK(net.between(1, 0) == std::set<int>{2});
    CHECK(net.between(0, 0).empty());
    CHECK_THROWS_AS(net.between(1, 2), Error);
}

TEST_CASE("weight products") {
    const auto net = truth_net();
    const auto w = truth_weights();
    CHECK(net.weight_product(0, 1, w) == doctest::Approx(0.8367).epsilon(1e-4));
    CHECK(net.weight_product(0, 2, w) == doctest::Approx(0.5477).epsilon(1e-4));
    CHECK(net.weight_product(1, 1, w) == 1.0);
    auto net2 = truth_net();
    const SiteId up = net2.add_site("s2+", 2, net2.site(1).coord + 2.0);
    CHECK(net2.weight_product(1, up, w) == 1.0);
    // multiplicative along one flow path
    CHECK(net2.weight_product(0, 1, w) * net2.weight_product(1, up, w) == doctest::Approx(net2.weight_product(0, up, w)));
    try {
        net.weight_product(1, 2, w);
        FAIL("expected a domain error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Domain);
    }
}

TEST_CASE("inducing sites stay on their segments") {
    const auto net = StreamNetwork::from_edges({15.0, 5.0, 10.0}, std::array<double, 3>{4.0, 2.0, 3.0});
    CHECK(net.site_count() == 6);
    CHECK(net.site(net.find("s1'")).coord == doctest::Approx(11.0));
    CHECK(net.site(net.find("s2'")).segment == 2);
    CHECK(net.site(net.find("s3'")).coord == doctest::Approx(18.0));
    CHECK(net.site(3).inducing);
    CHECK_FALSE(net.flow_connected(net.find("s2'"), net.find("s3'")));
    CHECK_THROWS_AS(StreamNetwork::from_edges({15.0, 5.0, 10.0}, std::array<double, 3>{16.0, 2.0, 3.0}), Error);
}

TEST_CASE("site placement rules") {
    auto net = StreamNetwork::from_edges({15.0, 5.0, 10.0});
    CHECK_THROWS_AS(net.add_site("bad", 1, 20.0), Error);
    CHECK_THROWS_AS(net.add_site("bad", 2, 10.0), Error);
    CHECK_THROWS_AS(net.add_site("bad", 4, 1.0), Error);
    CHECK_THROWS_AS(net.add_site("bad", 1, -1.0), Error);
}
