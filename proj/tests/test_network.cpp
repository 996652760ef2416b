#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <openbox/network.hpp>

#include "support.hpp"

using namespace openbox;
using testsupport::config_of;
using testsupport::net_a;

namespace {

/// Scalar softmax oracle, written independently of the library's version.
Vec softmax_oracle(const Vec& z) {
    double sum = 0.0;
    for (const double v : z) sum += std::exp(v);
    Vec p;
    for (const double v : z) p.push_back(std::exp(v) / sum);
    return p;
}

} // namespace

TEST_CASE("relu piece convention: boundary belongs to the zero piece", "[network]") {
    const ActivationSpec relu = ActivationSpec::relu();
    REQUIRE(relu.piece_count() == 2);
    REQUIRE(relu.piece_index(-3.0) == 0);
    REQUIRE(relu.piece_index(0.0) == 0); // z = 0 counts as inactive
    REQUIRE(relu.piece_index(1e-300) == 1);
    REQUIRE(relu.piece_index(5.0) == 1);
    REQUIRE(relu.apply(-2.0) == 0.0);
    REQUIRE(relu.apply(3.5) == 3.5);
}

TEST_CASE("activation validation rejects bad piece lists", "[network]") {
    const double inf = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(ActivationSpec("x", {}), DomainError);
    // Gap between pieces.
    REQUIRE_THROWS_AS(ActivationSpec("x", {{-inf, 0.0, 0.0, 0.0}, {1.0, inf, 1.0, 0.0}}),
                      DomainError);
    // Does not reach +infinity.
    REQUIRE_THROWS_AS(ActivationSpec("x", {{-inf, 0.0, 0.0, 0.0}}), DomainError);
    REQUIRE_THROWS_AS(ActivationSpec::by_name("sigmoid"), ParseError);
}

TEST_CASE("forward pass on the hand-checked network", "[network]") {
    const Network net = net_a();

    SECTION("x = (1,-1): one active, one inactive neuron") {
        const ForwardTrace t = forward(net, Vec{1.0, -1.0});
        REQUIRE(t.z[0] == Vec{1.0, -1.0});
        REQUIRE(t.hidden[0] == Vec{1.0, 0.0});
        REQUIRE(t.z[1] == Vec{1.0, -1.0});
        REQUIRE(t.configuration == config_of({1, 0}));
        // softmax(1,-1) = (e^2/(1+e^2), 1/(1+e^2)) ~ (0.8808, 0.1192)
        REQUIRE(t.output[0] == Catch::Approx(0.8807970779778823).epsilon(1e-12));
        REQUIRE(t.output[1] == Catch::Approx(0.1192029220221176).epsilon(1e-12));
        const Vec oracle = softmax_oracle(t.z[1]);
        REQUIRE(std::abs(t.output[0] - oracle[0]) < 1e-15);
        REQUIRE(std::abs(t.output[1] - oracle[1]) < 1e-15);
    }

    SECTION("x = (0,0): both neurons on the zero piece, output is uniform") {
        const ForwardTrace t = forward(net, Vec{0.0, 0.0});
        REQUIRE(t.configuration == config_of({0, 0}));
        REQUIRE(t.output == Vec{0.5, 0.5});
    }

    SECTION("x = (-3,2): the other mixed configuration") {
        const ForwardTrace t = forward(net, Vec{-3.0, 2.0});
        REQUIRE(t.configuration == config_of({0, 1}));
        REQUIRE(t.hidden[0] == Vec{0.0, 2.0});
        REQUIRE(t.z[1] == Vec{-2.0, 2.0});
        const Vec oracle = softmax_oracle(Vec{-2.0, 2.0});
        REQUIRE(std::abs(t.output[0] - oracle[0]) < 1e-15);
    }
}

TEST_CASE("conf equals the forward trace configuration", "[network]") {
    Rng rng(7);
    const Network net = testsupport::random_network(rng, {3, 5, 4, 2});
    for (int i = 0; i < 50; ++i) {
        Vec x{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        REQUIRE(conf(net, x) == forward(net, x).configuration);
    }
}

TEST_CASE("forward validates input", "[network]") {
    const Network net = net_a();
    REQUIRE_THROWS_AS(forward(net, Vec{1.0}), DimensionError);
    REQUIRE_THROWS_AS(forward(net, Vec{1.0, std::nan("")}), DomainError);
}

TEST_CASE("network construction validation", "[network]") {
    REQUIRE_THROWS_AS(Network({2, 2}, {Matrix{{1.0, 0.0}, {0.0, 1.0}}}, {Vec{0.0, 0.0}},
                              ActivationSpec::relu()),
                      DimensionError); // no hidden layer
    REQUIRE_THROWS_AS(Network({2, 2, 2},
                              {Matrix{{1.0, 0.0}, {0.0, 1.0}}, Matrix{{1.0}, {0.0}}},
                              {Vec{0.0, 0.0}, Vec{0.0, 0.0}}, ActivationSpec::relu()),
                      DimensionError); // wrong inner shape
    REQUIRE_THROWS_AS(Network({2, 2, 2},
                              {Matrix{{1.0, 0.0}, {0.0, std::nan("")}},
                               Matrix{{1.0, -1.0}, {-1.0, 1.0}}},
                              {Vec{0.0, 0.0}, Vec{0.0, 0.0}}, ActivationSpec::relu()),
                      DomainError);
}

TEST_CASE("network JSON round-trip preserves everything", "[network]") {
    Rng rng(11);
    const Network net = testsupport::random_network(rng, {4, 3, 2});
    const Network back = Network::from_json(net.to_json());
    REQUIRE(back == net);
    REQUIRE(back.fingerprint() == net.fingerprint());
}

TEST_CASE("fingerprint reacts to any parameter change", "[network]") {
    const Network net = net_a();
    Network tweaked = net_a();
    tweaked.weight(1)(0, 0) += 1e-9;
    REQUIRE(net.fingerprint() != tweaked.fingerprint());
    REQUIRE(net.fingerprint() == net_a().fingerprint());
}

TEST_CASE("network file save/load and parse errors", "[network]") {
    const testsupport::TempDir dir("net-json");
    const auto path = dir / "net.json";
    save_network(net_a(), path);
    REQUIRE(load_network(path) == net_a());

    const auto bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    REQUIRE_THROWS_AS(load_network(bad), ParseError);

    const auto wrong = dir / "wrong.json";
    std::ofstream(wrong) << R"({"layer_sizes":[2,2,2],"weights":[[1,0,0,1],[1]],)"
                         << R"("biases":[[0,0],[0,0]],"activation":"relu"})";
    REQUIRE_THROWS_AS(load_network(wrong), ParseError);
    REQUIRE_THROWS_AS(load_network(dir / "missing.json"), DataError);
}

TEST_CASE("predicted_class breaks ties toward the lower index", "[network]") {
    REQUIRE(predicted_class(Vec{0.5, 0.5}) == 0);
    REQUIRE(predicted_class(Vec{0.2, 0.5, 0.3}) == 1);
}

TEST_CASE("configuration display string", "[network]") {
    REQUIRE(config_of({1, 0, 0, 1, 1}).to_string({2, 3}) == "10|011");
}
