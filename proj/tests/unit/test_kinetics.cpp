#include <doctest.h>

#include <cmath>

#include "gknet/errors.hpp"
#include "gknet/kinetics.hpp"
#include "gknet/rng.hpp"
#include "helpers.hpp"

using namespace gknet;

namespace {

Dataset three_species() {
    return testing::make_dataset({{1.0, 2.0, 0.5}, {0.8, 1.5, 1.0}, {1.2, 0.5, 2.0}},
                                 {{0.5, 1.0, 1.0}, {1.0, 0.7, 0.3}, {2.0, 0.4, 0.9}});
}

}  // namespace

TEST_CASE("gk prediction matches a hand evaluation") {
    const auto data = three_species();
    MechanismModel m{0, {{1, {2}}}};
    KineticParams p;
    p.rates = {{2.0, 0.5, {0.25}}};
    // sample 0: X_E = 2, X0 = 0.5, X_I = 0.5 -> K = 0.5 (1 + 2) = 1.5
    CHECK(eval_gk(m, p, data, 0) == doctest::Approx(2.0 * 2.0 * 0.5 / (0.5 + 1.5)));

    MechanismModel two{0, {{1, {}}, {2, {}}}};
    KineticParams q;
    q.rates = {{1.0, 1.0, {}}, {3.0, 2.0, {}}};
    const double expect = 1.0 * 1.5 * 1.0 / 2.0 + 3.0 * 1.0 * 1.0 / 3.0;
    CHECK(eval_gk(two, q, data, 1) == doctest::Approx(expect));
}

TEST_CASE("the empty mechanism predicts the column mean") {
    const auto data = three_species();
    MechanismModel m{0, {}};
    KineticParams p;
    p.mu = empty_model_mean(data, 0);
    CHECK(p.mu == doctest::Approx(1.0));
    std::vector<double> out(3);
    predict_gk(m, p, data, out);
    for (double f : out) CHECK(f == doctest::Approx(1.0));
}

TEST_CASE("log likelihood agrees with its ssr form") {
    const auto data = three_species();
    MechanismModel m{2, {{0, {1}}}};
    KineticParams p;
    p.rates = {{1.3, 0.7, {2.0}}};
    p.sigma = 0.3;
    double ssr = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
        const double e = std::log(data.phospho(static_cast<Eigen::Index>(s), 2)) - std::log(eval_gk(m, p, data, s));
        ssr += e * e;
    }
    const double direct = -1.5 * std::log(2 * M_PI * 0.09) - ssr / (2 * 0.09);
    CHECK(log_likelihood(m, p, data) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(log_likelihood_from_ssr(ssr, 3, 0.3) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("prior densities") {
    // Gamma(2, 1/2): x e^{-2x} * 4
    CHECK(log_prior_rate(0.7) == doctest::Approx(std::log(4 * 0.7) - 1.4));
    // InvGamma(6, 1): s^-7 e^{-1/s} / 120
    CHECK(log_prior_sigma(0.25) == doctest::Approx(-7 * std::log(0.25) - 4.0 - std::log(120.0)));
    CHECK_THROWS_AS(log_prior_rate(0.0), DomainError);
    CHECK_THROWS_AS(log_prior_sigma(-1.0), DomainError);
    KineticParams p;
    p.rates = {{0.5, 2.0, {1.0}}};
    p.sigma = 0.3;
    CHECK(log_prior_params(p) == doctest::Approx(log_prior_rate(0.5) + log_prior_rate(2.0) + log_prior_rate(1.0) +
                                                 log_prior_sigma(0.3)));
}

TEST_CASE("mechanism invariants are enforced") {
    CHECK_THROWS_AS(validate(MechanismModel{0, {{0, {}}}}, 3), InvalidInput);
    CHECK_THROWS_AS(validate(MechanismModel{0, {{1, {0}}}}, 3), InvalidInput);
    CHECK_THROWS_AS(validate(MechanismModel{0, {{1, {1}}}}, 3), InvalidInput);
    CHECK_THROWS_AS(validate(MechanismModel{0, {{5, {}}}}, 3), InvalidInput);
    CHECK_THROWS_AS(validate(MechanismModel{0, {{2, {}}, {1, {}}}}, 3), InvalidInput);
    CHECK_NOTHROW(validate(MechanismModel{0, {{1, {2}}, {2, {}}}}, 3));
}

TEST_CASE("signatures and parent sets") {
    MechanismModel m{0, {{1, {2, 4}}, {3, {}}}};
    CHECK(m.signature() == "1[2|4];3[]");
    CHECK(MechanismModel{0, {}}.signature() == "empty");
    CHECK(m.parents() == std::vector<Species>{1, 2, 3, 4});
    CHECK(m.inhibitor_count() == 2);
    CHECK(param_dimension(m) == 2 * 2 + 2 + 1);
    CHECK(m.is_inhibitor(4));
    CHECK_FALSE(m.is_inhibitor(1));
}

TEST_CASE("nonpositive predictions are rejected") {
    const auto data = three_species();
    MechanismModel m{0, {{1, {}}}};
    KineticParams p;
    p.rates = {{0.0, 1.0, {}}};
    CHECK_THROWS_AS(log_likelihood(m, p, data), UndefinedLikelihood);
}

TEST_CASE("independent streams differ and repeat") {
    auto a = make_stream(5, 1, 2, 3);
    auto b = make_stream(5, 1, 2, 3);
    auto c = make_stream(5, 1, 3, 2);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
}
