#include <doctest.h>

#include <cmath>

#include "brw/errors.hpp"
#include "brw/laws.hpp"
#include "brw/stats.hpp"

using namespace brw;

TEST_CASE("offspring law validates probabilities and moments") {
    auto law = OffspringLaw::from_pmf({{2, 0.25}, {1, 0.75}});
    CHECK(law.rho() == doctest::Approx(1.25).epsilon(1e-14));
    CHECK(law.second_moment() == doctest::Approx(0.75 + 4 * 0.25).epsilon(1e-14));
    CHECK(law.k_star() == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(OffspringLaw::from_pmf({{0, 0.5}, {2, 0.5}}), AssumptionError);
    CHECK_THROWS_AS(OffspringLaw::from_pmf({{1, 0.5}, {2, 0.6}}), DomainError);
    CHECK_THROWS_AS(OffspringLaw::from_pmf({{1, 1.0}}), AssumptionError);
    CHECK_NOTHROW(OffspringLaw::from_pmf({{1, 1.0}}, /*allow_critical=*/true));
}

TEST_CASE("mgf closed forms") {
    const auto normal = IncrementLaw::gaussian(0.0, 1.0);
    CHECK(normal.mgf(0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(normal.mgf(1.0) == doctest::Approx(std::exp(0.5)).epsilon(1e-14));

    const auto pm1 = IncrementLaw::rademacher();
    CHECK(pm1.mgf(1.0) == doctest::Approx(std::cosh(1.0)).epsilon(1e-14));

    const auto exp_law = IncrementLaw::shifted_exponential(2.0, -0.5);
    // MGF of shift + Exp(rate): e^(shift t) rate/(rate - t).
    CHECK(exp_law.mgf(1.0) ==
          doctest::Approx(std::exp(-0.5) * 2.0 / (2.0 - 1.0)).epsilon(1e-13));
    CHECK_THROWS_AS(exp_law.mgf(2.0), DomainError);
    CHECK_THROWS_AS(exp_law.mgf(2.5), DomainError);

    const auto uni = IncrementLaw::uniform(-1.0, 2.0);
    CHECK(uni.mgf(1.0) ==
          doctest::Approx((std::exp(2.0) - std::exp(-1.0)) / 3.0).epsilon(1e-13));
}

TEST_CASE("gaussian mgf at theta=1 agrees with numerical quadrature") {
    const auto normal = IncrementLaw::gaussian(0.0, 1.0);
    // Simpson rule over [-10, 10] for the integral of e^x phi(x).
    const int cells = 4000;
    const double h = 20.0 / cells;
    double acc = 0.0;
    auto f = [](double x) {
        return std::exp(x) * std::exp(-x * x / 2.0) / std::sqrt(2.0 * M_PI);
    };
    for (int i = 0; i < cells; ++i) {
        const double a = -10.0 + i * h;
        acc += (f(a) + 4.0 * f(a + h / 2) + f(a + h)) * h / 6.0;
    }
    CHECK(normal.mgf(1.0) == doctest::Approx(acc).epsilon(1e-10));
}

TEST_CASE("cumulant derivatives match finite differences") {
    const double h = 1e-6;
    for (const auto& law :
         {IncrementLaw::gaussian(0.3, 1.7), IncrementLaw::uniform(-2.0, 1.0),
          IncrementLaw::shifted_exponential(3.0, 0.25),
          IncrementLaw::lattice({-2, 0, 3}, {0.3, 0.5, 0.2}, 0.5)}) {
        for (double theta : {-0.9, -0.2, 0.0, 0.4, 1.1}) {
            if (!law.theta_in_domain(theta + h) || !law.theta_in_domain(theta - h))
                continue;
            const double d1 =
                (law.log_mgf(theta + h) - law.log_mgf(theta - h)) / (2 * h);
            const double d2 = (law.log_mgf(theta + h) - 2 * law.log_mgf(theta) +
                               law.log_mgf(theta - h)) /
                              (h * h);
            CHECK(law.log_mgf_d1(theta) == doctest::Approx(d1).epsilon(1e-6));
            CHECK(law.log_mgf_d2(theta) ==
                  doctest::Approx(d2).epsilon(5e-3).scale(1.0));
        }
        CHECK(law.log_mgf_d1(0.0) == doctest::Approx(law.mean()).epsilon(1e-10));
        CHECK(law.log_mgf_d2(0.0) == doctest::Approx(law.variance()).epsilon(1e-7));
    }
}

TEST_CASE("mgf is log-convex on sampled grids") {
    for (const auto& law :
         {IncrementLaw::gaussian(0.0, 1.0), IncrementLaw::uniform(-1.0, 1.0),
          IncrementLaw::lattice({-1, 1}, {0.5, 0.5})}) {
        for (double t = -2.0; t <= 2.0; t += 0.25) {
            const double mid = law.log_mgf(t);
            const double avg = 0.5 * (law.log_mgf(t - 0.25) + law.log_mgf(t + 0.25));
            CHECK(mid <= avg + 1e-10);
        }
    }
}

TEST_CASE("lattice validation") {
    CHECK_THROWS_AS(IncrementLaw::lattice({1, 1}, {0.5, 0.5}), DomainError);
    CHECK_THROWS_AS(IncrementLaw::lattice({-1, 1}, {0.5, 0.6}), DomainError);
    CHECK_THROWS_AS(IncrementLaw::lattice({-1, 1}, {0.5, 0.5}, -1.0), DomainError);
    const auto law = IncrementLaw::lattice({2, -1}, {0.25, 0.75}, 2.0);
    CHECK(law.support_min() == doctest::Approx(-2.0));
    CHECK(law.support_max() == doctest::Approx(4.0));
    CHECK(law.mean() == doctest::Approx(0.25 * 4.0 - 0.75 * 2.0));
    CHECK(law.rate_sup() == doctest::Approx(-std::log(0.25)));
}

TEST_CASE("sampling matches the law's moments") {
    CounterRng rng(7, 0);
    for (const auto& law :
         {IncrementLaw::gaussian(0.5, 2.0), IncrementLaw::uniform(-1.0, 3.0),
          IncrementLaw::shifted_exponential(2.0, 1.0),
          IncrementLaw::lattice({-1, 0, 2}, {0.2, 0.5, 0.3})}) {
        Welford w;
        for (int i = 0; i < 100000; ++i) w.add(law.sample(rng));
        CHECK(std::abs(w.mean() - law.mean()) < 5.0 * w.std_error());
        CHECK(w.variance() == doctest::Approx(law.variance()).epsilon(0.05));
    }
}

TEST_CASE("tilted samplers hit the tilted mean for every shipped law") {
    CounterRng rng(11, 0);
    for (const auto& law :
         {IncrementLaw::gaussian(0.0, 1.0), IncrementLaw::uniform(-2.0, 1.0),
          IncrementLaw::shifted_exponential(3.0, -1.0),
          IncrementLaw::lattice({-1, 0, 1}, {0.45, 0.35, 0.2})}) {
        for (double theta : {-0.8, 0.7, 2.0}) {
            if (!law.theta_in_domain(theta)) continue;
            Welford w;
            for (int i = 0; i < 100000; ++i) w.add(law.sample_tilted(theta, rng));
            const double target = law.log_mgf_d1(theta);
            CHECK(std::abs(w.mean() - target) < 5.0 * w.std_error());
        }
    }
}

TEST_CASE("tilted lattice masses renormalize exactly") {
    const auto law = IncrementLaw::lattice({-1, 0, 1}, {0.45, 0.35, 0.2});
    const auto w = law.tilted_lattice_masses(0.7);
    double total = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        total += w[i];
        mean += w[i] * law.lattice_points()[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mean == doctest::Approx(law.log_mgf_d1(0.7)).epsilon(1e-12));
}
