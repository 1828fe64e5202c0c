#include <doctest.h>

#include <cmath>

#include "brw/errors.hpp"
#include "brw/model.hpp"

using namespace brw;

namespace {

// Independent oracle for the rate function: golden-section maximization of
// theta * lambda - log phi(theta).
double golden_rate(const IncrementLaw& law, double lambda, double lo, double hi) {
    auto f = [&](double t) { return -(t * lambda - law.log_mgf(t)); };
    const double phi = 0.6180339887498949;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > 1e-12) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - phi * (hi - lo); f1 = f(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + phi * (hi - lo); f2 = f(x2);
        }
    }
    return -f(0.5 * (lo + hi));
}

}  // namespace

TEST_CASE("gaussian rate function is lambda^2/2") {
    const auto normal = IncrementLaw::gaussian(0.0, 1.0);
    const auto pt = rate_function(normal, 2.0);
    CHECK(pt.value == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(pt.argmax_theta == doctest::Approx(2.0).epsilon(1e-10));

    const auto tiny = rate_function(normal, 1e-9);
    CHECK(tiny.value == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("rademacher rate function matches the golden-section oracle") {
    const auto pm1 = IncrementLaw::rademacher();
    const auto pt = rate_function(pm1, 0.5);
    CHECK(pt.value == doctest::Approx(0.130812).epsilon(1e-5));
    CHECK(pt.argmax_theta == doctest::Approx(std::atanh(0.5)).epsilon(1e-9));
    CHECK(pt.value == doctest::Approx(golden_rate(pm1, 0.5, 1e-9, 5.0)).epsilon(1e-10));
}

TEST_CASE("rate function requires lambda above the mean and inside range") {
    const auto pm1 = IncrementLaw::rademacher();
    CHECK_THROWS_AS(rate_function(pm1, 0.0), DomainError);
    CHECK_THROWS_AS(rate_function(pm1, 1.0), DomainError);
    CHECK_THROWS_AS(rate_function(pm1, 1.5), DomainError);
}

TEST_CASE("rate function is convex on a sampled grid") {
    const auto law = IncrementLaw::lattice({-1, 0, 1}, {0.45, 0.35, 0.2});
    const double h = 0.05;
    double prev2 = 0, prev1 = 0;
    int have = 0;
    for (double lam = law.mean() + h; lam < 0.9; lam += h) {
        const double v = rate_function(law, lam).value;
        if (have >= 2) CHECK(prev2 + v - 2 * prev1 >= -1e-8);
        prev2 = prev1;
        prev1 = v;
        ++have;
    }
}

TEST_CASE("calibration closed form for gaussian rho=2") {
    const auto off = OffspringLaw::from_pmf({{2, 1.0}});
    const auto c = calibrate(off, IncrementLaw::gaussian(0.0, 1.0));
    const double ref = std::sqrt(2.0 * std::log(2.0));
    CHECK(c.c1 == doctest::Approx(ref).epsilon(1e-12));
    CHECK(c.theta_bar == doctest::Approx(ref).epsilon(1e-12));
    CHECK(c.c2 == doctest::Approx(3.0 / (2.0 * ref)).epsilon(1e-12));
    CHECK(c.log_rho == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("calibration survives a near-critical offspring mean") {
    const auto off = OffspringLaw::from_pmf({{1, 1.0 - 1e-7}, {2, 1e-7}});
    const auto c = calibrate(off, IncrementLaw::gaussian(0.0, 1.0));
    CHECK(c.c1 == doctest::Approx(std::sqrt(2.0 * std::log(off.rho()))).epsilon(1e-9));
    CHECK(c.c1 > 0.0);
}

TEST_CASE("two-point law with log rho at the entropy cap is rejected") {
    // sup I = -log(1/2) = log 2 exactly equals log rho: the speed equation
    // has no interior root.
    const auto off = OffspringLaw::from_pmf({{2, 1.0}});
    CHECK_THROWS_AS(calibrate(off, IncrementLaw::rademacher()), AssumptionError);
    // rho beyond the cap fails the same precondition.
    const auto off3 = OffspringLaw::from_pmf({{3, 1.0}});
    CHECK_THROWS_AS(calibrate(off3, IncrementLaw::rademacher()), AssumptionError);
}

TEST_CASE("rho=1.5 with +-1 steps calibrates; bisection oracle agrees") {
    const auto off = OffspringLaw::from_pmf({{1, 0.5}, {2, 0.5}});
    const auto pm1 = IncrementLaw::rademacher();
    const auto c = calibrate(off, pm1);
    // Bisection on F(theta) = theta tanh(theta) - log cosh(theta) - log(1.5).
    double lo = 0.1, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f = mid * std::tanh(mid) - std::log(std::cosh(mid)) -
                         std::log(1.5);
        (f < 0 ? lo : hi) = mid;
    }
    CHECK(c.theta_bar == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
    CHECK(c.c1 == doctest::Approx(std::tanh(c.theta_bar)).epsilon(1e-12));
}

TEST_CASE("calibration invariants hold for assorted models") {
    const auto off = OffspringLaw::from_pmf({{1, 0.5}, {2, 0.5}});
    for (const auto& inc :
         {IncrementLaw::gaussian(0.1, 1.3), IncrementLaw::uniform(-1.0, 1.5),
          IncrementLaw::shifted_exponential(2.5, -0.8),
          IncrementLaw::lattice({-1, 0, 1}, {0.45, 0.35, 0.2})}) {
        const auto c = calibrate(off, inc);
        // I(c1) = log rho via the independent rate-function route.
        const auto pt = rate_function(inc, c.c1);
        CHECK(std::abs(pt.value - c.log_rho) <= 1e-9);
        CHECK(std::abs(inc.log_mgf_d1(c.theta_bar) - c.c1) <= 1e-9);
        CHECK(c.c2 * 2.0 * c.theta_bar == doctest::Approx(3.0).epsilon(1e-15));
        // Fundamental identity rho phi(theta) e^(-theta c1) = 1.
        CHECK(std::exp(c.log_rho + inc.log_mgf(c.theta_bar) -
                       c.theta_bar * c.c1) == doctest::Approx(1.0).epsilon(1e-9));
        // Dual characterization: minimize (log rho + log phi(t))/t.
        auto dual = [&](double t) { return (c.log_rho + inc.log_mgf(t)) / t; };
        double best_t = 0, best_v = 1e300;
        const double cap = std::isfinite(inc.theta_domain().second)
                               ? inc.theta_domain().second * (1 - 1e-9)
                               : 12.0;
        for (double t = 1e-3; t < cap; t += 1e-4) {
            const double v = dual(t);
            if (v < best_v) { best_v = v; best_t = t; }
        }
        CHECK(std::abs(best_v - c.c1) <= 1e-8);
        CHECK(std::abs(best_t - c.theta_bar) <= 1e-3);
    }
}

TEST_CASE("centering formula and edge cases") {
    const auto off = OffspringLaw::from_pmf({{2, 1.0}});
    const auto c = calibrate(off, IncrementLaw::gaussian(0.0, 1.0));
    CHECK(c.centering(1.0) == doctest::Approx(c.c1).epsilon(1e-15));
    CHECK(c.centering(100.0) == doctest::Approx(111.874).epsilon(1e-4));
    // Linearity probe with real n.
    const double e = std::exp(1.0);
    CHECK(c.centering(e) - c.centering(1.0) ==
          doctest::Approx(c.c1 * (e - 1.0) - c.c2).epsilon(1e-12));
    CHECK_THROWS_AS(c.centering(0.0), DomainError);
    CHECK_THROWS_AS(c.centering(-3.0), DomainError);
}
