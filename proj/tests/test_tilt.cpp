#include <doctest.h>

#include <cmath>

#include "brw/errors.hpp"
#include "brw/stats.hpp"
#include "brw/tilt.hpp"

using namespace brw;

TEST_CASE("solve_tilt closed forms") {
    const auto normal = IncrementLaw::gaussian(0.0, 1.0);
    const auto tilted = solve_tilt(normal, -0.5);
    CHECK(tilted.theta() == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(tilted.mean() == doctest::Approx(-0.5).epsilon(1e-12));

    const auto pm1 = IncrementLaw::rademacher();
    const auto t2 = solve_tilt(pm1, 0.25);
    CHECK(t2.theta() == doctest::Approx(std::atanh(0.25)).epsilon(1e-10));

    // Identity tilt is exact, not approximate.
    const auto id = solve_tilt(pm1, pm1.mean());
    CHECK(id.theta() == 0.0);

    CHECK_THROWS_AS(solve_tilt(pm1, 1.0), DomainError);
    CHECK_THROWS_AS(solve_tilt(pm1, -1.5), DomainError);
}

TEST_CASE("tilted law normalizes and reports moments") {
    const auto law = IncrementLaw::lattice({-1, 0, 1}, {0.45, 0.35, 0.2});
    const TiltedLaw tilted(law, 0.9, 0.3);
    CHECK(tilted.log_normalizer() == doctest::Approx(law.log_mgf(0.9)).epsilon(1e-14));
    CHECK(tilted.mean() ==
          doctest::Approx(law.log_mgf_d1(0.9) + 0.3).epsilon(1e-12));
    double total = 0.0;
    for (double m : tilted.lattice_masses()) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("tilted_sample is deterministic and matches its mean") {
    const auto normal = IncrementLaw::gaussian(0.0, 1.0);
    const auto tilted = solve_tilt(normal, -0.5);
    const auto xs = tilted_sample(tilted, 100000, 31);
    const auto ys = tilted_sample(tilted, 100000, 31);
    CHECK(xs == ys);
    Welford w;
    for (double x : xs) w.add(x);
    CHECK(std::abs(w.mean() + 0.5) < 4e-3);

    CHECK(tilted_sample(tilted, 0, 1).empty());

    const auto pm1 = solve_tilt(IncrementLaw::rademacher(), 0.0);
    const auto zs = tilted_sample(pm1, 1000000, 7);
    KahanSum s;
    for (double z : zs) s.add(z);
    CHECK(std::abs(s.value() / 1e6) < 4.0 / 1000.0);
}

TEST_CASE("walk_weight formula") {
    CHECK(walk_weight({}, 1.0, 0.5) == 0.0);
    const double xs[] = {1.0};
    CHECK(walk_weight(std::span<const double>(xs, 1), 1.0, 0.5) ==
          doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("importance reweighting is consistent with direct estimation") {
    // P(S_20 > 5) for standard normal steps, tilted proposal vs direct.
    const auto normal = IncrementLaw::gaussian(0.0, 1.0);
    const int n = 20;
    const double a = 5.0;
    const std::size_t reps = 100000;

    CounterRng root(515, 0);
    Welford direct;
    for (std::size_t r = 0; r < reps; ++r) {
        CounterRng rng = root.at(r);
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += normal.sample(rng);
        direct.add(s > a ? 1.0 : 0.0);
    }

    const double theta_p = a / n;  // tilt the mean onto the threshold
    const TiltedLaw proposal(normal, theta_p);
    const double log_phi = normal.log_mgf(theta_p);
    CounterRng root2(516, 0);
    Welford weighted;
    std::vector<double> steps(n);
    for (std::size_t r = 0; r < reps; ++r) {
        CounterRng rng = root2.at(r);
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            steps[k] = proposal.sample(rng);
            s += steps[k];
        }
        weighted.add(s > a ? std::exp(walk_weight(steps, theta_p, log_phi)) : 0.0);
    }
    const double joint = std::hypot(direct.std_error(), weighted.std_error());
    CHECK(std::abs(direct.mean() - weighted.mean()) <= 4.0 * joint);
    // The tilted estimator must actually be sharper on this tail.
    CHECK(weighted.std_error() < direct.std_error());
}
