#include <doctest.h>

#include <cmath>
#include <vector>

#include "brw/rng.hpp"
#include "brw/stats.hpp"

using namespace brw;

TEST_CASE("counter rng is a pure function of (seed, stream, counter)") {
    CounterRng a(42, 7), b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    CounterRng c(42, 8);
    bool differs = false;
    CounterRng a2(42, 7);
    for (int i = 0; i < 10; ++i) differs = differs || (a2.next_u64() != c.next_u64());
    CHECK(differs);
}

TEST_CASE("substream derivation is independent of draw order") {
    CounterRng root(5, 0);
    CounterRng s1 = root.at(3);
    root.next_u64();
    CounterRng s2 = root.at(3);
    CHECK(s1.next_u64() == s2.next_u64());
}

TEST_CASE("uniforms land in (0,1) with the right first two moments") {
    CounterRng rng(2024, 1);
    Welford w;
    for (int i = 0; i < 200000; ++i) {
        const double u = rng.next_double();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        w.add(u);
    }
    CHECK(std::abs(w.mean() - 0.5) < 5.0 * w.std_error());
    CHECK(std::abs(w.variance() - 1.0 / 12.0) < 0.001);
}

TEST_CASE("gaussians have unit variance and vanishing skew") {
    CounterRng rng(99, 2);
    Welford w;
    double m3 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.next_gauss();
        w.add(g);
        m3 += g * g * g;
    }
    CHECK(std::abs(w.mean()) < 5.0 * w.std_error());
    CHECK(std::abs(w.variance() - 1.0) < 0.02);
    CHECK(std::abs(m3 / n) < 0.03);
}

TEST_CASE("welford merge matches a single pass") {
    CounterRng rng(1, 1);
    Welford all, left, right;
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.next_double();
        all.add(x);
        (i % 2 == 0 ? left : right).add(x);
    }
    left.merge(right);
    CHECK(left.count() == all.count());
    CHECK(left.mean() == doctest::Approx(all.mean()).epsilon(1e-12));
    CHECK(left.variance() == doctest::Approx(all.variance()).epsilon(1e-10));
}

TEST_CASE("jackknife ratio error shrinks like 1/sqrt(n)") {
    CounterRng rng(3, 3);
    std::vector<double> num, den;
    for (int i = 0; i < 4000; ++i) {
        den.push_back(1.0 + rng.next_double());
        num.push_back(0.5 * den.back() + 0.1 * rng.next_gauss());
    }
    const double se_full = jackknife_ratio_std_err(num, den);
    std::vector<double> num_half(num.begin(), num.begin() + 1000);
    std::vector<double> den_half(den.begin(), den.begin() + 1000);
    const double se_half = jackknife_ratio_std_err(num_half, den_half);
    CHECK(se_full < se_half);
    CHECK(se_full > 0.0);
    CHECK(se_half / se_full == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("dkw band matches the closed form") {
    CHECK(dkw_epsilon(1000000, 1e-3) ==
          doctest::Approx(std::sqrt(std::log(2000.0) / 2e6)));
}
