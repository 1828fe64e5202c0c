#include "brw/ballot.hpp"

#include <algorithm>
#include <cmath>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr double kMeanZeroTol = 1e-9;
constexpr double kDeepTailSwitch = 1e-6;

struct RawLattice {
    std::vector<std::int64_t> offs;
    std::vector<double> mass;
    double span = 1.0;
};

RawLattice raw_lattice(const TiltedLaw& walk, bool negate) {
    if (!walk.is_lattice())
        throw DomainError("dynamic program requires a lattice walk");
    RawLattice raw;
    raw.span = walk.base().lattice_span();
    raw.offs = walk.base().lattice_points();
    raw.mass = walk.lattice_masses();
    if (negate)
        for (auto& o : raw.offs) o = -o;
    return raw;
}

// bar[k] for k = 1..n-1 (k = 0 and k = n unused).
std::vector<double> barrier_thresholds(const BarrierSpec& barrier, int n) {
    std::vector<double> bar(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 1; k < n; ++k) bar[k] = barrier.value(k, n);
    return bar;
}

// Allowed minimum state index at threshold `bar`: curve values are snapped
// to the lattice conservatively toward inclusion for non-strict barriers.
std::int64_t min_allowed_state(double bar, double span, bool strict) {
    const double t = bar / span;
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    if (strict) return static_cast<std::int64_t>(std::floor(t + tol)) + 1;
    return static_cast<std::int64_t>(std::ceil(t - tol));
}

LatticeDistribution dp_core(const RawLattice& lat, int n, const BarrierSpec& barrier) {
    std::int64_t cmin = lat.offs.front(), cmax = lat.offs.front();
    for (auto o : lat.offs) {
        cmin = std::min(cmin, o);
        cmax = std::max(cmax, o);
    }
    const std::int64_t width = cmax - cmin;
    if (width == 0) throw DomainError("degenerate one-point step law");
    if (static_cast<double>(n) * static_cast<double>(width) > 1e7)
        throw CapacityError("lattice state space exceeds the 1e7 bound");

    const std::int64_t gmin = std::min<std::int64_t>(0, n * cmin) - width;
    const std::int64_t gmax = std::max<std::int64_t>(0, n * cmax) + width;
    const std::size_t size = static_cast<std::size_t>(gmax - gmin + 1);
    std::vector<double> cur(size, 0.0), nxt(size, 0.0);
    auto idx = [gmin](std::int64_t m) { return static_cast<std::size_t>(m - gmin); };

    cur[idx(0)] = 1.0;
    std::int64_t lo = 0, hi = 0;  // support of cur in state units
    const auto bar = barrier_thresholds(barrier, n);

    for (int k = 1; k <= n; ++k) {
        const std::int64_t nlo = lo + cmin, nhi = hi + cmax;
        std::fill(nxt.begin() + idx(nlo), nxt.begin() + idx(nhi) + 1, 0.0);
        for (std::size_t j = 0; j < lat.offs.size(); ++j) {
            const double w = lat.mass[j];
            if (w == 0.0) continue;
            const std::int64_t o = lat.offs[j];
            const double* src = cur.data() + idx(lo);
            double* dst = nxt.data() + idx(lo + o);
            const std::size_t len = static_cast<std::size_t>(hi - lo + 1);
            for (std::size_t i = 0; i < len; ++i) dst[i] += w * src[i];
        }
        lo = nlo;
        hi = nhi;
        if (k < n) {
            const std::int64_t mmin =
                min_allowed_state(bar[k], lat.span, barrier.strict);
            if (mmin > lo) {
                std::fill(nxt.begin() + idx(lo),
                          nxt.begin() + idx(std::min(mmin, hi + 1)), 0.0);
                lo = std::min(mmin, hi);
            }
        }
        cur.swap(nxt);
    }

    LatticeDistribution out;
    out.min_state = lo;
    out.span = lat.span;
    out.prob.assign(cur.begin() + idx(lo), cur.begin() + idx(hi) + 1);
    return out;
}

double window_sum(const LatticeDistribution& dist, const TerminalWindow& window,
                  double shift, bool reflect) {
    KahanSum s;
    for (std::size_t i = 0; i < dist.prob.size(); ++i) {
        if (dist.prob[i] == 0.0) continue;
        const double v = (dist.min_state + static_cast<std::int64_t>(i)) * dist.span + shift;
        if (window.contains(reflect ? -v : v)) s.add(dist.prob[i]);
    }
    return s.value();
}

Estimate mc_core(const TiltedLaw& walk, bool negate, int n, const BarrierSpec& barrier,
                 const TerminalWindow& window, bool reflect, std::size_t replicates,
                 std::uint64_t seed, std::optional<double> proposal_theta) {
    const auto bar = barrier_thresholds(barrier, n);
    const double drift_n = barrier.drift * n;

    // Deep-tail switch: if the normal approximation puts the window below
    // the switch threshold, sample under an extra tilt aimed at the window
    // midpoint and reweight.
    double theta_p = 0.0;
    double log_phi_rel = 0.0;
    bool use_is = false;
    if (!negate) {
        if (proposal_theta.has_value()) {
            theta_p = *proposal_theta;
            use_is = theta_p != 0.0;
        } else if (std::isfinite(window.b)) {
            const double sig = std::sqrt(walk.variance() * n);
            const double p_norm =
                normal_cdf(window.b / sig) - normal_cdf(window.a / sig);
            if (p_norm < kDeepTailSwitch) {
                const double mid = 0.5 * (window.a + window.b);
                const double target = mid / n - barrier.drift - walk.shift();
                try {
                    theta_p =
                        detail::solve_cumulant_mean(walk.base(), target) - walk.theta();
                    use_is = theta_p != 0.0;
                } catch (const DomainError&) {
                    use_is = false;  // window beyond reach; plain MC reports ~0
                }
            }
        }
        if (use_is) {
            log_phi_rel = walk.base().log_mgf(walk.theta() + theta_p) -
                          walk.base().log_mgf(walk.theta());
        }
    }
    const TiltedLaw sampler =
        use_is ? TiltedLaw(walk.base(), walk.theta() + theta_p, walk.shift()) : walk;

    Welford acc;
    CounterRng root(seed, 0);
    for (std::size_t rep = 0; rep < replicates; ++rep) {
        CounterRng rng = root.at(rep);
        double s = 0.0;
        bool alive = true;
        for (int k = 1; k <= n; ++k) {
            double x = sampler.sample(rng);
            if (negate) x = -x;
            s += x;
            if (k < n) {
                if (barrier.strict ? (s <= bar[k]) : (s < bar[k])) {
                    alive = false;
                    break;
                }
            }
        }
        double value = 0.0;
        if (alive) {
            const double v = s + drift_n;
            if (window.contains(reflect ? -v : v)) {
                value = use_is
                            ? std::exp(-theta_p * (s - n * walk.shift()) +
                                       n * log_phi_rel)
                            : 1.0;
            }
        }
        acc.add(value);
    }
    return Estimate{acc.mean(), acc.std_error(), replicates};
}

void check_mean_zero(const TiltedLaw& walk, const BarrierSpec& barrier) {
    const double m = walk.mean() + barrier.drift;
    if (std::abs(m) > kMeanZeroTol * std::max(1.0, std::abs(barrier.drift)))
        throw DomainError("walk is not mean zero after drift removal");
}

}  // namespace

BarrierSpec BarrierSpec::floor_at(double y, bool strict, double drift) {
    if (y < 0.0) throw DomainError("barrier depth y must be nonnegative");
    BarrierSpec b;
    b.y = y;
    b.strict = strict;
    b.drift = drift;
    return b;
}

BarrierSpec BarrierSpec::symmetric_log(double y, double coefficient, bool strict,
                                       double drift) {
    if (y < 0.0) throw DomainError("barrier depth y must be nonnegative");
    if (coefficient < 0.0) throw DomainError("curve coefficient must be nonnegative");
    BarrierSpec b;
    b.y = y;
    b.curve = Curve::SymmetricLog;
    b.coefficient = coefficient;
    b.strict = strict;
    b.drift = drift;
    return b;
}

BarrierSpec BarrierSpec::custom(double y, std::vector<double> h, bool strict,
                                double drift) {
    if (y < 0.0) throw DomainError("barrier depth y must be nonnegative");
    for (double v : h)
        if (v < 0.0) throw DomainError("custom curves must be nonnegative");
    if (!h.empty() && h.front() != 0.0)
        throw DomainError("curve must satisfy h(0) = 0");
    BarrierSpec b;
    b.y = y;
    b.curve = Curve::Custom;
    b.custom_h = std::move(h);
    b.strict = strict;
    b.drift = drift;
    return b;
}

double BarrierSpec::h_value(int k, int n) const {
    switch (curve) {
        case Curve::None:
            return 0.0;
        case Curve::SymmetricLog: {
            const int m = std::min(k, n - k);
            // (log(k ^ (n-k)))_+ with log 0 clipped by the positive part.
            return m >= 2 ? coefficient * std::log(static_cast<double>(m)) : 0.0;
        }
        case Curve::Custom:
            return k >= 0 && k < static_cast<int>(custom_h.size())
                       ? custom_h[static_cast<std::size_t>(k)]
                       : 0.0;
    }
    return 0.0;
}

Estimate mc_barrier_prob(const TiltedLaw& walk, int n, const BarrierSpec& barrier,
                         const TerminalWindow& window, std::size_t replicates,
                         std::uint64_t seed, std::optional<double> proposal_theta) {
    if (n < 1) throw DomainError("mc_barrier_prob requires n >= 1");
    if (replicates < 1) throw DomainError("mc_barrier_prob requires replicates >= 1");
    if (!(window.b > window.a)) throw DomainError("terminal window requires b > a");
    check_mean_zero(walk, barrier);
    return mc_core(walk, false, n, barrier, window, false, replicates, seed,
                   proposal_theta);
}

double dp_barrier_prob(const TiltedLaw& walk, int n, const BarrierSpec& barrier,
                       const TerminalWindow& window) {
    if (n < 1) throw DomainError("dp_barrier_prob requires n >= 1");
    if (!(window.b > window.a)) throw DomainError("terminal window requires b > a");
    const auto dist = dp_core(raw_lattice(walk, false), n, barrier);
    return window_sum(dist, window, barrier.drift * n, false);
}

double dp_barrier_prob(const IncrementLaw& walk, int n, const BarrierSpec& barrier,
                       const TerminalWindow& window) {
    return dp_barrier_prob(TiltedLaw(walk, 0.0), n, barrier, window);
}

LatticeDistribution dp_barrier_terminal(const TiltedLaw& walk, int n,
                                        const BarrierSpec& barrier) {
    if (n < 1) throw DomainError("dp_barrier_terminal requires n >= 1");
    return dp_core(raw_lattice(walk, false), n, barrier);
}

std::vector<ScalingRow> scaling_diagnostic(const TiltedLaw& walk,
                                           const BarrierSpec& barrier,
                                           const TerminalWindow& window,
                                           const std::vector<int>& n_list,
                                           std::size_t replicates, std::uint64_t seed,
                                           BallotEngine engine) {
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw DomainError("n_list must be strictly increasing");

    std::vector<ScalingRow> rows;
    rows.reserve(n_list.size());
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const int n = n_list[i];
        Estimate est;
        if (engine == BallotEngine::DynamicProgram) {
            est.p_hat = dp_barrier_prob(walk, n, barrier, window);
            est.std_err = 0.0;
        } else {
            est = mc_barrier_prob(walk, n, barrier, window, replicates,
                                  seed + static_cast<std::uint64_t>(i));
        }
        ScalingRow row;
        row.n = n;
        row.p_hat = est.p_hat;
        row.std_err = est.std_err;
        const double n32 = std::pow(static_cast<double>(n), 1.5);
        row.n32_p = n32 * est.p_hat;
        if (!rows.empty() && rows.back().p_hat > 0.0)
            row.ratio = est.p_hat / rows.back().p_hat;
        const double denom = window.length() * barrier.y * (barrier.y + window.a);
        row.beta_star_est =
            std::isfinite(denom) && denom != 0.0 ? row.n32_p / denom : 0.0;
        rows.push_back(row);
    }
    return rows;
}

double dp_positive_prob(const TiltedLaw& walk, int n) {
    const auto barrier = BarrierSpec::floor_at(0.0, /*strict=*/true);
    const auto window =
        TerminalWindow::half_open(0.0, std::numeric_limits<double>::infinity());
    return dp_barrier_prob(walk, n, barrier, window);
}

PositivityResult positivity_clt_diagnostic(const TiltedLaw& walk, int n, double q,
                                           std::size_t replicates, std::uint64_t seed,
                                           BallotEngine engine) {
    if (!(q > 0.0)) throw DomainError("profile window width q must be positive");
    if (n < 1) throw DomainError("positivity diagnostic requires n >= 1");
    if (std::abs(walk.variance() - 1.0) > 1e-9)
        throw DomainError("walk variance must be normalized to 1");

    PositivityResult out;
    const double sqn = std::sqrt(static_cast<double>(n));
    const double xmax = 4.0 * sqn;
    const std::size_t bins = static_cast<std::size_t>(std::ceil(xmax / q)) + 1;

    std::vector<double> mass(bins, 0.0);
    if (engine == BallotEngine::DynamicProgram) {
        const auto dist = dp_core(raw_lattice(walk, false),
                                  n, BarrierSpec::floor_at(0.0, true));
        KahanSum total;
        for (std::size_t i = 0; i < dist.prob.size(); ++i) {
            const double v =
                (dist.min_state + static_cast<std::int64_t>(i)) * dist.span;
            if (v <= 0.0 || dist.prob[i] == 0.0) continue;
            total.add(dist.prob[i]);
            const auto b = static_cast<std::size_t>(v / q);
            if (b < bins) mass[b] += dist.prob[i];
        }
        out.p_cn = Estimate{total.value(), 0.0, 0};
        out.conditional_hits = 0;
        if (out.p_cn.p_hat > 0.0)
            for (auto& m : mass) m /= out.p_cn.p_hat;
    } else {
        Welford acc;
        std::size_t hits = 0;
        CounterRng root(seed, 0);
        for (std::size_t rep = 0; rep < replicates; ++rep) {
            CounterRng rng = root.at(rep);
            double s = 0.0;
            bool alive = true;
            for (int k = 0; k < n; ++k) {
                s += walk.sample(rng);
                if (s <= 0.0) {
                    alive = false;
                    break;
                }
            }
            acc.add(alive ? 1.0 : 0.0);
            if (alive) {
                ++hits;
                const auto b = static_cast<std::size_t>(s / q);
                if (b < bins) mass[b] += 1.0;
            }
        }
        if (hits < 100)
            throw InsufficientSamples("fewer than 100 conditional positivity hits");
        out.p_cn = Estimate{acc.mean(), acc.std_error(), replicates};
        out.conditional_hits = hits;
        for (auto& m : mass) m /= static_cast<double>(hits);
    }

    out.rows.reserve(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        PositivityProfileRow row;
        row.x = static_cast<double>(b) * q;
        row.emp = sqn * mass[b];
        row.profile = q * row.x * std::exp(-row.x * row.x / (2.0 * n)) / sqn;
        out.sup_distance = std::max(out.sup_distance, std::abs(row.emp - row.profile));
        out.rows.push_back(row);
    }
    return out;
}

SandwichResult reversal_sandwich_check(const TiltedLaw& walk, int n,
                                       const BarrierSpec& barrier,
                                       const TerminalWindow& window,
                                       std::size_t replicates, std::uint64_t seed,
                                       BallotEngine engine) {
    if (!std::isfinite(window.a) || !std::isfinite(window.b))
        throw DomainError("reversed sandwich requires a finite window");
    check_mean_zero(walk, barrier);

    BarrierSpec lower_bar = barrier;
    lower_bar.y = barrier.y + window.a;
    lower_bar.drift = -barrier.drift;
    BarrierSpec upper_bar = barrier;
    upper_bar.y = barrier.y + window.b;
    upper_bar.drift = -barrier.drift;

    SandwichResult out;
    if (engine == BallotEngine::DynamicProgram) {
        const auto fwd = raw_lattice(walk, false);
        const auto rev = raw_lattice(walk, true);
        out.mid.p_hat = window_sum(dp_core(fwd, n, barrier), window,
                                   barrier.drift * n, false);
        out.lower.p_hat = window_sum(dp_core(rev, n, lower_bar), window,
                                     lower_bar.drift * n, true);
        out.upper.p_hat = window_sum(dp_core(rev, n, upper_bar), window,
                                     upper_bar.drift * n, true);
        const double slack = 1e-12;
        out.holds = out.lower.p_hat <= out.mid.p_hat + slack &&
                    out.mid.p_hat <= out.upper.p_hat + slack;
    } else {
        out.mid = mc_core(walk, false, n, barrier, window, false, replicates, seed,
                          std::nullopt);
        out.lower = mc_core(walk, true, n, lower_bar, window, true, replicates,
                            seed + 1, std::nullopt);
        out.upper = mc_core(walk, true, n, upper_bar, window, true, replicates,
                            seed + 2, std::nullopt);
        const double s1 = 3.0 * std::hypot(out.lower.std_err, out.mid.std_err);
        const double s2 = 3.0 * std::hypot(out.mid.std_err, out.upper.std_err);
        out.holds = out.lower.p_hat <= out.mid.p_hat + s1 &&
                    out.mid.p_hat <= out.upper.p_hat + s2;
    }
    return out;
}

}  // namespace brw
