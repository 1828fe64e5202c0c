#include "brw/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "brw/analysis.hpp"
#include "brw/ballot.hpp"
#include "brw/csv.hpp"
#include "brw/errors.hpp"
#include "brw/oracle.hpp"
#include "brw/runner.hpp"
#include "brw/tilt.hpp"

namespace brw::acceptance {

struct Context {
    Options opt;
    double companion_alpha = 0.0;    // from the A09 companion tail fit
    double companion_theta = 0.0;
    bool companion_fit_ok = false;
};

namespace {

namespace fs = std::filesystem;

OffspringLaw binary_offspring() { return OffspringLaw::from_pmf({{2, 1.0}}); }
OffspringLaw companion_offspring() {
    return OffspringLaw::from_pmf({{1, 0.5}, {2, 0.5}});
}
IncrementLaw pm1_steps() { return IncrementLaw::rademacher(); }
IncrementLaw companion_steps() {
    return IncrementLaw::lattice({-1, 0, 1}, {0.45, 0.35, 0.20});
}
IncrementLaw gauss_steps() { return IncrementLaw::gaussian(0.0, 1.0); }

std::string fmt(double v, int prec = 5) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    return buf;
}

std::size_t scaled(const Context& ctx, std::size_t full) {
    if (!ctx.opt.quick) return full;
    return std::max<std::size_t>(full / 100, 4000);
}

// Golden-section minimizer for the dual characterization check.
double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  double tol) {
    const double phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

// Law of the subtree maximum for deterministic binary branching with +-1
// steps, by exact configuration counting: counts[v] is the number of step
// assignments of a depth-d subtree whose maximum displacement equals v.
// Equivalent to enumerating all 2^(2^(d+1)-2) configurations.
std::map<int, long long> enumerate_binary_pm1(int depth) {
    std::map<int, long long> counts{{0, 1}};
    for (int d = 1; d <= depth; ++d) {
        std::map<int, long long> next;
        for (const auto& [v1, c1] : counts) {
            for (const auto& [v2, c2] : counts) {
                for (int e1 : {-1, 1}) {
                    for (int e2 : {-1, 1}) {
                        next[std::max(e1 + v1, e2 + v2)] += c1 * c2;
                    }
                }
            }
        }
        counts = std::move(next);
    }
    return counts;
}

struct EventMoments {
    double e_lambda = 0.0;
    double e_gamma = 0.0;
    double p_exceed = 0.0;
};

// Exact first moments of the truncated counts and the exceedance
// probability via the ballot dynamic program and the max-law recursion:
// E Lambda = rho^(n-ell) * sum_s nu(s) gamma_ell(z - eta_bar(s)).
EventMoments exact_event_moments(const OffspringLaw& off, const IncrementLaw& inc,
                                 const ModelConstants& constants, int n, double z,
                                 int ell) {
    const int m = n - ell;
    const double mn = constants.centering(n);
    const double slope = mn / n;
    const double lift = 0.5 * std::log(static_cast<double>(ell));

    auto pts = inc.lattice_points();
    for (auto& p : pts) p = -p;
    std::vector<std::int64_t> rp(pts.rbegin(), pts.rend());
    auto ms = inc.lattice_masses();
    std::vector<double> rm(ms.rbegin(), ms.rend());
    const IncrementLaw neg = IncrementLaw::lattice(rp, rm, inc.lattice_span());

    const MaxCdf depth_law = exact_max_law(off, inc, ell);
    auto gamma_val = [&](double y) { return depth_law.survival(ell * slope + y); };

    auto terminal = [&](const BarrierSpec& bar) {
        return dp_barrier_terminal(TiltedLaw(neg, 0.0), m, bar);
    };
    BarrierSpec bar_e;
    bar_e.y = z;
    bar_e.drift = slope;
    std::vector<double> bump(static_cast<std::size_t>(m) + 1, 0.0);
    for (int j = 0; j <= m; ++j) {
        const int mm = std::min(j, m - j);
        bump[j] = mm >= 2 ? 4.0 / constants.theta_bar * std::log(mm) : 0.0;
    }
    BarrierSpec bar_f = BarrierSpec::custom(0.0, bump, false, slope);
    bar_f.y = z + lift;

    EventMoments out;
    const double log_rho_m = m * std::log(off.rho());
    for (int which = 0; which < 2; ++which) {
        const auto dist = terminal(which == 0 ? bar_e : bar_f);
        const double cap = which == 0 ? z : z + lift;
        KahanSum acc;
        for (std::size_t i = 0; i < dist.prob.size(); ++i) {
            if (dist.prob[i] == 0.0) continue;
            const double raw =
                (dist.min_state + static_cast<std::int64_t>(i)) * dist.span;
            const double eta_bar = -(raw + slope * m);
            if (eta_bar > cap + 1e-12) continue;
            acc.add(dist.prob[i] * gamma_val(z - eta_bar));
        }
        const double v = acc.value() * std::exp(log_rho_m);
        if (which == 0) out.e_lambda = v;
        else out.e_gamma = v;
    }
    const MaxCdf horizon_law = exact_max_law(off, inc, n);
    out.p_exceed = horizon_law.survival(mn + z);
    return out;
}

}  // namespace

CriterionResult a01_calibration(Context&) {
    CriterionResult r{"A01", "calibration exactness (gaussian, rho = 2)"};
    const auto off = binary_offspring();
    const auto inc = gauss_steps();
    const auto c = calibrate(off, inc);
    const double ref = std::sqrt(2.0 * std::log(2.0));
    const double e1 = std::abs(c.c1 - ref);
    const double e2 = std::abs(c.theta_bar - c.c1);
    const double e3 = std::abs(c.c2 - 3.0 / (2.0 * c.theta_bar));

    auto dual = [&](double t) { return (std::log(2.0) + inc.log_mgf(t)) / t; };
    const double arg = golden_min(dual, 1e-3, 10.0, 1e-10);
    const double e4 = std::abs(dual(arg) - c.c1);
    const double e5 = std::abs(arg - c.theta_bar);

    r.pass = e1 <= 1e-10 && e2 <= 1e-10 && e3 <= 1e-12 && e4 <= 1e-8 && e5 <= 1e-6;
    r.detail = "|c1-sqrt(2ln2)|=" + fmt(e1) + " |theta-c1|=" + fmt(e2) +
               " |c2-3/(2theta)|=" + fmt(e3) + " dual value gap=" + fmt(e4) +
               " dual argmin gap=" + fmt(e5);
    return r;
}

CriterionResult a02_oracle_enumeration(Context&) {
    CriterionResult r{"A02", "oracle equals configuration enumeration (binary/+-1)"};
    const auto off = binary_offspring();
    const auto inc = pm1_steps();
    double worst = 0.0;
    double p2_err = 0.0;
    for (int n : {1, 2, 4}) {
        const auto counts = enumerate_binary_pm1(n);
        long long total = 0;
        for (const auto& [v, c] : counts) total += c;
        const MaxCdf law = exact_max_law(off, inc, n);
        long long below = 0;
        for (int x = -n; x <= n; ++x) {
            const auto it = counts.find(x);
            if (it != counts.end()) below += it->second;
            const double ref = static_cast<double>(below) / static_cast<double>(total);
            worst = std::max(worst, std::abs(law.cdf(x) - ref));
        }
        if (n == 2) p2_err = std::abs(law.cdf(0.0) - 25.0 / 64.0);
    }
    r.pass = worst <= 1e-12 && p2_err <= 1e-15;
    r.detail = "sup cdf gap=" + fmt(worst) + " |P(max_2<=0)-25/64|=" + fmt(p2_err);
    return r;
}

CriterionResult a03_simulator_dkw(Context& ctx) {
    CriterionResult r{"A03", "simulator fidelity, DKW at level 1e-3 (binary/+-1, n=12)"};
    const auto off = binary_offspring();
    const auto inc = pm1_steps();
    const int n = 12;
    const std::size_t reps = scaled(ctx, 1'000'000);

    std::vector<float> maxes(reps);
    BatchOptions opts;
    opts.replicates = reps;
    opts.workers = ctx.opt.workers;
    opts.seed = ctx.opt.seed + 3;
    run_batch(off, inc, nullptr, n, PruneRule::none(), QuerySet{}, opts,
              [&](std::size_t rep, RunRecord&& rec) {
                  maxes[rep] = static_cast<float>(rec.max_final);
              });

    std::vector<std::size_t> hist(2 * n + 1, 0);
    for (float m : maxes)
        ++hist[static_cast<std::size_t>(std::llround(m) + n)];
    const MaxCdf law = exact_max_law(off, inc, n);
    double sup = 0.0;
    std::size_t acc = 0;
    for (int x = -n; x <= n; ++x) {
        acc += hist[static_cast<std::size_t>(x + n)];
        const double emp = static_cast<double>(acc) / static_cast<double>(reps);
        sup = std::max(sup, std::abs(emp - law.cdf(x)));
    }
    const double band = dkw_epsilon(reps, 1e-3);
    r.pass = sup <= band;
    r.detail = "sup|F_hat-F|=" + fmt(sup) + " band=" + fmt(band) +
               " replicates=" + std::to_string(reps);
    return r;
}

CriterionResult a04_martingale_means(Context& ctx) {
    CriterionResult r{"A04", "martingale means Y_k ~ 1, Z_k ~ 0 (gaussian, rho = 2)"};
    const auto off = binary_offspring();
    const auto inc = gauss_steps();
    const auto constants = calibrate(off, inc);
    const int n = 12;
    const std::size_t reps = scaled(ctx, 100'000);

    QuerySet qs;
    qs.record_traces = true;
    BatchOptions opts;
    opts.replicates = reps;
    opts.workers = ctx.opt.workers;
    opts.seed = ctx.opt.seed + 4;
    auto records = collect_batch(off, inc, &constants, n, PruneRule::none(), qs, opts);
    const auto summary = martingale_traces(records);

    double worst_y = 0.0, worst_z = 0.0;
    bool pass = std::abs(summary.mean_y[0] - 1.0) == 0.0 && summary.mean_z[0] == 0.0;
    for (std::size_t k = 1; k <= static_cast<std::size_t>(n); ++k) {
        worst_y = std::max(worst_y, std::abs(summary.mean_y[k] - 1.0) / summary.se_y[k]);
        worst_z = std::max(worst_z, std::abs(summary.mean_z[k]) / summary.se_z[k]);
    }
    pass = pass && worst_y <= 5.0 && worst_z <= 5.0;
    r.pass = pass;
    r.detail = "max|Y-1|/se=" + fmt(worst_y) + " max|Z|/se=" + fmt(worst_z) +
               " over k<=12, replicates=" + std::to_string(reps);
    return r;
}

CriterionResult a05_ballot_scaling(Context& ctx) {
    CriterionResult r{"A05", "ballot n^(3/2) scaling (+-1 walk, y=3, window (0,2])"};
    const TiltedLaw walk(pm1_steps(), 0.0);
    const auto barrier = BarrierSpec::floor_at(3.0);
    const auto window = TerminalWindow::half_open(0.0, 2.0);
    const std::vector<int> n_list{128, 256, 512, 1024, 2048};

    const auto dp_rows = scaling_diagnostic(walk, barrier, window, n_list, 0,
                                            ctx.opt.seed, BallotEngine::DynamicProgram);
    const double a = dp_rows[n_list.size() - 2].n32_p;
    const double b = dp_rows[n_list.size() - 1].n32_p;
    const double spread = std::abs(b - a) / (0.5 * (a + b));

    const std::size_t reps = scaled(ctx, 200'000);
    double worst_sigma = 0.0;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const auto est = mc_barrier_prob(walk, n_list[i], barrier, window, reps,
                                         ctx.opt.seed + 50 + i);
        if (est.std_err > 0.0)
            worst_sigma = std::max(
                worst_sigma, std::abs(est.p_hat - dp_rows[i].p_hat) / est.std_err);
    }
    r.pass = spread <= 0.10 && worst_sigma <= 4.0;
    r.detail = "top-octave spread=" + fmt(spread) + " (n32p " + fmt(a) + " -> " +
               fmt(b) + "), worst MC-DP sigma=" + fmt(worst_sigma);
    return r;
}

namespace {

double beta_star_ratio(int n) {
    const TiltedLaw walk(pm1_steps(), 0.0);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double y : {10.0, 15.0, 20.0}) {
        const auto barrier = BarrierSpec::floor_at(y);
        const auto window = TerminalWindow::half_open(y, y + 2.0);
        const double p = dp_barrier_prob(walk, n, barrier, window);
        const double v =
            std::pow(n, 1.5) * p / (window.length() * y * (y + window.a));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi / lo;
}

}  // namespace

CriterionResult a06_beta_star_stated(Context&) {
    CriterionResult r{"A06", "beta* structure at n=2048 (y in {10,15,20}, a=y)"};
    const double ratio = beta_star_ratio(2048);
    r.pass = ratio <= 1.15;
    r.detail = "pairwise max ratio=" + fmt(ratio) +
               " (bound 1.15); the terminal windows sit at height up to 2y where "
               "the Gaussian window factor exp(-(2y)^2/2n) still varies by ~40% "
               "at n=2048, so the normalized values cannot agree yet; see A06S";
    return r;
}

CriterionResult a06s_beta_star_supplement(Context& ctx) {
    CriterionResult r{"A06S", "beta* structure past the window transient (n=65536)"};
    const int n = ctx.opt.quick ? 8192 : 65536;
    const double ratio = beta_star_ratio(n);
    const double ratio_2048 = beta_star_ratio(2048);
    r.pass = ratio <= 1.15 && ratio < ratio_2048;
    r.detail = "pairwise max ratio=" + fmt(ratio) + " at n=" + std::to_string(n) +
               " (was " + fmt(ratio_2048) + " at 2048); bound 1.15";
    return r;
}

namespace {

struct DriftRatios {
    double plus = 0.0;
    double minus = 0.0;
};

DriftRatios drift_ratios_raw(int n) {
    const auto window = TerminalWindow::half_open(0.0, 2.0);
    const double d = 2.0 * std::log(static_cast<double>(n)) / n;
    const TiltedLaw base(pm1_steps(), 0.0);
    const double p0 =
        dp_barrier_prob(base, n, BarrierSpec::floor_at(3.0), window);
    DriftRatios out;
    for (int sign : {+1, -1}) {
        const double dd = sign * d;
        const TiltedLaw walk = solve_tilt(pm1_steps(), -dd);
        const double p = dp_barrier_prob(walk, n, BarrierSpec::floor_at(3.0, false, dd),
                                         window);
        (sign > 0 ? out.plus : out.minus) = p / p0;
    }
    return out;
}

// Average the floor over a unit cell and the window over a lattice period,
// the smoothing the lattice adaptation of the ballot limits calls for.
double smoothed_prob(int n, double drift) {
    const TiltedLaw walk =
        drift == 0.0 ? TiltedLaw(pm1_steps(), 0.0) : solve_tilt(pm1_steps(), -drift);
    double acc = 0.0;
    int count = 0;
    for (double w : {0.0, 0.25, 0.5, 0.75}) {
        BarrierSpec bar = BarrierSpec::floor_at(3.0 + w, false, drift);
        for (double u : {0.0, 0.5, 1.0, 1.5}) {
            acc += dp_barrier_prob(walk, n, bar,
                                   TerminalWindow::half_open(0.0 - u, 2.0 - u));
            ++count;
        }
    }
    return acc / count;
}

}  // namespace

CriterionResult a07_drift_stated(Context&) {
    CriterionResult r{"A07", "drift robustness |d|=2log(n)/n (+-1 walk, as stated)"};
    const auto r512 = drift_ratios_raw(512);
    const auto r2048 = drift_ratios_raw(2048);
    auto in_band = [](double v) { return v >= 0.8 && v <= 1.25; };
    const bool toward = std::abs(r2048.plus - 1.0) <= std::abs(r512.plus - 1.0) &&
                        std::abs(r2048.minus - 1.0) <= std::abs(r512.minus - 1.0);
    r.pass = in_band(r2048.plus) && in_band(r2048.minus) && toward;
    r.detail = "ratios n=512: +" + fmt(r512.plus) + "/-" + fmt(r512.minus) +
               ", n=2048: +" + fmt(r2048.plus) + "/-" + fmt(r2048.minus) +
               "; for the +-1 lattice the strict and non-strict floor constants "
               "differ by the floor atom (about (y/(y+1))((y+a)/(y+a+1)) ~ 0.63 "
               "at y=3), so the drifted/undrifted ratio does not approach 1 "
               "pointwise; see A07S";
    return r;
}

CriterionResult a07s_drift_supplement(Context&) {
    CriterionResult r{"A07S",
                      "drift robustness after floor/window cell-averaging"};
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::string vals;
    for (int n : {512, 2048}) {
        const double d = 2.0 * std::log(static_cast<double>(n)) / n;
        const double p0 = smoothed_prob(n, 0.0);
        for (int sign : {+1, -1}) {
            const double ratio = smoothed_prob(n, sign * d) / p0;
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
            vals += (sign > 0 ? " +" : " -") + std::to_string(n) + ":" + fmt(ratio);
        }
    }
    r.pass = lo >= 0.8 && hi <= 1.25;
    r.detail = "cell-averaged ratios" + vals + " all within [0.8, 1.25]";
    return r;
}

CriterionResult a08_positivity_clt(Context&) {
    CriterionResult r{"A08", "positivity probability sqrt(n) P(C_n) stability"};
    const TiltedLaw walk(pm1_steps(), 0.0);
    std::vector<double> scaled_p;
    for (int n : {256, 1024, 4096})
        scaled_p.push_back(std::sqrt(static_cast<double>(n)) *
                           dp_positive_prob(walk, n));
    const double r1 = scaled_p[1] / scaled_p[0];
    const double r2 = scaled_p[2] / scaled_p[1];
    r.pass = std::abs(r1 - 1.0) <= 0.03 && std::abs(r2 - 1.0) <= 0.03;
    r.detail = "sqrt(n)P(C_n)=" + fmt(scaled_p[0]) + ", " + fmt(scaled_p[1]) + ", " +
               fmt(scaled_p[2]) + "; successive ratios " + fmt(r1) + ", " + fmt(r2);
    return r;
}

namespace {

CriterionResult blocked_by_boundary(const std::string& id, const std::string& name) {
    CriterionResult r{id, name};
    r.blocked = true;
    r.pass = false;
    try {
        calibrate(binary_offspring(), pm1_steps());
        r.detail = "unexpected: boundary model calibrated";
    } catch (const AssumptionError& e) {
        r.detail = std::string("stated model rejected by calibration: ") + e.what() +
                   "; log(2) equals the entropy sup of the +-1 step law, so the "
                   "speed equation has no interior root (theta would diverge and "
                   "m_n + z would exceed the walk's maximal displacement)";
    }
    return r;
}

}  // namespace

CriterionResult a09_tail_stated(Context&) {
    return blocked_by_boundary(
        "A09", "tail shape at n=512 (binary/+-1 oracle tails, as stated)");
}

CriterionResult a09l_tail_companion(Context& ctx) {
    CriterionResult r{"A09L",
                      "tail shape at n=512 (companion: rho=1.5, steps -1/0/+1)"};
    const auto off = companion_offspring();
    const auto inc = companion_steps();
    const auto constants = calibrate(off, inc);
    const MaxCdf law = exact_max_law(off, inc, 512);

    std::vector<double> z_fit;
    for (int z = 2; z <= 16; ++z) z_fit.push_back(z);
    const auto tail = centered_tail(law, constants, z_fit);
    const auto fit = fit_tail(to_observations(tail));
    const double rel = std::abs(fit.theta_hat - constants.theta_bar) / constants.theta_bar;

    std::vector<TailObservation> tight;
    for (const auto& pt : tail)
        if (pt.z_used >= 1.0 && pt.z_requested <= 12.0)
            tight.push_back({pt.z_used, pt.survival, 0});
    const auto [lo, hi] = tail_tightness_range(tight, constants.theta_bar);
    const double factor = hi / lo;

    r.pass = rel <= 0.15 && factor <= 3.0;
    r.detail = "theta_hat=" + fmt(fit.theta_hat) + " vs theta_bar=" +
               fmt(constants.theta_bar) + " (rel " + fmt(rel) +
               ", bound 0.15); tightness factor=" + fmt(factor) +
               " over z in [2,12] (bound 3); alpha_hat=" + fmt(fit.alpha_hat);
    ctx.companion_alpha = fit.alpha_hat;
    ctx.companion_theta = constants.theta_bar;
    ctx.companion_fit_ok = r.pass;
    return r;
}

CriterionResult a10_moment_ratios_stated(Context&) {
    return blocked_by_boundary(
        "A10", "moment ratios at n=128 (binary/+-1, as stated)");
}

CriterionResult a10l_moment_ratios_companion(Context& ctx) {
    CriterionResult r{"A10L", "moment ratios vs exact first moments (companion, n=128)"};
    const auto off = companion_offspring();
    const auto inc = companion_steps();
    const auto constants = calibrate(off, inc);
    const int n = 128;
    const double mn = constants.centering(n);
    const std::size_t reps = scaled(ctx, 1'000'000);

    const std::vector<double> zs{4.0, 6.0, 8.0};
    QuerySet qs;
    std::vector<int> ells;
    for (double z : zs) {
        const int ell = QuerySet::default_ell(z);
        ells.push_back(ell);
        qs.add_event(BarrierEventQuery::Family::E, z, ell);
        qs.add_event(BarrierEventQuery::Family::F, z, ell);
    }

    std::vector<std::vector<std::int64_t>> lam(zs.size()), gam(zs.size());
    std::vector<std::vector<std::uint8_t>> exc(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
        lam[i].resize(reps);
        gam[i].resize(reps);
        exc[i].resize(reps);
    }
    // Exact prune: particles below m_n + z_min - (n - j) * (top step) cannot
    // reach m_n + z_min, so every recorded event is bias-free.
    const double smax = inc.support_max();
    const PruneRule prune = PruneRule::below_line(
        smax, mn + zs.front() - n * smax, /*audit=*/false);
    BatchOptions opts;
    opts.replicates = reps;
    opts.workers = ctx.opt.workers;
    opts.seed = ctx.opt.seed + 10;
    run_batch(off, inc, &constants, n, prune, qs, opts,
              [&](std::size_t rep, RunRecord&& rec) {
                  for (std::size_t i = 0; i < zs.size(); ++i) {
                      lam[i][rep] = rec.event_counts[2 * i];
                      gam[i][rep] = rec.event_counts[2 * i + 1];
                      exc[i][rep] = rec.max_final > mn + zs[i] ? 1 : 0;
                  }
              });

    bool pass = true;
    std::string detail;
    double prev_gl = std::numeric_limits<double>::infinity();
    double prev_ll = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const auto row = moment_ratios(lam[i], gam[i], exc[i], zs[i], ells[i]);
        const auto exact = exact_event_moments(off, inc, constants, n, zs[i], ells[i]);

        Welford wl, wg;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            wl.add(static_cast<double>(lam[i][rep]));
            wg.add(static_cast<double>(gam[i][rep]));
        }
        const double sig_l =
            wl.std_error() > 0 ? std::abs(row.e_lambda - exact.e_lambda) / wl.std_error()
                               : 0.0;
        const double sig_g =
            wg.std_error() > 0 ? std::abs(row.e_gamma - exact.e_gamma) / wg.std_error()
                               : 0.0;
        pass = pass && sig_l <= 4.0 && sig_g <= 4.0;

        // Trend toward 1 with 2 se slack, exactly as the first moments do.
        if (i > 0) {
            pass = pass &&
                   row.gamma_over_lambda <= prev_gl + 2.0 * row.se_gamma_over_lambda;
            pass = pass && row.lambda_sq_over_lambda <=
                               prev_ll + 2.0 * row.se_lambda_sq_over_lambda;
        }
        prev_gl = row.gamma_over_lambda;
        prev_ll = row.lambda_sq_over_lambda;

        const double exact_pl = exact.p_exceed / exact.e_lambda;
        const double sig_pl =
            row.se_p_over_lambda > 0
                ? std::abs(row.p_over_lambda - exact_pl) / row.se_p_over_lambda
                : 0.0;
        pass = pass && sig_pl <= 4.0;
        if (i + 1 == zs.size()) {
            pass = pass && row.lambda_sq_over_lambda <= 1.5;
            detail = "z=8: EG/EL=" + fmt(row.gamma_over_lambda) + " (exact " +
                     fmt(exact.e_gamma / exact.e_lambda) + "), EL2/EL=" +
                     fmt(row.lambda_sq_over_lambda) + " (bound 1.5), P/EL=" +
                     fmt(row.p_over_lambda) + " (exact " + fmt(exact_pl) +
                     "); worst oracle sigmas " + fmt(sig_l) + "/" + fmt(sig_g) + "/" +
                     fmt(sig_pl);
        }
    }
    r.pass = pass;
    r.detail = detail + "; replicates=" + std::to_string(reps);
    return r;
}

CriterionResult a11_mixture_stated(Context&) {
    return blocked_by_boundary(
        "A11", "Gumbel-mixture law at k=8, n=256 (binary/+-1, as stated)");
}

CriterionResult a11l_mixture_companion(Context& ctx) {
    CriterionResult r{"A11L", "Gumbel-mixture structure at k=8, n=256 (companion)"};
    if (!ctx.companion_fit_ok) {
        r.detail = "companion tail fit unavailable (A09L failed)";
        return r;
    }
    const auto off = companion_offspring();
    const auto inc = companion_steps();
    const auto constants = calibrate(off, inc);
    const int n = 256, k = 8;
    const double theta = constants.theta_bar;
    const double mn = constants.centering(n);
    const double mk = constants.centering(n - k);
    const double t = std::round(mn + 3.0);  // z_probe snapped to the lattice
    const double z_eff = t - mn;
    const std::size_t reps = scaled(ctx, 1'000'000);

    // Plug-in tail scale at the matched subtree horizon n - k: the
    // prediction approximates the depth-(n-k) survival, so alpha is fitted
    // from that law over the effective argument window.
    const MaxCdf sub_law = exact_max_law(off, inc, n - k);
    std::vector<double> z_fit;
    for (int z = 2; z <= 14; ++z) z_fit.push_back(z);
    const auto sub_tail = centered_tail(sub_law, constants, z_fit);
    const auto sub_fit = fit_tail(to_observations(sub_tail));
    const double alpha = sub_fit.alpha_hat;

    struct Row {
        double z8;
        double y8;
        double pred;
        std::uint8_t below;
        std::uint8_t kept;
    };
    std::vector<Row> rows(reps);

    QuerySet qs;
    qs.record_traces = true;
    qs.traces_upto = k;
    qs.snapshot_generation = k;
    // Gap prune for the bulk of the run plus the exact reachability line
    // for the terminal exceedance event.
    const PruneRule prune =
        PruneRule::gap_and_line(7.0, inc.support_max(),
                                t - n * inc.support_max(), /*audit=*/true);
    BatchOptions opts;
    opts.replicates = reps;
    opts.workers = ctx.opt.workers;
    opts.seed = ctx.opt.seed + 11;
    const double x_floor = 1.0 / theta;
    run_batch(off, inc, &constants, n, prune, qs, opts,
              [&](std::size_t rep, RunRecord&& rec) {
                  Row row;
                  row.z8 = rec.z_trace[k];
                  row.y8 = rec.y_trace[k];
                  row.below = rec.max_final <= t ? 1 : 0;
                  double log_pred = 0.0;
                  bool kept = true;
                  for (double eta : rec.snapshot_positions) {
                      const double x = t - mk - eta;
                      if (x < x_floor) {
                          kept = false;
                          break;
                      }
                      log_pred += std::log1p(-alpha * x * std::exp(-theta * x));
                  }
                  row.kept = kept ? 1 : 0;
                  row.pred = kept ? std::exp(log_pred) : 0.0;
                  rows[rep] = row;
              });

    std::vector<std::size_t> order;
    order.reserve(reps);
    for (std::size_t i = 0; i < reps; ++i)
        if (rows[i].kept) order.push_back(i);
    const double dropped =
        1.0 - static_cast<double>(order.size()) / static_cast<double>(reps);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return rows[a].z8 < rows[b].z8; });

    const int bins = 10;
    double stat = 0.0;
    double stat_limit_form = 0.0;
    const double decay = std::exp(-theta * z_eff);
    for (int b = 0; b < bins; ++b) {
        const std::size_t lo = order.size() * static_cast<std::size_t>(b) / bins;
        const std::size_t hi = order.size() * static_cast<std::size_t>(b + 1) / bins;
        if (hi - lo < 200) continue;
        KahanSum sum_pred, sum_below, var_acc, sum_z, sum_y;
        for (std::size_t i = lo; i < hi; ++i) {
            const Row& row = rows[order[i]];
            sum_pred.add(row.pred);
            sum_below.add(row.below);
            var_acc.add(row.pred * (1.0 - row.pred));
            sum_z.add(row.z8);
            sum_y.add(row.y8);
        }
        const double count = static_cast<double>(hi - lo);
        const double freq = sum_below.value() / count;
        const double pred = sum_pred.value() / count;
        const double se = std::sqrt(var_acc.value()) / count;
        if (se > 0.0) stat = std::max(stat, std::abs(freq - pred) / se);

        const double zbar = sum_z.value() / count;
        const double pred_limit = std::exp(-ctx.companion_alpha * zbar * decay);
        const double se_limit = binomial_std_err(pred_limit, hi - lo);
        if (se_limit > 0.0)
            stat_limit_form =
                std::max(stat_limit_form, std::abs(freq - pred_limit) / se_limit);
    }
    r.pass = stat <= 4.0;
    r.detail = "max bin deviation=" + fmt(stat) +
               " sigma (bound 4, pre-limit product prediction, " +
               std::to_string(order.size()) + " kept, dropped frac=" + fmt(dropped) +
               "); limit-form statistic exp(-alpha Zbar e^(-theta z))=" +
               fmt(stat_limit_form) + " sigma (the k -> infinity form; the "
               "additive-martingale term z Y_k is first order at k=8)";
    return r;
}

CriterionResult a12_barrier_bound(Context& ctx) {
    CriterionResult r{"A12", "curve-exceedance bound C stability (companion, n=32 vs 64)"};
    const auto off = companion_offspring();
    const auto inc = companion_steps();
    const auto constants = calibrate(off, inc);
    const double delta = constants.theta_bar / 32.0;
    const std::size_t reps = scaled(ctx, 1'000'000);

    std::vector<double> betas;
    for (int b = 2; b <= 10; ++b) betas.push_back(b);

    double c_fit[2] = {0.0, 0.0};
    bool monotone = true;
    std::string detail;
    const int n_list[2] = {32, 64};
    for (int which = 0; which < 2; ++which) {
        const int n = n_list[which];
        QuerySet qs;
        for (double b : betas) qs.add_gbeta(b);
        std::vector<std::vector<std::uint8_t>> flags(
            betas.size(), std::vector<std::uint8_t>(reps));
        const PruneRule prune = PruneRule::default_rule(constants, n);
        BatchOptions opts;
        opts.replicates = reps;
        opts.workers = ctx.opt.workers;
        opts.seed = ctx.opt.seed + 12 + which;
        run_batch(off, inc, &constants, n, prune, qs, opts,
                  [&](std::size_t rep, RunRecord&& rec) {
                      for (std::size_t i = 0; i < betas.size(); ++i)
                          flags[i][rep] =
                              static_cast<std::uint8_t>(rec.event_counts[i]);
                  });
        std::vector<Estimate> est(betas.size());
        for (std::size_t i = 0; i < betas.size(); ++i) {
            Welford w;
            for (std::size_t rep = 0; rep < reps; ++rep) {
                w.add(flags[i][rep]);
                if (i > 0 && flags[i][rep] > flags[i - 1][rep]) monotone = false;
            }
            est[i] = {w.mean(), w.std_error(), reps};
        }
        const auto res =
            barrier_bound_check(betas, est, n, constants.theta_bar, delta);
        c_fit[which] = res.c_fit;
        detail += " C(" + std::to_string(n) + ")=" + fmt(res.c_fit);
    }
    const double ratio = c_fit[1] / c_fit[0];
    r.pass = monotone && ratio >= 0.5 && ratio <= 2.0;
    r.detail = detail + " ratio=" + fmt(ratio) +
               " (bound [0.5,2]); pathwise beta-monotone=" +
               (monotone ? "yes" : "no") + "; delta=theta/32";
    return r;
}

CriterionResult a13_determinism(Context& ctx) {
    CriterionResult r{"A13", "byte-identical records.csv for 1 vs 8 workers"};
    const std::string base = ctx.opt.scratch_dir + "/determinism";
    fs::remove_all(base);
    fs::create_directories(base);

    RunConfig cfg;
    cfg.offspring_pmf = {{2, 1.0}};
    cfg.increment = pm1_steps();
    cfg.horizon = 2;
    cfg.replicates = scaled(ctx, 10'000);
    cfg.seed = 20'112'358;
    cfg.prune_mode = RunConfig::PruneMode::None;
    cfg.canonical = nlohmann::json::object();
    cfg.hash_hex = sha256_hex("acceptance-determinism");

    std::ostringstream sink;
    cfg.workers = 1;
    run_pipeline(cfg, base + "/w1", false, sink);
    cfg.workers = 8;
    run_pipeline(cfg, base + "/w8", false, sink);

    auto read_bytes = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    const auto b1 = read_bytes(base + "/w1/records.csv");
    const auto b8 = read_bytes(base + "/w8/records.csv");
    r.pass = !b1.empty() && b1 == b8;

    // Exceedance of the oracle value as a sanity rider: P(max_2 <= 0) = 25/64.
    std::size_t below = 0;
    const auto rows = csv::read_file(base + "/w1/records.csv");
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (std::stod(rows[i][1]) <= 0.0) ++below;
    const double p = static_cast<double>(below) / (rows.size() - 1);
    const double se = binomial_std_err(25.0 / 64.0, rows.size() - 1);
    r.pass = r.pass && std::abs(p - 25.0 / 64.0) <= 4.0 * se;
    r.detail = std::string("records.csv bytes ") +
               (b1 == b8 ? "identical" : "DIFFER") + "; P(max<=0)=" + fmt(p) +
               " vs 25/64=" + fmt(25.0 / 64.0);
    return r;
}

std::vector<CriterionResult> run_all(const Options& options) {
    Context ctx{options};
    fs::create_directories(options.scratch_dir);

    using Fn = CriterionResult (*)(Context&);
    const Fn criteria[] = {
        a01_calibration,          a02_oracle_enumeration,
        a03_simulator_dkw,        a04_martingale_means,
        a05_ballot_scaling,       a06_beta_star_stated,
        a06s_beta_star_supplement, a07_drift_stated,
        a07s_drift_supplement,    a08_positivity_clt,
        a09_tail_stated,          a09l_tail_companion,
        a10_moment_ratios_stated, a10l_moment_ratios_companion,
        a11_mixture_stated,       a11l_mixture_companion,
        a12_barrier_bound,        a13_determinism,
    };

    std::vector<CriterionResult> results;
    for (Fn fn : criteria) {
        const auto start = std::chrono::steady_clock::now();
        CriterionResult res;
        try {
            res = fn(ctx);
        } catch (const std::exception& e) {
            res.id = "A??";
            res.pass = false;
            res.detail = std::string("exception: ") + e.what();
        }
        res.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        results.push_back(std::move(res));
    }
    return results;
}

void print_results(const std::vector<CriterionResult>& results, std::ostream& out) {
    for (const auto& r : results) {
        out << "[" << r.id << "] " << (r.pass ? "PASS" : "FAIL")
            << (r.blocked ? " (blocked)" : "") << " " << r.name << "\n        "
            << r.detail << " [" << fmt(r.seconds, 3) << "s]\n";
    }
}

bool all_pass(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

}  // namespace brw::acceptance
