#include "brw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brw/errors.hpp"
#include "brw/stats.hpp"

namespace brw {

TailFit fit_tail(const std::vector<TailObservation>& table) {
    std::vector<double> xs, ys, ws;
    for (const auto& obs : table) {
        if (obs.z < 1.0 || obs.survival <= 0.0) continue;
        if (obs.exceedances > 0 && obs.exceedances < 100)
            throw InsufficientData("an MC tail point has fewer than 100 exceedances");
        xs.push_back(obs.z);
        ys.push_back(std::log(obs.survival / obs.z));
        // Delta-method variance of log S for MC points; unit weight for
        // exact values.
        ws.push_back(obs.exceedances > 0 ? static_cast<double>(obs.exceedances) : 1.0);
    }
    if (xs.size() < 5)
        throw InsufficientData("tail fit needs at least 5 usable z points");

    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sw += ws[i];
        sx += ws[i] * xs[i];
        sy += ws[i] * ys[i];
        sxx += ws[i] * xs[i] * xs[i];
        sxy += ws[i] * xs[i] * ys[i];
    }
    const double det = sw * sxx - sx * sx;
    if (det <= 0.0) throw InsufficientData("degenerate z grid for the tail fit");
    const double slope = (sw * sxy - sx * sy) / det;
    const double intercept = (sxx * sy - sx * sxy) / det;

    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (intercept + slope * xs[i]);
        rss += ws[i] * r * r;
    }
    const double dof = static_cast<double>(xs.size()) - 2.0;
    const double sigma2 = dof > 0.0 ? rss / dof : 0.0;

    TailFit fit;
    fit.theta_hat = -slope;
    fit.alpha_hat = std::exp(intercept);
    fit.theta_se = std::sqrt(sigma2 * sw / det);
    fit.alpha_se = fit.alpha_hat * std::sqrt(sigma2 * sxx / det);
    fit.z_min = *std::min_element(xs.begin(), xs.end());
    fit.z_max = *std::max_element(xs.begin(), xs.end());
    fit.points = xs.size();
    if (!(fit.theta_hat > 0.0))
        throw DomainError("tail fit produced a nonpositive decay rate");
    return fit;
}

std::pair<double, double> tail_tightness_range(const std::vector<TailObservation>& table,
                                               double theta_bar) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& obs : table) {
        if (obs.z < 1.0 || obs.survival <= 0.0) continue;
        const double r = obs.survival * std::exp(theta_bar * obs.z) / obs.z;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    if (!(hi > 0.0)) throw InsufficientData("no usable tail points");
    return {lo, hi};
}

MomentRatioRow moment_ratios(std::span<const std::int64_t> lambda,
                             std::span<const std::int64_t> gamma,
                             std::span<const std::uint8_t> exceed, double z, int ell) {
    const std::size_t n = lambda.size();
    if (n == 0 || gamma.size() != n || exceed.size() != n)
        throw InsufficientData("moment_ratios needs aligned nonempty batches");

    std::vector<double> lam(n), gam(n), lam2(n), exc(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (lambda[i] > gamma[i])
            throw DomainError("lambda exceeds gamma on a replicate; mismatched queries");
        lam[i] = static_cast<double>(lambda[i]);
        gam[i] = static_cast<double>(gamma[i]);
        lam2[i] = lam[i] * lam[i];
        exc[i] = exceed[i] ? 1.0 : 0.0;
    }
    auto mean = [n](const std::vector<double>& v) {
        KahanSum s;
        for (double x : v) s.add(x);
        return s.value() / static_cast<double>(n);
    };

    MomentRatioRow row;
    row.z = z;
    row.ell = ell;
    row.e_lambda = mean(lam);
    row.e_gamma = mean(gam);
    row.e_lambda_sq = mean(lam2);
    row.p_exceed = mean(exc);
    if (row.e_lambda > 0.0) {
        row.gamma_over_lambda = row.e_gamma / row.e_lambda;
        row.lambda_sq_over_lambda = row.e_lambda_sq / row.e_lambda;
        row.p_over_lambda = row.p_exceed / row.e_lambda;
        row.se_gamma_over_lambda = jackknife_ratio_std_err(gam, lam);
        row.se_lambda_sq_over_lambda = jackknife_ratio_std_err(lam2, lam);
        row.se_p_over_lambda = jackknife_ratio_std_err(exc, lam);
    }
    return row;
}

MixtureResult mixture_test(std::span<const double> z_k,
                           std::span<const std::uint8_t> below, double alpha_star,
                           double theta_bar, double z_probe, int bins) {
    const std::size_t n = z_k.size();
    if (n == 0 || below.size() != n)
        throw InsufficientData("mixture_test needs aligned nonempty batches");
    if (bins < 1) throw DomainError("mixture_test needs at least one bin");
    if (!(alpha_star > 0.0)) throw DomainError("alpha must be positive");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return z_k[a] < z_k[b]; });

    MixtureResult out;
    out.z_probe = z_probe;
    const double decay = std::exp(-theta_bar * z_probe);
    for (int b = 0; b < bins; ++b) {
        const std::size_t lo = n * static_cast<std::size_t>(b) / bins;
        const std::size_t hi = n * static_cast<std::size_t>(b + 1) / bins;
        if (hi - lo < 200)
            throw InsufficientData("a mixture bin has fewer than 200 replicates");
        KahanSum sz, sb;
        for (std::size_t i = lo; i < hi; ++i) {
            sz.add(z_k[order[i]]);
            sb.add(below[order[i]] ? 1.0 : 0.0);
        }
        MixtureBin bin;
        bin.count = hi - lo;
        bin.z_k_mean = sz.value() / static_cast<double>(bin.count);
        bin.freq = sb.value() / static_cast<double>(bin.count);
        bin.predicted = std::exp(-alpha_star * bin.z_k_mean * decay);
        const double se =
            binomial_std_err(bin.predicted, bin.count);
        bin.deviation = se > 0.0 ? (bin.freq - bin.predicted) / se : 0.0;
        out.statistic = std::max(out.statistic, std::abs(bin.deviation));
        out.bins.push_back(bin);
    }
    const double tail = 2.0 * (1.0 - normal_cdf(out.statistic));
    out.p_value = std::min(1.0, static_cast<double>(bins) * tail);
    return out;
}

double g_n_delta(int n, double delta, double x) {
    const double ax = std::abs(x);
    const double ratio = std::min(ax / (n * std::log(static_cast<double>(n))), 1.0);
    return std::exp(-delta * ax * ratio);
}

BarrierBoundResult barrier_bound_check(std::span<const double> beta_list,
                                       std::span<const Estimate> p_hat, int n,
                                       double theta_bar, double delta) {
    if (beta_list.size() != p_hat.size() || beta_list.empty())
        throw InsufficientData("barrier_bound_check needs aligned nonempty inputs");
    BarrierBoundResult out;
    out.n = n;
    out.delta = delta;
    for (std::size_t i = 0; i < beta_list.size(); ++i) {
        BarrierBoundRow row;
        row.beta = beta_list[i];
        row.p_hat = p_hat[i].p_hat;
        row.std_err = p_hat[i].std_err;
        row.bound_shape = row.beta * std::exp(-theta_bar * row.beta) *
                          g_n_delta(n, delta, row.beta);
        row.c_ratio = row.bound_shape > 0.0 ? row.p_hat / row.bound_shape : 0.0;
        out.c_fit = std::max(out.c_fit, row.c_ratio);
        out.rows.push_back(row);
    }
    return out;
}

NuMeasure nu_measure(const IncrementLaw& inc, int n, int ell, double z,
                     const ModelConstants& constants) {
    if (!inc.is_lattice()) throw DomainError("nu_measure requires a lattice law");
    if (ell < 1 || ell > n) throw DomainError("nu_measure needs 1 <= ell <= n");
    if (z < 0.0) throw DomainError("nu_measure needs z >= 0");
    const int m = n - ell;
    const double slope = constants.centering(n) / n;

    // Reflect: eta_bar(j) <= z for all j <= m becomes a floor constraint
    // for the negated walk with per-step drift `slope`.
    auto pts = inc.lattice_points();
    for (auto& p : pts) p = -p;
    std::vector<std::int64_t> rev(pts.rbegin(), pts.rend());
    auto mass = inc.lattice_masses();
    std::vector<double> revm(mass.rbegin(), mass.rend());
    const IncrementLaw neg = IncrementLaw::lattice(rev, revm, inc.lattice_span());

    BarrierSpec bar;
    bar.y = z;
    bar.strict = false;
    bar.drift = slope;
    const auto dist = dp_barrier_terminal(TiltedLaw(neg, 0.0), m, bar);

    NuMeasure nu;
    nu.span = dist.span;
    const double window_lo = -static_cast<double>(ell);
    const double window_hi = -std::pow(static_cast<double>(ell), 0.4);
    for (std::size_t i = 0; i < dist.prob.size(); ++i) {
        if (dist.prob[i] == 0.0) continue;
        const double raw = (dist.min_state + static_cast<std::int64_t>(i)) * dist.span;
        // eta_bar(m) = -(raw + slope m); offset below the line is eta_bar - z.
        const double offset = -(raw + slope * m) - z;
        if (offset > 0.0) continue;  // terminal constraint eta_bar(m) <= z
        nu.offsets.push_back(offset);
        nu.mass.push_back(dist.prob[i]);
        nu.total += dist.prob[i];
        if (offset > window_lo && offset <= window_hi)
            nu.mass_in_default_window += dist.prob[i];
    }
    return nu;
}

std::vector<TailObservation> gamma_ell_tail(const OffspringLaw& off,
                                            const IncrementLaw& inc, int ell,
                                            double slope,
                                            const std::vector<double>& y_list) {
    const MaxCdf u = exact_max_law(off, inc, ell);
    std::vector<TailObservation> out;
    out.reserve(y_list.size());
    for (double y : y_list) {
        TailObservation obs;
        obs.z = y;
        obs.survival = u.survival(ell * slope + y);
        obs.exceedances = 0;
        out.push_back(obs);
    }
    return out;
}

}  // namespace brw
