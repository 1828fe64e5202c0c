#include "brw/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kResidualTol = 1e-12;
constexpr double kInteriorMargin = 1e-6;

// Largest theta that may be probed without leaving the open domain; a
// finite surrogate stands in for an unbounded interval.
double domain_cap(double open_end) {
    if (std::isinf(open_end)) return 1e4;
    return open_end - 1e-12 * std::max(1.0, std::abs(open_end));
}

// Bracket the root of an increasing f on [lo, cap]: doubling steps away
// from lo, geometric approach near cap. Returns false if f stays negative.
template <typename F>
bool bracket_root(F&& f, double lo, double cap, double& a, double& b) {
    if (f(lo) >= 0.0) {
        a = b = lo;
        return true;
    }
    a = lo;
    double step = std::min(1.0, (cap - lo) * 0.5);
    b = lo + step;
    for (int i = 0; i < 300; ++i) {
        if (f(b) >= 0.0) return true;
        a = b;
        step = std::min(step * 2.0, (cap - b) * 0.5);
        if (step <= 1e-14 * std::max(1.0, std::abs(cap))) return false;
        b += step;
    }
    return false;
}

// Safeguarded Newton for increasing f with derivative df on bracket [lo, hi].
template <typename F, typename DF>
double newton_solve(F&& f, DF&& df, double lo, double hi, double tol) {
    if (hi <= lo) return lo;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double r = f(x);
        if (std::abs(r) <= tol) break;
        if (r > 0.0) hi = x; else lo = x;
        const double d = df(x);
        double next = d > 0.0 ? x - r / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-16 * std::max(1.0, std::abs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

}  // namespace

double ModelConstants::centering(double n) const {
    if (!(n > 0.0)) throw DomainError("centering requires n > 0");
    return c1 * n - c2 * std::log(n);
}

double centering(const ModelConstants& constants, double n) {
    return constants.centering(n);
}

double mgf(const IncrementLaw& law, double theta) { return law.mgf(theta); }

namespace detail {

double solve_cumulant_mean(const IncrementLaw& law, double target) {
    if (target == law.mean()) return 0.0;
    const double tol = kResidualTol * std::max(1.0, std::abs(target));

    const bool up = target > law.mean();
    if (up && target >= law.tilted_mean_sup())
        throw DomainError("tilted mean target is at or beyond the attainable range");
    if (!up && target <= law.tilted_mean_inf())
        throw DomainError("tilted mean target is at or beyond the attainable range");

    // Mirror the downward case so the solver always walks up in s = +-theta.
    const double sign = up ? 1.0 : -1.0;
    const double open_end = up ? law.theta_domain().second : -law.theta_domain().first;
    const double cap = domain_cap(open_end);
    auto f = [&](double s) { return sign * (law.log_mgf_d1(sign * s) - target); };
    auto df = [&](double s) { return law.log_mgf_d2(sign * s); };

    double a, b;
    if (!bracket_root(f, 0.0, cap, a, b))
        throw DomainError("stationarity equation has no interior root");
    return sign * newton_solve(f, df, a, b, tol);
}

}  // namespace detail

RatePoint rate_function(const IncrementLaw& law, double lambda) {
    if (!(lambda > law.mean()))
        throw DomainError("rate function evaluated at or below the mean");
    const double theta = detail::solve_cumulant_mean(law, lambda);
    return RatePoint{theta * lambda - law.log_mgf(theta), theta};
}

ModelConstants calibrate(const OffspringLaw& off, const IncrementLaw& inc) {
    const double log_rho = std::log(off.rho());

    // Interiority of log rho in the attainable range of I. Only lattice
    // laws (atom at the top of the support) cap the range.
    const double cap_i = inc.rate_sup();
    if (std::isfinite(cap_i) &&
        log_rho > cap_i - kInteriorMargin * std::max(1.0, std::abs(cap_i))) {
        throw AssumptionError(
            "log(rho) = " + std::to_string(log_rho) +
            " is not interior to the rate-function range (sup = " +
            std::to_string(cap_i) +
            ", the entropy of the top step atom); the speed equation "
            "I(c1) = log(rho) has no interior solution");
    }

    // F(theta) = theta (log phi)'(theta) - log phi(theta) is increasing on
    // theta > 0 and equals I at lambda = (log phi)'(theta); solve
    // F(theta) = log rho. The minimizer of (log rho + log phi(theta))/theta
    // satisfies the same equation, so the dual characterization is met by
    // construction (and is cross-checked independently in the tests).
    auto f = [&](double t) {
        return t * inc.log_mgf_d1(t) - inc.log_mgf(t) - log_rho;
    };
    auto df = [&](double t) { return t * inc.log_mgf_d2(t); };
    const double cap = domain_cap(inc.theta_domain().second);
    double a, b;
    if (!bracket_root(f, 1e-12, cap, a, b))
        throw AssumptionError(
            "speed equation I(c1) = log(rho) has no root inside the "
            "finite-MGF interval");
    const double theta =
        newton_solve(f, df, a, b, kResidualTol * std::max(1.0, std::abs(log_rho)));
    const double c1 = inc.log_mgf_d1(theta);

    // Interiority of c1 in the range of (log phi)' and of theta_bar in the
    // finite-MGF interval: the tilted measure recentered at c1 must keep
    // exponential moments.
    const double mean_sup = inc.tilted_mean_sup();
    if (std::isfinite(mean_sup) &&
        c1 > mean_sup - kInteriorMargin * std::max(1.0, std::abs(mean_sup))) {
        throw AssumptionError(
            "speed c1 = " + std::to_string(c1) +
            " is not interior to the range of (log phi)' (sup = " +
            std::to_string(mean_sup) + ")");
    }
    const double dom_hi = inc.theta_domain().second;
    if (std::isfinite(dom_hi) &&
        theta > dom_hi - kInteriorMargin * std::max(1.0, std::abs(dom_hi))) {
        throw AssumptionError(
            "tilt theta_bar = " + std::to_string(theta) +
            " reaches the edge of the finite-MGF interval");
    }

    ModelConstants constants;
    constants.c1 = c1;
    constants.theta_bar = theta;
    constants.c2 = 3.0 / (2.0 * theta);
    constants.log_rho = log_rho;
    constants.theta_domain = inc.theta_domain();
    return constants;
}

}  // namespace brw
