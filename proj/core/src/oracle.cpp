#include "brw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr double kLatticeCapacity = 1e6;
constexpr double kGridCapacity = 4e6;
constexpr double kLeakBudget = 1e-9;

// f(s) = sum_i p_i s^i over the finite offspring support.
double offspring_gf(const OffspringLaw& off, double s) {
    double acc = 0.0;
    double power = 1.0;
    int at = 0;
    for (const auto& [i, p] : off.pmf()) {
        for (; at < i; ++at) power *= s;
        acc += p * power;
    }
    return acc;
}

// Survival composition g(s) = 1 - f(1 - s) as an explicit polynomial
// sum_j a_j s^j with a_j = (-1)^(j+1) sum_i p_i C(i,j). The series form
// avoids the 1 - f(1 - s) cancellation when s is tiny.
std::vector<double> survival_poly(const OffspringLaw& off) {
    const int imax = off.max_children();
    std::vector<double> a(static_cast<std::size_t>(imax) + 1, 0.0);
    for (const auto& [i, p] : off.pmf()) {
        double binom = 1.0;  // C(i, j), starting at j = 1 with value i
        for (int j = 1; j <= i; ++j) {
            binom = binom * static_cast<double>(i - j + 1) / static_cast<double>(j);
            a[static_cast<std::size_t>(j)] +=
                (j % 2 == 1 ? 1.0 : -1.0) * p * binom;
        }
    }
    return a;
}

double survival_compose(const OffspringLaw& off, const std::vector<double>& poly,
                        double s) {
    if (s <= 0.0) return 0.0;
    if (s > 0.25) return 1.0 - offspring_gf(off, 1.0 - s);
    double acc = 0.0;
    for (std::size_t j = poly.size(); j-- > 1;) acc = (acc + poly[j]) * s;
    return acc;
}

double tail_lookup(const std::vector<double>& tail, std::ptrdiff_t idx) {
    if (idx < 0) return 1.0;
    if (idx >= static_cast<std::ptrdiff_t>(tail.size())) return 0.0;
    return tail[static_cast<std::size_t>(idx)];
}

void fill_values_from_tail(MaxCdf& u) {
    u.values.resize(u.tail.size());
    for (std::size_t i = 0; i < u.tail.size(); ++i) u.values[i] = 1.0 - u.tail[i];
}

std::int64_t support_diff_gcd(const IncrementLaw& inc) {
    const auto& pts = inc.lattice_points();
    std::int64_t g = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        g = std::gcd(g, pts[i] - pts.front());
    return g == 0 ? 1 : g;
}

MaxCdf lattice_step(const MaxCdf& u, const OffspringLaw& off, const IncrementLaw& inc,
                    const std::vector<double>& poly) {
    const double span = inc.lattice_span();
    if (std::abs(span - u.step) > 1e-12 * std::max(1.0, span))
        throw DomainError("increment span does not match the cdf lattice");
    const auto& pts = inc.lattice_points();
    const auto& mass = inc.lattice_masses();
    const std::int64_t omin = pts.front(), omax = pts.back();

    MaxCdf out;
    out.exactness = MaxCdf::Exactness::LatticeExact;
    out.n = u.n + 1;
    out.step = u.step;
    out.origin = u.origin + static_cast<double>(omin) * span;
    const std::int64_t gd = support_diff_gcd(inc);
    out.period = u.n == 0 ? gd : std::gcd(u.period, gd);
    const std::size_t size = u.tail.size() + static_cast<std::size_t>(omax - omin);
    out.tail.resize(size);

    for (std::size_t i = 0; i < size; ++i) {
        // State of out[i] relative to u's origin is i + omin.
        double conv = 0.0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            const std::ptrdiff_t rel =
                static_cast<std::ptrdiff_t>(i) + omin - pts[j];
            conv += mass[j] * tail_lookup(u.tail, rel);
        }
        out.tail[i] = survival_compose(off, poly, std::min(conv, 1.0));
    }
    fill_values_from_tail(out);
    return out;
}

MaxCdf grid_step(const MaxCdf& u, const OffspringLaw& off, const IncrementLaw& inc,
                 const std::vector<double>& poly, double& budget) {
    const double h = u.step;

    // Cell masses of the increment law on the same grid; expand the range
    // until both tails are below the leak budget.
    std::ptrdiff_t jlo = static_cast<std::ptrdiff_t>(std::floor(inc.mean() / h)) - 1;
    std::ptrdiff_t jhi = jlo + 2;
    const double tail_tol = 1e-13;
    while (inc.cdf((static_cast<double>(jlo) - 0.5) * h) > tail_tol) {
        jlo -= std::max<std::ptrdiff_t>(1, (jhi - jlo) / 2);
        if (jhi - jlo > static_cast<std::ptrdiff_t>(kGridCapacity))
            throw CapacityError("increment grid range exceeds capacity");
    }
    while (1.0 - inc.cdf((static_cast<double>(jhi) + 0.5) * h) > tail_tol) {
        jhi += std::max<std::ptrdiff_t>(1, (jhi - jlo) / 2);
        if (jhi - jlo > static_cast<std::ptrdiff_t>(kGridCapacity))
            throw CapacityError("increment grid range exceeds capacity");
    }
    std::vector<double> w(static_cast<std::size_t>(jhi - jlo + 1));
    double total = 0.0;
    for (std::ptrdiff_t j = jlo; j <= jhi; ++j) {
        const double m = inc.cdf((static_cast<double>(j) + 0.5) * h) -
                         inc.cdf((static_cast<double>(j) - 0.5) * h);
        w[static_cast<std::size_t>(j - jlo)] = m;
        total += m;
    }
    const double leak = std::max(0.0, 1.0 - total);
    if (leak > kLeakBudget)
        throw TruncationError("grid mass leakage exceeds 1e-9");
    // Steps beyond the top of the range see survival ~ 1; credit the
    // right-tail leak there (the left tail sees survival ~ 0 and is
    // dropped). Either way the error is at most the leak.
    w.back() += leak;

    double modulus = 1.0 - u.tail.front();
    for (std::size_t i = 1; i < u.tail.size(); ++i)
        modulus = std::max(modulus, u.tail[i - 1] - u.tail[i]);

    MaxCdf out;
    out.exactness = MaxCdf::Exactness::GridApprox;
    out.n = u.n + 1;
    out.step = h;
    out.origin = u.origin + static_cast<double>(jlo) * h;
    const std::size_t size = u.tail.size() + w.size() - 1;
    if (size > static_cast<std::size_t>(kGridCapacity))
        throw CapacityError("cdf grid exceeds capacity");
    out.tail.resize(size);

    for (std::size_t i = 0; i < size; ++i) {
        double conv = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            conv += w[j] * tail_lookup(u.tail, static_cast<std::ptrdiff_t>(i) -
                                                   static_cast<std::ptrdiff_t>(j));
        }
        out.tail[i] = survival_compose(off, poly, std::min(conv, 1.0));
    }
    fill_values_from_tail(out);

    // One-step error: cell snapping moves each increment by at most h/2
    // (bounded by the cdf modulus over that distance) plus the leak.
    budget += 0.5 * modulus + leak;
    return out;
}

}  // namespace

double MaxCdf::cdf(double x) const { return 1.0 - survival(x); }

double MaxCdf::survival(double x) const {
    if (tail.empty()) return 0.0;
    const double t = (x - origin) / step;
    const auto i = static_cast<std::ptrdiff_t>(std::floor(t + 1e-9));
    if (i < 0) return 1.0;
    if (i >= static_cast<std::ptrdiff_t>(tail.size())) return 0.0;
    return tail[static_cast<std::size_t>(i)];
}

double MaxCdf::cdf_linear(double x) const {
    if (values.empty()) return 0.0;
    const double t = (x - origin) / step;
    if (t <= 0.0) return t < 0.0 ? 0.0 : values.front();
    if (t >= static_cast<double>(values.size() - 1)) return values.back();
    const auto i = static_cast<std::size_t>(std::floor(t));
    const double frac = t - static_cast<double>(i);
    return values[i] + frac * (values[i + 1] - values[i]);
}

MaxCdf MaxCdf::point_mass_at_origin(Exactness exactness, double step) {
    MaxCdf u;
    u.exactness = exactness;
    u.n = 0;
    u.origin = 0.0;
    u.step = step;
    u.tail = {0.0};
    u.values = {1.0};
    return u;
}

MaxCdf recursion_step(const MaxCdf& u, const OffspringLaw& off, const IncrementLaw& inc) {
    if (u.tail.empty()) throw DomainError("empty cdf");
    const auto poly = survival_poly(off);
    if (u.exactness == MaxCdf::Exactness::LatticeExact) {
        if (!inc.is_lattice())
            throw DomainError("lattice recursion requires a lattice increment law");
        return lattice_step(u, off, inc, poly);
    }
    if (inc.is_lattice())
        throw DomainError("grid recursion requires a continuous increment law");
    double budget = u.error_budget;
    MaxCdf out = grid_step(u, off, inc, poly, budget);
    out.error_budget = off.rho() * budget;
    return out;
}

MaxCdf exact_max_law(const OffspringLaw& off, const IncrementLaw& inc, int n) {
    if (n < 0) throw DomainError("exact_max_law requires n >= 0");
    if (!inc.is_lattice()) throw DomainError("exact_max_law requires a lattice law");
    const auto& pts = inc.lattice_points();
    const double width = static_cast<double>(pts.back() - pts.front());
    if (static_cast<double>(n) * width > kLatticeCapacity)
        throw CapacityError("lattice grid exceeds the 1e6 bound");

    MaxCdf u = MaxCdf::point_mass_at_origin(MaxCdf::Exactness::LatticeExact,
                                            inc.lattice_span());
    for (int k = 0; k < n; ++k) u = recursion_step(u, off, inc);
    return u;
}

MaxCdf grid_max_law(const OffspringLaw& off, const IncrementLaw& inc, int n,
                    double step) {
    if (n < 0) throw DomainError("grid_max_law requires n >= 0");
    if (!(step > 0.0)) throw DomainError("grid step must be positive");
    MaxCdf u = MaxCdf::point_mass_at_origin(MaxCdf::Exactness::GridApprox, step);
    for (int k = 0; k < n; ++k) u = recursion_step(u, off, inc);
    return u;
}

std::vector<TailPoint> centered_tail(const MaxCdf& u, const ModelConstants& constants,
                                     const std::vector<double>& z_list) {
    const double mn = u.n >= 1 ? constants.centering(u.n) : 0.0;
    std::vector<TailPoint> out;
    out.reserve(z_list.size());
    for (double z : z_list) {
        TailPoint pt;
        pt.z_requested = z;
        double target = mn + z;
        if (u.exactness == MaxCdf::Exactness::LatticeExact) {
            // Snap m_n + z to the reachable sublattice (atoms sit on
            // origin + period*step*Z) and report the z actually used.
            const double unit = u.step * static_cast<double>(u.period);
            const double snapped =
                u.origin + std::round((target - u.origin) / unit) * unit;
            pt.z_used = snapped - mn;
            target = snapped;
        } else {
            pt.z_used = z;
            if (target > u.top() + u.step)
                throw RangeError("tail window not covered by the grid");
        }
        pt.survival = u.survival(target);
        out.push_back(pt);
    }
    return out;
}

}  // namespace brw
