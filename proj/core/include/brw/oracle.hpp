#pragma once

#include <cstdint>
#include <vector>

#include "brw/laws.hpp"
#include "brw/model.hpp"

namespace brw {

// Distribution of the running maximum eta*_n on an exact lattice grid or a
// uniform approximation grid.
//
// The recursion is carried in the survival domain: representing the cdf
// near 1 in doubles seeds a parasitic front (survival masses below ~1e-16
// vanish by rounding, then regrow at the wrong speed), which corrupts the
// law within a few hundred generations. Survival values keep their own
// exponent, so deep-tail queries stay accurate to relative rounding.
struct MaxCdf {
    enum class Exactness { LatticeExact, GridApprox };

    Exactness exactness = Exactness::LatticeExact;
    int n = 0;
    double origin = 0.0;   // position of values[0]
    double step = 1.0;     // lattice span, or grid step
    std::vector<double> values;  // cdf, derived as 1 - tail
    std::vector<double> tail;    // survival P(eta*_n > position), full precision
    double error_budget = 0.0;   // sup-norm bound, GridApprox only
    // Atoms live on origin + period*step*Z for lattice laws (walk
    // periodicity); 1 when unknown or aperiodic.
    std::int64_t period = 1;

    double position(std::size_t i) const { return origin + static_cast<double>(i) * step; }
    double top() const { return position(values.size() - 1); }
    double atom(std::size_t i) const {
        return (i > 0 ? tail[i - 1] : 1.0) - tail[i];
    }

    // Right-continuous step evaluation.
    double cdf(double x) const;
    double survival(double x) const;  // P(eta*_n > x)
    // Linear interpolation between grid points; an alternative reading for
    // off-grid queries, never treated as canonical.
    double cdf_linear(double x) const;

    static MaxCdf point_mass_at_origin(Exactness exactness, double step);
};

// One generation of u -> f(w * u) with f(s) = sum_i p_i s^i: condition on
// the first generation, shift each subtree by an increment, and take the
// max over offspring.
MaxCdf recursion_step(const MaxCdf& u, const OffspringLaw& off, const IncrementLaw& inc);

// Exact law of eta*_n for lattice increments; n iterations of the recursion.
MaxCdf exact_max_law(const OffspringLaw& off, const IncrementLaw& inc, int n);

// Gridded law of eta*_n for continuous increments. The per-step snapping
// error and truncation leakage are accumulated into error_budget.
MaxCdf grid_max_law(const OffspringLaw& off, const IncrementLaw& inc, int n,
                    double step);

struct TailPoint {
    double z_requested = 0.0;
    double z_used = 0.0;      // snapped to the reachable grid where applicable
    double survival = 0.0;    // P(eta*_n > m_n + z_used)
};

// Tail table of the centered maximum. Lattice targets snap to the law's
// reachable sublattice (period-aware) and report the z actually used.
std::vector<TailPoint> centered_tail(const MaxCdf& u, const ModelConstants& constants,
                                     const std::vector<double>& z_list);

}  // namespace brw
