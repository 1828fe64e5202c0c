#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brw/laws.hpp"
#include "brw/model.hpp"

namespace brw {

// Exponentially tilted increment law: density/pmf e^(theta x)/phi(theta)
// times the base law, plus an optional additive recentering used to
// represent per-step drifts without a separate walk type.
class TiltedLaw {
public:
    TiltedLaw(IncrementLaw base, double theta, double shift = 0.0);

    const IncrementLaw& base() const { return base_; }
    double theta() const { return theta_; }
    double shift() const { return shift_; }
    double log_normalizer() const { return log_normalizer_; }

    double mean() const { return tilted_mean_ + shift_; }
    double variance() const { return tilted_variance_; }
    bool is_lattice() const { return base_.is_lattice(); }

    double sample(CounterRng& rng) const;

    // Tilted pmf over base().lattice_points(); lattice laws only.
    const std::vector<double>& lattice_masses() const;

private:
    IncrementLaw base_;
    double theta_;
    double shift_;
    double log_normalizer_;
    double tilted_mean_;
    double tilted_variance_;
    std::vector<double> masses_;
    std::vector<double> mass_cdf_;
};

// Tilt the law so its (unshifted) mean equals target_mean. Exact zero tilt
// when the target equals the base mean.
TiltedLaw solve_tilt(const IncrementLaw& law, double target_mean);

// Deterministic batch of tilted samples; stream 0 of the given seed.
std::vector<double> tilted_sample(const TiltedLaw& law, std::size_t count,
                                  std::uint64_t seed);

// Log Radon-Nikodym weight -theta * S_n + n * log phi(theta) carrying a
// length-n path sampled under the theta-tilt back to the base measure.
double walk_weight(std::span<const double> increments, double theta, double log_phi);

}  // namespace brw
