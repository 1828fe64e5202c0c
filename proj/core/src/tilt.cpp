#include "brw/tilt.hpp"

#include <cmath>

#include "brw/errors.hpp"

namespace brw {

TiltedLaw::TiltedLaw(IncrementLaw base, double theta, double shift)
    : base_(std::move(base)), theta_(theta), shift_(shift) {
    if (!base_.theta_in_domain(theta))
        throw DomainError("tilt outside the finite-MGF interval");
    log_normalizer_ = base_.log_mgf(theta);
    tilted_mean_ = base_.log_mgf_d1(theta);
    tilted_variance_ = base_.log_mgf_d2(theta);
    if (base_.is_lattice()) {
        masses_ = base_.tilted_lattice_masses(theta);
        double acc = 0.0;
        mass_cdf_.reserve(masses_.size());
        for (double m : masses_) {
            acc += m;
            mass_cdf_.push_back(acc);
        }
        mass_cdf_.back() = 1.0;
    }
}

double TiltedLaw::sample(CounterRng& rng) const {
    if (base_.is_lattice()) {
        const double u = rng.next_double();
        const auto& pts = base_.lattice_points();
        const double span = base_.lattice_span();
        for (std::size_t i = 0; i + 1 < mass_cdf_.size(); ++i)
            if (u <= mass_cdf_[i]) return pts[i] * span + shift_;
        return pts.back() * span + shift_;
    }
    return base_.sample_tilted(theta_, rng) + shift_;
}

const std::vector<double>& TiltedLaw::lattice_masses() const {
    if (!base_.is_lattice()) throw DomainError("lattice accessor on continuous law");
    return masses_;
}

TiltedLaw solve_tilt(const IncrementLaw& law, double target_mean) {
    if (target_mean == law.mean()) return TiltedLaw(law, 0.0);
    const double theta = detail::solve_cumulant_mean(law, target_mean);
    return TiltedLaw(law, theta);
}

std::vector<double> tilted_sample(const TiltedLaw& law, std::size_t count,
                                  std::uint64_t seed) {
    std::vector<double> out(count);
    CounterRng rng(seed, 0);
    for (std::size_t i = 0; i < count; ++i) out[i] = law.sample(rng);
    return out;
}

double walk_weight(std::span<const double> increments, double theta, double log_phi) {
    double s = 0.0;
    for (double x : increments) s += x;
    return -theta * s + static_cast<double>(increments.size()) * log_phi;
}

}  // namespace brw
