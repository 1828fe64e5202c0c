#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

// Reproduction law {p_i} on indices i >= 1 with finite support. Extinction
// is impossible by construction; supercriticality (rho > 1) is required
// unless the test-only bypass is requested.
class OffspringLaw {
public:
    static OffspringLaw from_pmf(std::vector<std::pair<int, double>> pmf,
                                 bool allow_critical = false);

    double rho() const { return rho_; }
    double second_moment() const { return second_moment_; }
    // K* = K - rho; appears in second-moment decompositions.
    double k_star() const { return second_moment_ - rho_; }
    int max_children() const { return pmf_.back().first; }
    const std::vector<std::pair<int, double>>& pmf() const { return pmf_; }

    int sample(CounterRng& rng) const;

private:
    OffspringLaw() = default;
    std::vector<std::pair<int, double>> pmf_;  // sorted by index
    std::vector<double> cdf_;
    double rho_ = 0.0;
    double second_moment_ = 0.0;
};

enum class IncrementKind { Gaussian, ShiftedExponential, Uniform, LatticePmf };

// Step distribution of the walk. Continuous laws are parametric and
// nonlattice by construction; lattice laws are finite pmfs on integer
// multiples of a declared span. The finite-MGF interval is declared per
// law, not probed.
class IncrementLaw {
public:
    static IncrementLaw gaussian(double mu, double sigma);
    static IncrementLaw shifted_exponential(double rate, double shift);
    static IncrementLaw uniform(double a, double b);
    // points are state integers; the physical value of point c is c * span.
    static IncrementLaw lattice(std::vector<std::int64_t> points,
                                std::vector<double> masses, double span = 1.0);
    // Convenience: the symmetric +-1 step law.
    static IncrementLaw rademacher() { return lattice({-1, 1}, {0.5, 0.5}); }

    IncrementKind kind() const { return kind_; }
    bool is_lattice() const { return kind_ == IncrementKind::LatticePmf; }

    double mean() const { return mean_; }
    double variance() const { return variance_; }
    double support_min() const { return support_min_; }  // -inf allowed
    double support_max() const { return support_max_; }  // +inf allowed

    // Open interval on which phi is finite.
    std::pair<double, double> theta_domain() const { return domain_; }
    bool theta_in_domain(double theta) const {
        return theta > domain_.first && theta < domain_.second;
    }

    double mgf(double theta) const;        // phi(theta)
    double log_mgf(double theta) const;    // log phi
    double log_mgf_d1(double theta) const; // (log phi)' = tilted mean
    double log_mgf_d2(double theta) const; // (log phi)'' = tilted variance

    // Range of (log phi)' over the open domain; +-inf where unbounded.
    double tilted_mean_inf() const;
    double tilted_mean_sup() const;
    // Supremum of attainable rate-function values on (mean, tilted_mean_sup);
    // finite only for lattice laws with an atom at the top of the support.
    double rate_sup() const;

    double cdf(double x) const;

    double sample(CounterRng& rng) const;
    // Exact sampler for the theta-tilted law (density e^(theta x)/phi times
    // this law). All shipped laws admit closed-form tilted samplers.
    double sample_tilted(double theta, CounterRng& rng) const;

    // Lattice access (DomainError on continuous laws).
    double lattice_span() const;
    const std::vector<std::int64_t>& lattice_points() const;
    const std::vector<double>& lattice_masses() const;
    std::vector<double> tilted_lattice_masses(double theta) const;

    // Law-specific parameters, in declaration order (mu/sigma, rate/shift,
    // a/b). Empty for lattice laws.
    const std::vector<double>& parameters() const { return params_; }

private:
    IncrementLaw() = default;
    void require_domain(double theta) const;

    IncrementKind kind_ = IncrementKind::Gaussian;
    std::vector<double> params_;
    std::vector<std::int64_t> points_;
    std::vector<double> masses_;
    std::vector<double> mass_cdf_;
    double span_ = 1.0;
    double mean_ = 0.0;
    double variance_ = 1.0;
    double support_min_ = -std::numeric_limits<double>::infinity();
    double support_max_ = std::numeric_limits<double>::infinity();
    std::pair<double, double> domain_{-std::numeric_limits<double>::infinity(),
                                      std::numeric_limits<double>::infinity()};
};

}  // namespace brw
