#pragma once

#include <utility>

#include "brw/laws.hpp"

namespace brw {

// Legendre-transform value I(lambda) together with the optimizing tilt.
struct RatePoint {
    double value = 0.0;
    double argmax_theta = 0.0;
};

// Calibrated constants of a (offspring, increment) model: the speed c1
// solving I(c1) = log rho, the tilt theta_bar at which the transform is
// attained, and the logarithmic-correction coefficient c2 = 3/(2 theta_bar).
struct ModelConstants {
    double c1 = 0.0;
    double theta_bar = 0.0;
    double c2 = 0.0;
    double log_rho = 0.0;
    std::pair<double, double> theta_domain{0.0, 0.0};

    // m_n = c1 n - c2 log n. Real-valued n is accepted so linearity checks
    // can probe between integers.
    double centering(double n) const;
};

double mgf(const IncrementLaw& law, double theta);

// I(lambda) = sup_{theta>0} [theta lambda - log phi(theta)] for lambda
// above the mean, solved through the stationarity equation.
RatePoint rate_function(const IncrementLaw& law, double lambda);

ModelConstants calibrate(const OffspringLaw& off, const IncrementLaw& inc);

double centering(const ModelConstants& constants, double n);

namespace detail {
// Solve (log phi)'(theta) = target for theta inside the finite-MGF
// interval. Safeguarded Newton with a bisection bracket, residual
// tolerance 1e-12 relative to max(1, |target|).
double solve_cumulant_mean(const IncrementLaw& law, double target);
}  // namespace detail

}  // namespace brw
