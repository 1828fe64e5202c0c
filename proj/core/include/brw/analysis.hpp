#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brw/ballot.hpp"
#include "brw/model.hpp"
#include "brw/oracle.hpp"

namespace brw {

// Observation for the tail fit: survival S(z) = P(eta*_n > m_n + z), with
// the exceedance count behind an MC estimate (0 marks an exact value).
struct TailObservation {
    double z = 0.0;
    double survival = 0.0;
    std::size_t exceedances = 0;
};

struct TailFit {
    double theta_hat = 0.0;
    double alpha_hat = 0.0;
    double theta_se = 0.0;
    double alpha_se = 0.0;
    double z_min = 0.0;
    double z_max = 0.0;
    std::size_t points = 0;
};

// Fit S(z) = alpha z exp(-theta z) by weighted least squares of log(S/z)
// on z, using points with z >= 1. MC points need >= 100 exceedances each;
// at least 5 usable points are required.
TailFit fit_tail(const std::vector<TailObservation>& table);

inline std::vector<TailObservation> to_observations(const std::vector<TailPoint>& pts) {
    std::vector<TailObservation> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back({p.z_used, p.survival, 0});
    return out;
}

// Min and max of z^(-1) e^(theta z) S(z) over the table (two-sided
// tightness of the tail shape).
std::pair<double, double> tail_tightness_range(const std::vector<TailObservation>& table,
                                               double theta_bar);

struct MomentRatioRow {
    double z = 0.0;
    int ell = 0;
    double e_lambda = 0.0;
    double e_gamma = 0.0;
    double e_lambda_sq = 0.0;
    double p_exceed = 0.0;
    double gamma_over_lambda = 0.0;
    double lambda_sq_over_lambda = 0.0;
    double p_over_lambda = 0.0;
    double se_gamma_over_lambda = 0.0;
    double se_lambda_sq_over_lambda = 0.0;
    double se_p_over_lambda = 0.0;
};

// First/second moment ratios of the truncated counts at one (z, ell),
// with delete-one jackknife errors.
MomentRatioRow moment_ratios(std::span<const std::int64_t> lambda,
                             std::span<const std::int64_t> gamma,
                             std::span<const std::uint8_t> exceed, double z, int ell);

struct MixtureBin {
    double z_k_mean = 0.0;     // mean of Z_k within the bin
    std::size_t count = 0;
    double freq = 0.0;         // empirical P(max <= m_n + z_probe) in the bin
    double predicted = 0.0;    // exp(-alpha mean(Z_k) exp(-theta z_probe))
    double deviation = 0.0;    // standardized
};

struct MixtureResult {
    double z_probe = 0.0;
    double statistic = 0.0;    // max standardized bin deviation
    double p_value = 0.0;      // Bonferroni-style binomial approximation
    std::vector<MixtureBin> bins;
};

// Bins replicates by Z_k quantile and compares each bin's conditional
// non-exceedance frequency with the Gumbel-mixture prediction. theta_bar
// comes from calibration and alpha from the tail fit; neither is refit.
MixtureResult mixture_test(std::span<const double> z_k,
                           std::span<const std::uint8_t> below, double alpha_star,
                           double theta_bar, double z_probe, int bins = 10);

// g_{n,delta}(i) = exp(-delta |i| (|i|/(n log n) ^ 1)).
double g_n_delta(int n, double delta, double x);

struct BarrierBoundRow {
    double beta = 0.0;
    double p_hat = 0.0;
    double std_err = 0.0;
    double bound_shape = 0.0;  // beta exp(-theta beta) g_{n,delta}(beta)
    double c_ratio = 0.0;      // p_hat / bound_shape
};

struct BarrierBoundResult {
    int n = 0;
    double delta = 0.0;
    double c_fit = 0.0;        // smallest C with p_hat <= C * shape on the range
    std::vector<BarrierBoundRow> rows;
};

BarrierBoundResult barrier_bound_check(std::span<const double> beta_list,
                                       std::span<const Estimate> p_hat, int n,
                                       double theta_bar, double delta);

// Barrier-constrained law of the recentered ancestor walk at generation
// n - ell: the path stays at or below the line j m_n/n + z and the
// histogram collects eta_bar(n-ell) - z (nonpositive values). Exact via
// the lattice dynamic program.
struct NuMeasure {
    double span = 1.0;
    std::vector<double> offsets;  // eta_bar(n-ell) - z, one per state
    std::vector<double> mass;
    double total = 0.0;           // P(path stays below the line)
    double mass_in_default_window = 0.0;  // offsets in (-ell, -ell^(2/5)]
};
NuMeasure nu_measure(const IncrementLaw& inc, int n, int ell, double z,
                     const ModelConstants& constants);

// gamma_ell(y) = P(eta*_ell > ell m_n/n + y) for a grid of y, from the
// exact max law at depth ell.
std::vector<TailObservation> gamma_ell_tail(const OffspringLaw& off,
                                            const IncrementLaw& inc, int ell,
                                            double slope,
                                            const std::vector<double>& y_list);

}  // namespace brw
