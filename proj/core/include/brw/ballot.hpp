#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "brw/stats.hpp"
#include "brw/tilt.hpp"

namespace brw {

// Barrier curve k -> -y - h(k ^ (n-k)) - d k applied for 0 < k < n, in the
// coordinates of the raw walk S_k (the drifted walk S_k + d k sees the
// plain floor -y - h). `strict` selects S_k > bar versus S_k >= bar.
struct BarrierSpec {
    enum class Curve { None, SymmetricLog, Custom };

    double y = 0.0;
    Curve curve = Curve::None;
    double coefficient = 0.0;       // SymmetricLog: h = coeff * (log(k ^ (n-k)))_+
    std::vector<double> custom_h;   // Custom: tabulated h(0..n), nonnegative
    bool strict = false;
    double drift = 0.0;             // per-step d

    static BarrierSpec floor_at(double y, bool strict = false, double drift = 0.0);
    static BarrierSpec symmetric_log(double y, double coefficient, bool strict = false,
                                     double drift = 0.0);
    static BarrierSpec custom(double y, std::vector<double> h, bool strict = false,
                              double drift = 0.0);

    double h_value(int k, int n) const;
    // Threshold on the raw walk at step k.
    double value(int k, int n) const { return -y - h_value(k, n) - drift * k; }
};

// Terminal window for the drifted walk S_n + d n; b may be +infinity.
struct TerminalWindow {
    enum class Mode { Open, HalfOpen };  // (a,b) vs (a,b]

    double a = 0.0;
    double b = 0.0;
    Mode mode = Mode::Open;

    static TerminalWindow open(double a, double b) { return {a, b, Mode::Open}; }
    static TerminalWindow half_open(double a, double b) { return {a, b, Mode::HalfOpen}; }

    bool contains(double x) const {
        if (mode == Mode::Open) return x > a && x < b;
        return x > a && x <= b;
    }
    double length() const { return b - a; }
};

// Monte Carlo estimate of
//   P(S_n + d n in window, S_k + d k above barrier for 0 < k < n).
// The walk must be mean zero after drift removal. Deep-tail windows switch
// to an exponentially tilted proposal reweighted by walk_weight; an
// explicit proposal tilt overrides the heuristic.
Estimate mc_barrier_prob(const TiltedLaw& walk, int n, const BarrierSpec& barrier,
                         const TerminalWindow& window, std::size_t replicates,
                         std::uint64_t seed,
                         std::optional<double> proposal_theta = std::nullopt);

// Exact forward dynamic program over lattice states with barrier-clipped
// transitions. Result exact up to float accumulation.
double dp_barrier_prob(const TiltedLaw& walk, int n, const BarrierSpec& barrier,
                       const TerminalWindow& window);
double dp_barrier_prob(const IncrementLaw& walk, int n, const BarrierSpec& barrier,
                       const TerminalWindow& window);

// Terminal distribution of the barrier-clipped walk (drifted coordinates
// are the caller's business; states are raw walk positions).
struct LatticeDistribution {
    std::int64_t min_state = 0;
    double span = 1.0;
    std::vector<double> prob;
};
LatticeDistribution dp_barrier_terminal(const TiltedLaw& walk, int n,
                                        const BarrierSpec& barrier);

enum class BallotEngine { MonteCarlo, DynamicProgram };

struct ScalingRow {
    int n = 0;
    double p_hat = 0.0;
    double std_err = 0.0;
    double n32_p = 0.0;                    // n^(3/2) p_hat
    std::optional<double> ratio;           // p_hat(n_i) / p_hat(n_{i-1})
    double beta_star_est = 0.0;            // n32_p / ((b-a) y (y+a))
};

// n^(3/2) scaling table for a fixed barrier/window across a ladder of n;
// the curve is re-evaluated per n.
std::vector<ScalingRow> scaling_diagnostic(const TiltedLaw& walk,
                                           const BarrierSpec& barrier,
                                           const TerminalWindow& window,
                                           const std::vector<int>& n_list,
                                           std::size_t replicates, std::uint64_t seed,
                                           BallotEngine engine = BallotEngine::MonteCarlo);

struct PositivityProfileRow {
    double x = 0.0;                 // window [x, x+q)
    double emp = 0.0;               // sqrt(n) * empirical conditional mass
    double profile = 0.0;           // q x exp(-x^2/2n) / sqrt(n)
};

struct PositivityResult {
    Estimate p_cn;                  // P(S_1..S_n > 0)
    std::vector<PositivityProfileRow> rows;
    double sup_distance = 0.0;
    std::size_t conditional_hits = 0;
};

// Estimates P(C_n) and the conditioned terminal profile in windows of
// width q. Requires unit variance.
PositivityResult positivity_clt_diagnostic(const TiltedLaw& walk, int n, double q,
                                           std::size_t replicates, std::uint64_t seed,
                                           BallotEngine engine = BallotEngine::MonteCarlo);

// Exact P(C_n) for lattice walks.
double dp_positive_prob(const TiltedLaw& walk, int n);

struct SandwichResult {
    Estimate lower;
    Estimate mid;
    Estimate upper;
    bool holds = false;
};

// Time-reversal sandwich: bounds the barrier probability between the two
// reversed-walk probabilities with boundaries shifted by -a and -b.
SandwichResult reversal_sandwich_check(const TiltedLaw& walk, int n,
                                       const BarrierSpec& barrier,
                                       const TerminalWindow& window,
                                       std::size_t replicates, std::uint64_t seed,
                                       BallotEngine engine = BallotEngine::MonteCarlo);

}  // namespace brw
