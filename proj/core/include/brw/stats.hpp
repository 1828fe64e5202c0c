#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace brw {

// Kahan compensated accumulator. Batch reducers use it so that merge
// order changes results by at most the compensation slack.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

// Streaming mean/variance (Welford).
class Welford {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double std_error() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

    // Chan et al. pairwise merge; associative up to float rounding.
    void merge(const Welford& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) { *this = o; return; }
        const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
        const double d = o.mean_ - mean_;
        const double n = na + nb;
        mean_ += d * nb / n;
        m2_ += o.m2_ + d * d * na * nb / n;
        n_ += o.n_;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct Estimate {
    double p_hat = 0.0;
    double std_err = 0.0;
    std::size_t replicates = 0;
};

// Dvoretzky-Kiefer-Wolfowitz band half-width at confidence 1-delta.
inline double dkw_epsilon(std::size_t n, double delta) {
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

inline double binomial_std_err(double p_hat, std::size_t n) {
    if (n == 0) return 0.0;
    return std::sqrt(std::max(p_hat * (1.0 - p_hat), 0.0) / static_cast<double>(n));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730951); }

// Delete-one jackknife standard error for a ratio of totals f = num/den,
// computable in O(n) from the per-replicate values.
inline double jackknife_ratio_std_err(std::span<const double> num,
                                      std::span<const double> den) {
    const std::size_t n = num.size();
    if (n < 2 || den.size() != n) return 0.0;
    KahanSum sn, sd;
    for (std::size_t i = 0; i < n; ++i) { sn.add(num[i]); sd.add(den[i]); }
    const double tn = sn.value(), td = sd.value();
    std::vector<double> leave(n);
    KahanSum mean_acc;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = td - den[i];
        leave[i] = d != 0.0 ? (tn - num[i]) / d : 0.0;
        mean_acc.add(leave[i]);
    }
    const double m = mean_acc.value() / static_cast<double>(n);
    KahanSum ss;
    for (double v : leave) ss.add((v - m) * (v - m));
    const double nn = static_cast<double>(n);
    return std::sqrt((nn - 1.0) / nn * ss.value());
}

}  // namespace brw
