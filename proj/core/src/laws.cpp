#include "brw/laws.hpp"

#include <algorithm>
#include <cmath>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr double kPmfTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// log((e^t - 1)/t) and its first two derivatives, stable through t = 0.
double log_e1m(double t) {
    if (std::abs(t) < 1e-4) {
        const double t2 = t * t;
        return t / 2.0 + t2 / 24.0 - t2 * t2 / 2880.0;
    }
    if (t > 0.0) return t + std::log(-std::expm1(-t)) - std::log(t);
    return std::log(-std::expm1(t)) - std::log(-t);
}

double log_e1m_d1(double t) {
    if (std::abs(t) < 1e-4) {
        return 0.5 + t / 12.0 - t * t * t / 720.0;
    }
    return 1.0 / (-std::expm1(-t)) - 1.0 / t;
}

double log_e1m_d2(double t) {
    if (std::abs(t) < 1e-3) {
        return 1.0 / 12.0 - t * t / 240.0;
    }
    const double em = std::expm1(-t);  // e^-t - 1
    const double s = -em;              // 1 - e^-t
    return 1.0 / (t * t) - (em + 1.0) / (s * s);
}

}  // namespace

OffspringLaw OffspringLaw::from_pmf(std::vector<std::pair<int, double>> pmf,
                                    bool allow_critical) {
    if (pmf.empty()) throw DomainError("offspring pmf is empty");
    std::sort(pmf.begin(), pmf.end());
    double total = 0.0, m1 = 0.0, m2 = 0.0;
    for (auto& [i, p] : pmf) {
        if (i < 1) throw AssumptionError("offspring index must be >= 1 (no extinction)");
        if (p < 0.0) throw DomainError("offspring probability is negative");
        total += p;
        m1 += i * p;
        m2 += static_cast<double>(i) * i * p;
    }
    if (std::abs(total - 1.0) > kPmfTol)
        throw DomainError("offspring probabilities must sum to 1 within 1e-12");
    if (!allow_critical && m1 <= 1.0)
        throw AssumptionError("offspring mean rho must exceed 1");

    OffspringLaw law;
    law.pmf_ = std::move(pmf);
    law.rho_ = m1;
    law.second_moment_ = m2;
    law.cdf_.reserve(law.pmf_.size());
    double acc = 0.0;
    for (auto& [i, p] : law.pmf_) {
        acc += p;
        law.cdf_.push_back(acc);
    }
    law.cdf_.back() = 1.0;
    return law;
}

int OffspringLaw::sample(CounterRng& rng) const {
    if (pmf_.size() == 1) return pmf_[0].first;
    const double u = rng.next_double();
    for (std::size_t j = 0; j + 1 < cdf_.size(); ++j) {
        if (u <= cdf_[j]) return pmf_[j].first;
    }
    return pmf_.back().first;
}

IncrementLaw IncrementLaw::gaussian(double mu, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("gaussian sigma must be positive");
    IncrementLaw law;
    law.kind_ = IncrementKind::Gaussian;
    law.params_ = {mu, sigma};
    law.mean_ = mu;
    law.variance_ = sigma * sigma;
    return law;
}

IncrementLaw IncrementLaw::shifted_exponential(double rate, double shift) {
    if (!(rate > 0.0)) throw DomainError("exponential rate must be positive");
    IncrementLaw law;
    law.kind_ = IncrementKind::ShiftedExponential;
    law.params_ = {rate, shift};
    law.mean_ = shift + 1.0 / rate;
    law.variance_ = 1.0 / (rate * rate);
    law.support_min_ = shift;
    law.domain_ = {-kInf, rate};
    return law;
}

IncrementLaw IncrementLaw::uniform(double a, double b) {
    if (!(a < b)) throw DomainError("uniform law requires a < b");
    IncrementLaw law;
    law.kind_ = IncrementKind::Uniform;
    law.params_ = {a, b};
    law.mean_ = 0.5 * (a + b);
    law.variance_ = (b - a) * (b - a) / 12.0;
    law.support_min_ = a;
    law.support_max_ = b;
    return law;
}

IncrementLaw IncrementLaw::lattice(std::vector<std::int64_t> points,
                                   std::vector<double> masses, double span) {
    if (points.empty() || points.size() != masses.size())
        throw DomainError("lattice law needs matching nonempty points/masses");
    if (!(span > 0.0)) throw DomainError("lattice span must be positive");

    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return points[x] < points[y]; });

    IncrementLaw law;
    law.kind_ = IncrementKind::LatticePmf;
    law.span_ = span;
    double total = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t idx : order) {
        if (!law.points_.empty() && law.points_.back() == points[idx])
            throw DomainError("lattice points must be distinct");
        if (masses[idx] < 0.0) throw DomainError("lattice mass is negative");
        const double x = points[idx] * span;
        law.points_.push_back(points[idx]);
        law.masses_.push_back(masses[idx]);
        total += masses[idx];
        m1 += x * masses[idx];
        m2 += x * x * masses[idx];
    }
    if (std::abs(total - 1.0) > kPmfTol)
        throw DomainError("lattice masses must sum to 1 within 1e-12");
    law.mean_ = m1;
    law.variance_ = m2 - m1 * m1;
    law.support_min_ = law.points_.front() * span;
    law.support_max_ = law.points_.back() * span;
    double acc = 0.0;
    for (double m : law.masses_) {
        acc += m;
        law.mass_cdf_.push_back(acc);
    }
    law.mass_cdf_.back() = 1.0;
    return law;
}

void IncrementLaw::require_domain(double theta) const {
    if (!theta_in_domain(theta))
        throw DomainError("theta outside the law's finite-MGF interval");
}

double IncrementLaw::log_mgf(double theta) const {
    require_domain(theta);
    switch (kind_) {
        case IncrementKind::Gaussian:
            return params_[0] * theta + 0.5 * params_[1] * params_[1] * theta * theta;
        case IncrementKind::ShiftedExponential:
            return params_[1] * theta + std::log(params_[0]) - std::log(params_[0] - theta);
        case IncrementKind::Uniform:
            return params_[0] * theta + log_e1m(theta * (params_[1] - params_[0]));
        case IncrementKind::LatticePmf: {
            double hi = -kInf;
            for (std::size_t i = 0; i < points_.size(); ++i)
                hi = std::max(hi, theta * points_[i] * span_ + std::log(masses_[i]));
            double s = 0.0;
            for (std::size_t i = 0; i < points_.size(); ++i)
                s += std::exp(theta * points_[i] * span_ + std::log(masses_[i]) - hi);
            return hi + std::log(s);
        }
    }
    throw DomainError("unreachable");
}

double IncrementLaw::mgf(double theta) const { return std::exp(log_mgf(theta)); }

double IncrementLaw::log_mgf_d1(double theta) const {
    require_domain(theta);
    switch (kind_) {
        case IncrementKind::Gaussian:
            return params_[0] + params_[1] * params_[1] * theta;
        case IncrementKind::ShiftedExponential:
            return params_[1] + 1.0 / (params_[0] - theta);
        case IncrementKind::Uniform:
            return params_[0] + (params_[1] - params_[0]) *
                                    log_e1m_d1(theta * (params_[1] - params_[0]));
        case IncrementKind::LatticePmf: {
            const auto w = tilted_lattice_masses(theta);
            double m = 0.0;
            for (std::size_t i = 0; i < points_.size(); ++i) m += points_[i] * span_ * w[i];
            return m;
        }
    }
    throw DomainError("unreachable");
}

double IncrementLaw::log_mgf_d2(double theta) const {
    require_domain(theta);
    switch (kind_) {
        case IncrementKind::Gaussian:
            return params_[1] * params_[1];
        case IncrementKind::ShiftedExponential: {
            const double d = params_[0] - theta;
            return 1.0 / (d * d);
        }
        case IncrementKind::Uniform: {
            const double w = params_[1] - params_[0];
            return w * w * log_e1m_d2(theta * w);
        }
        case IncrementKind::LatticePmf: {
            const auto w = tilted_lattice_masses(theta);
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                const double x = points_[i] * span_;
                m1 += x * w[i];
                m2 += x * x * w[i];
            }
            return m2 - m1 * m1;
        }
    }
    throw DomainError("unreachable");
}

double IncrementLaw::tilted_mean_inf() const {
    switch (kind_) {
        case IncrementKind::Gaussian: return -kInf;
        case IncrementKind::ShiftedExponential: return params_[1];  // theta -> -inf
        case IncrementKind::Uniform: return params_[0];
        case IncrementKind::LatticePmf: return support_min_;
    }
    return -kInf;
}

double IncrementLaw::tilted_mean_sup() const {
    switch (kind_) {
        case IncrementKind::Gaussian: return kInf;
        case IncrementKind::ShiftedExponential: return kInf;  // theta -> rate
        case IncrementKind::Uniform: return params_[1];
        case IncrementKind::LatticePmf: return support_max_;
    }
    return kInf;
}

double IncrementLaw::rate_sup() const {
    // I(lambda) increases toward -log P(X = top atom) on lattice laws and
    // is unbounded for the shipped continuous laws (no atom at the top).
    if (kind_ == IncrementKind::LatticePmf) return -std::log(masses_.back());
    return kInf;
}

double IncrementLaw::cdf(double x) const {
    switch (kind_) {
        case IncrementKind::Gaussian:
            return 0.5 * std::erfc(-(x - params_[0]) / (params_[1] * 1.4142135623730951));
        case IncrementKind::ShiftedExponential:
            return x <= params_[1] ? 0.0 : -std::expm1(-params_[0] * (x - params_[1]));
        case IncrementKind::Uniform:
            return std::clamp((x - params_[0]) / (params_[1] - params_[0]), 0.0, 1.0);
        case IncrementKind::LatticePmf: {
            double acc = 0.0;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (points_[i] * span_ <= x) acc += masses_[i];
            }
            return acc;
        }
    }
    return 0.0;
}

double IncrementLaw::sample(CounterRng& rng) const { return sample_tilted(0.0, rng); }

double IncrementLaw::sample_tilted(double theta, CounterRng& rng) const {
    require_domain(theta);
    switch (kind_) {
        case IncrementKind::Gaussian:
            return params_[0] + params_[1] * params_[1] * theta +
                   params_[1] * rng.next_gauss();
        case IncrementKind::ShiftedExponential:
            return params_[1] - std::log(rng.next_double()) / (params_[0] - theta);
        case IncrementKind::Uniform: {
            const double a = params_[0], b = params_[1];
            const double u = rng.next_double();
            const double t = theta * (b - a);
            if (std::abs(t) < 1e-10) return a + (b - a) * u;
            // Inverse CDF of the e^(theta x)-tilted uniform, written to
            // stay finite for large |t|.
            if (t > 30.0) return b + std::log(u + (1.0 - u) * std::exp(-t)) / theta;
            return a + std::log1p(u * std::expm1(t)) / theta;
        }
        case IncrementKind::LatticePmf: {
            const double u = rng.next_double();
            if (theta == 0.0) {
                for (std::size_t i = 0; i + 1 < mass_cdf_.size(); ++i)
                    if (u <= mass_cdf_[i]) return points_[i] * span_;
                return points_.back() * span_;
            }
            const auto w = tilted_lattice_masses(theta);
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < w.size(); ++i) {
                acc += w[i];
                if (u <= acc) return points_[i] * span_;
            }
            return points_.back() * span_;
        }
    }
    throw DomainError("unreachable");
}

double IncrementLaw::lattice_span() const {
    if (!is_lattice()) throw DomainError("lattice accessor on continuous law");
    return span_;
}

const std::vector<std::int64_t>& IncrementLaw::lattice_points() const {
    if (!is_lattice()) throw DomainError("lattice accessor on continuous law");
    return points_;
}

const std::vector<double>& IncrementLaw::lattice_masses() const {
    if (!is_lattice()) throw DomainError("lattice accessor on continuous law");
    return masses_;
}

std::vector<double> IncrementLaw::tilted_lattice_masses(double theta) const {
    if (!is_lattice()) throw DomainError("lattice accessor on continuous law");
    const double lphi = log_mgf(theta);
    std::vector<double> w(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i)
        w[i] = std::exp(theta * points_[i] * span_ + std::log(masses_[i]) - lphi);
    return w;
}

}  // namespace brw
