#pragma once

// Test-only evidence of a single-child Goldbeter-Koshland mechanism, written
// from the model definition without touching the sampler. sigma is integrated
// by quadrature, the kinetic constants by importance sampling from their
// Gamma(2, 1/2) priors.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <Eigen/Dense>

namespace oracle {

struct Mechanism {
    int kinase = -1;     // -1: no kinase
    int inhibitor = -1;  // -1: none
};

/// log of  int InvGamma(sigma; 6, 1) (2 pi sigma^2)^(-n/2) exp(-ssr / (2 sigma^2)) dsigma
inline double log_sigma_marginal(double ssr, int n) {
    const double a = n + 7.0;
    const double peak = (1.0 + std::sqrt(1.0 + 4.0 * a * ssr)) / (2.0 * a);
    auto h = [&](double s) { return -a * std::log(s) - ssr / (2.0 * s * s) - 1.0 / s; };
    const double top = h(peak);
    boost::math::quadrature::sinh_sinh<double> rule;
    const double area = rule.integrate([&](double t) {
        if (t > 40 || t < -40) return 0.0;
        const double s = peak * std::exp(t);
        return std::exp(h(s) - top) * s;
    });
    return top + std::log(area) - 0.5 * n * std::log(2.0 * M_PI) - std::lgamma(6.0);
}

class SigmaTable {
  public:
    explicit SigmaTable(int n) : n_(n) {
        std::vector<double> v;
        for (int k = 0; k < kPoints; ++k) v.push_back(log_sigma_marginal(std::exp(kLow + k * kStep), n));
        spline_ = boost::math::interpolators::cardinal_cubic_b_spline<double>(v.begin(), v.end(), kLow, kStep);
    }
    double operator()(double ssr) const {
        const double t = std::log(ssr);
        if (t < kLow || t > kLow + (kPoints - 1) * kStep) return log_sigma_marginal(ssr, n_);
        return spline_(t);
    }

  private:
    static constexpr int kPoints = 6000;
    static constexpr double kLow = -16.0;
    static constexpr double kStep = 0.005;
    int n_;
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
};

inline double ssr_of(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x0, int child, const Mechanism& m, double v,
                     double ke, double ki) {
    double ssr = 0.0;
    const double mu = x.col(child).mean();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double f = mu;
        if (m.kinase >= 0) {
            double km = ke;
            if (m.inhibitor >= 0) km *= 1.0 + x(r, m.inhibitor) / ki;
            f = v * x(r, m.kinase) * x0(r, child) / (x0(r, child) + km);
        }
        const double e = std::log(x(r, child)) - std::log(f);
        ssr += e * e;
    }
    return ssr;
}

/// log p(D | M) with the stated number of importance draws.
inline double log_evidence(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x0, int child, const Mechanism& m,
                           const SigmaTable& sigma, std::size_t draws, std::uint64_t seed) {
    if (m.kinase < 0) return sigma(ssr_of(x, x0, child, m, 0, 0, 0));
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> prior(2.0, 0.5);
    std::vector<double> logw(draws);
    for (auto& w : logw) {
        const double v = prior(rng), ke = prior(rng);
        const double ki = m.inhibitor >= 0 ? prior(rng) : 1.0;
        w = sigma(ssr_of(x, x0, child, m, v, ke, ki));
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    double sum = 0.0;
    for (double w : logw) sum += std::exp(w - top);
    return top + std::log(sum / static_cast<double>(draws));
}

}  // namespace oracle
