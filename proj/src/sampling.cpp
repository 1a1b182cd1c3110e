#include "cvs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "cvs/rng.hpp"

namespace cvs {

LhsDesign latin_hypercube(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (n == 0 || d == 0) throw std::invalid_argument("latin_hypercube: n and d must be positive");
    LhsDesign design{n, d, std::vector<double>(n * d)};
    Rng rng(seed);
    std::vector<std::size_t> strata(n);
    const double width = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        rng.shuffle(strata.begin(), strata.end());
        for (std::size_t i = 0; i < n; ++i) {
            double p = (static_cast<double>(strata[i]) + rng.uniform_open()) * width;
            // Rounding can push the top of a stratum onto its upper edge.
            const double upper = static_cast<double>(strata[i] + 1) * width;
            if (p >= upper) p = std::nextafter(upper, 0.0);
            design.points[i * d + j] = p;
        }
    }
    return design;
}

double inverse_normal_cdf(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw std::invalid_argument("inverse_normal_cdf: u must lie in the open interval (0, 1)");
    }
    // 1 - u is exact here; the residual below would cancel near 1.
    if (u > 0.5) return -inverse_normal_cdf(1.0 - u);
    // Acklam's rational approximation.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (u < p_low) {
        const double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - p_low) {
        const double q = u - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // One Halley step on Phi(x) - u.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - u;
    const double g = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - g / (1.0 + 0.5 * x * g);
    return x;
}

double transform_normal(double u, double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("transform_normal: sigma must be positive");
    return mu + sigma * inverse_normal_cdf(u);
}

double transform_uniform(double u, double a, double b) {
    if (!(a < b)) throw std::invalid_argument("transform_uniform: requires a < b");
    const double x = a + u * (b - a);
    return (u < 1.0 && x >= b) ? std::nextafter(b, a) : x;
}

BetaParams beta_params_from_moments(double mean, double std) {
    if (!(mean > 0.0 && mean < 1.0)) throw std::invalid_argument("beta_params_from_moments: mean must lie in (0, 1)");
    if (!(std > 0.0)) throw std::invalid_argument("beta_params_from_moments: std must be positive");
    const double var = std * std;
    const double bound = mean * (1.0 - mean);
    if (!(var < bound)) {
        throw std::invalid_argument("beta_params_from_moments: variance infeasible for a beta law (need std^2 < mean(1-mean))");
    }
    const double common = bound / var - 1.0;
    return {mean * common, (1.0 - mean) * common};
}

double transform_beta(double u, double alpha, double beta) {
    if (!(alpha > 0.0 && beta > 0.0)) throw std::invalid_argument("transform_beta: alpha and beta must be positive");
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("transform_beta: u must lie in (0, 1)");

    double lo = 0.0;
    double hi = 1.0;
    // Normal approximation as the starting point.
    const double m = alpha / (alpha + beta);
    const double s = std::sqrt(alpha * beta / ((alpha + beta) * (alpha + beta) * (alpha + beta + 1.0)));
    double x = std::clamp(m + s * inverse_normal_cdf(u), 1e-6, 1.0 - 1e-6);

    constexpr double tol = 1e-12;
    for (int iter = 0; iter < 300; ++iter) {
        const double f = boost::math::ibeta(alpha, beta, x) - u;
        if (f == 0.0) return x;
        if (f > 0.0) hi = x; else lo = x;
        if (hi - lo < tol) return 0.5 * (lo + hi);

        const double dfdx = boost::math::ibeta_derivative(alpha, beta, x);
        double next = (dfdx > 0.0 && std::isfinite(dfdx)) ? x - f / dfdx : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < tol) return next;
        x = next;
    }
    std::ostringstream msg;
    msg << "transform_beta: inversion did not converge (u=" << u << ", alpha=" << alpha << ", beta=" << beta << ")";
    throw std::runtime_error(msg.str());
}

Distribution Distribution::beta_from_moments(double mean, double std) {
    const BetaParams p = beta_params_from_moments(mean, std);
    return beta(p.alpha, p.beta);
}

void Distribution::validate() const {
    switch (kind) {
    case Kind::normal:
        if (!(p2 > 0.0) || !std::isfinite(p1)) throw std::invalid_argument("normal distribution needs finite mean and std > 0");
        break;
    case Kind::uniform:
        if (!(p1 < p2)) throw std::invalid_argument("uniform distribution needs a < b");
        break;
    case Kind::beta:
        if (!(p1 > 0.0 && p2 > 0.0)) throw std::invalid_argument("beta distribution needs alpha, beta > 0");
        break;
    }
}

double Distribution::quantile(double u) const {
    switch (kind) {
    case Kind::normal: return transform_normal(u, p1, p2);
    case Kind::uniform: return transform_uniform(u, p1, p2);
    case Kind::beta: return transform_beta(u, p1, p2);
    }
    return 0.0;
}

double Distribution::mean() const {
    switch (kind) {
    case Kind::normal: return p1;
    case Kind::uniform: return 0.5 * (p1 + p2);
    case Kind::beta: return p1 / (p1 + p2);
    }
    return 0.0;
}

std::string Distribution::describe() const {
    std::ostringstream out;
    switch (kind) {
    case Kind::normal: out << "Normal(" << p1 << ", " << p2 << "^2)"; break;
    case Kind::uniform: out << "Uniform[" << p1 << ", " << p2 << "]"; break;
    case Kind::beta: out << "Beta(" << p1 << ", " << p2 << ")"; break;
    }
    return out.str();
}

}  // namespace cvs
