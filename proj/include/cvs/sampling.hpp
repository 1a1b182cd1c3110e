#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cvs {

/// n points in [0,1)^d, row-major (point i, dimension j at i*d + j).
/// Every dimension has exactly one point in each stratum [k/n, (k+1)/n).
struct LhsDesign {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> points;

    double operator()(std::size_t i, std::size_t j) const { return points[i * d + j]; }
};

/// Latin hypercube design with an independent random stratum permutation per
/// dimension and a uniform jitter inside each stratum.
LhsDesign latin_hypercube(std::size_t n, std::size_t d, std::uint64_t seed);

/// Standard normal quantile. Rational approximation refined by one Halley
/// step against erfc; absolute error well below 1e-9 on (0, 1).
double inverse_normal_cdf(double u);

double transform_normal(double u, double mu, double sigma);
double transform_uniform(double u, double a, double b);

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;
};

/// Method-of-moments Beta parameters for a given mean and standard deviation.
BetaParams beta_params_from_moments(double mean, double std);

/// Inverse regularized incomplete beta at u, by safeguarded Newton iteration
/// inside a shrinking bracket (tolerance 1e-12).
double transform_beta(double u, double alpha, double beta);

/// A univariate law in physical units, mapped from LHS coordinates through its
/// inverse CDF.
struct Distribution {
    enum class Kind { normal, uniform, beta };

    Kind kind = Kind::uniform;
    double p1 = 0.0;  ///< normal: mean; uniform: a; beta: alpha
    double p2 = 1.0;  ///< normal: std;  uniform: b; beta: beta

    static Distribution normal(double mean, double std) { return {Kind::normal, mean, std}; }
    static Distribution uniform(double a, double b) { return {Kind::uniform, a, b}; }
    static Distribution beta(double alpha, double beta) { return {Kind::beta, alpha, beta}; }
    static Distribution beta_from_moments(double mean, double std);

    /// Throws std::invalid_argument when the parameters are infeasible.
    void validate() const;
    double quantile(double u) const;
    double mean() const;
    std::string describe() const;
};

}  // namespace cvs
