#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cvs/dataset.hpp"
#include "cvs/surrogate.hpp"

namespace cvs {

/// Elementwise mean and population standard deviation (divisor N).
struct FieldStats {
    std::size_t rows = 0, cols = 0;
    std::vector<double> mean, std;
};

/// `fields` holds n row-major fields of rows x cols back to back.
FieldStats field_stats(std::span<const double> fields, std::size_t n, std::size_t rows, std::size_t cols);

struct ErrorSample {
    std::uint32_t rep = 0;
    std::uint64_t seed = 0;
    double e_mu = 0.0;
    double e_sigma = 0.0;
};

/// Relative L2 errors of the mean and std fields. Throws std::invalid_argument
/// on a shape mismatch or a zero-norm reference.
ErrorSample normalized_errors(const FieldStats& exact, const FieldStats& pred);

/// Maps N conditions (N x k, physical) and N latent rows (N x l) to N physical
/// fields. Anything with this signature can stand in for a trained network.
using FieldDecoder = std::function<std::vector<double>(std::span<const double>, std::span<const float>, std::size_t)>;

FieldDecoder surrogate_decoder(const SurrogateModel& model);

/// One latent draw per condition from `seed`, decoded.
std::vector<double> predict_fields(const FieldDecoder& decode, std::size_t latent_dim, std::span<const double> conditions,
                                   std::size_t n, std::uint64_t seed);
FieldStats predicted_stats(const SurrogateModel& model, std::span<const double> conditions, std::size_t n, std::size_t rows,
                           std::size_t cols, std::uint64_t seed);

/// Seed of Monte-Carlo repetition `rep`; independent of execution order.
std::uint64_t repetition_seed(std::uint64_t master, std::uint32_t rep);

/// n_mc latent redraws over the test conditions against fixed exact stats.
std::vector<ErrorSample> error_mc(const FieldStats& exact, const FieldDecoder& decode, std::size_t latent_dim,
                                  std::span<const double> conditions, std::size_t n, std::size_t n_mc, std::uint64_t seed);

struct KdeOptions {
    double bandwidth = 0.0;  ///< > 0 overrides Silverman's rule
    std::size_t max_points = 2048;
};

struct KdeCurve {
    double bandwidth = 0.0;
    std::vector<double> x, density;
};

/// Gaussian KDE on [min - 4h, max + 4h] with spacing at most h/4 (subject to
/// max_points). All-equal samples fall back to a single kernel.
KdeCurve kde_pdf(std::span<const double> samples, const KdeOptions& options = {});

/// Population skewness m3 / m2^(3/2); zero for a constant sample.
double skewness(std::span<const double> samples);
/// Linear-interpolation quantile of an unsorted sample.
double quantile(std::vector<double> samples, double q);

/// Location in plate coordinates relative to the center (m).
struct ProbeLocation {
    double x = 0.0, y = 0.0;
};

struct PixelIndex {
    std::size_t row = 0, col = 0;
};

/// Element whose center is nearest to the location. Throws
/// std::invalid_argument outside the plate.
PixelIndex probe_pixel(const ProbeLocation& loc, double length_x, double length_y, std::size_t rows, std::size_t cols);

std::vector<double> pixel_series(std::span<const double> fields, std::size_t n, std::size_t cols, const PixelIndex& px);

struct ProbeCurves {
    ProbeLocation location;
    PixelIndex pixel;
    KdeCurve exact, predicted;
    double exact_skewness = 0.0, predicted_skewness = 0.0;
};

std::vector<ProbeCurves> probe_pdfs(std::span<const double> exact_fields, std::span<const double> pred_fields, std::size_t n,
                                    std::span<const ProbeLocation> locations, double length_x, double length_y,
                                    std::size_t rows, std::size_t cols, const KdeOptions& kde = {});

struct EvalOptions {
    std::size_t n_mc = 1000;
    std::uint64_t seed = 1;
    std::vector<ProbeLocation> probes;
    double length_x = 1.0, length_y = 1.0;
    KdeOptions kde;
};

struct ErrorSummary {
    std::size_t n = 0;
    double median_mu = 0.0, iqr_mu = 0.0;
    double median_sigma = 0.0, iqr_sigma = 0.0;
};

ErrorSummary summarize(const std::vector<ErrorSample>& errors);

struct EvalReport {
    StrainComponent component = StrainComponent::xx;
    FieldStats exact, predicted;  ///< predicted from repetition 0
    std::vector<ErrorSample> errors;
    std::vector<ProbeCurves> probes;
    std::map<std::string, std::string> metadata;  ///< written to summary.txt only
};

/// Physical fields of one component, n x H*W.
std::vector<double> component_fields(const Dataset& data, std::size_t component);
std::vector<double> conditions_of(const Dataset& data);

EvalReport evaluate(const SurrogateModel& model, const Dataset& test, const EvalOptions& options);

/// field_stats.csv, error_samples.csv, kde_curves.csv and summary.txt.
void write_report(const EvalReport& report, const std::string& dir);
std::vector<ErrorSample> read_error_samples(const std::string& path);
std::string summary_text(const ErrorSummary& s);

}  // namespace cvs
