#include "cvs/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

#include "cvs/rng.hpp"

namespace cvs {

FieldStats field_stats(std::span<const double> fields, std::size_t n, std::size_t rows, std::size_t cols) {
    if (n == 0) throw std::invalid_argument("field_stats: no fields");
    const std::size_t p = rows * cols;
    if (p == 0 || fields.size() != n * p) throw std::invalid_argument("field_stats: data does not hold n fields of the given shape");
    FieldStats s{rows, cols, std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) s.mean[j] += fields[i * p + j];
    }
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            const double d = fields[i * p + j] - s.mean[j];
            s.std[j] += d * d;
        }
    }
    for (double& v : s.std) v = std::sqrt(v / static_cast<double>(n));
    return s;
}

ErrorSample normalized_errors(const FieldStats& exact, const FieldStats& pred) {
    if (exact.rows != pred.rows || exact.cols != pred.cols || exact.mean.size() != pred.mean.size() ||
        exact.std.size() != pred.std.size()) {
        throw std::invalid_argument("normalized_errors: field shapes differ");
    }
    auto rel = [](const std::vector<double>& ref, const std::vector<double>& est, const char* what) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < ref.size(); ++j) {
            num += (ref[j] - est[j]) * (ref[j] - est[j]);
            den += ref[j] * ref[j];
        }
        if (!(den > 0.0)) throw std::invalid_argument(std::string("normalized_errors: reference ") + what + " field has zero norm");
        return std::sqrt(num / den);
    };
    ErrorSample e;
    e.e_mu = rel(exact.mean, pred.mean, "mean");
    e.e_sigma = rel(exact.std, pred.std, "std");
    return e;
}

FieldDecoder surrogate_decoder(const SurrogateModel& model) {
    return [&model](std::span<const double> c, std::span<const float> z, std::size_t n) { return decode_physical(model, c, z, n); };
}

std::vector<double> predict_fields(const FieldDecoder& decode, std::size_t latent_dim, std::span<const double> conditions,
                                   std::size_t n, std::uint64_t seed) {
    return decode(conditions, latent_draws(n, latent_dim, seed), n);
}

FieldStats predicted_stats(const SurrogateModel& model, std::span<const double> conditions, std::size_t n, std::size_t rows,
                           std::size_t cols, std::uint64_t seed) {
    return field_stats(predict_fields(surrogate_decoder(model), model.cvae.latent_dim(), conditions, n, seed), n, rows, cols);
}

std::uint64_t repetition_seed(std::uint64_t master, std::uint32_t rep) { return derive_seed(master, {3, rep}); }

std::vector<ErrorSample> error_mc(const FieldStats& exact, const FieldDecoder& decode, std::size_t latent_dim,
                                  std::span<const double> conditions, std::size_t n, std::size_t n_mc, std::uint64_t seed) {
    if (n_mc == 0) throw std::invalid_argument("error_mc: n_mc must be positive");
    std::vector<ErrorSample> out(n_mc);
    for (std::size_t r = 0; r < n_mc; ++r) {
        const auto rep = static_cast<std::uint32_t>(r);
        const std::uint64_t s = repetition_seed(seed, rep);
        const FieldStats pred = field_stats(predict_fields(decode, latent_dim, conditions, n, s), n, exact.rows, exact.cols);
        out[r] = normalized_errors(exact, pred);
        out[r].rep = rep;
        out[r].seed = s;
    }
    return out;
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double skewness(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("skewness of an empty sample");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double m2 = 0.0, m3 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(x.size());
    m3 /= static_cast<double>(x.size());
    return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

KdeCurve kde_pdf(std::span<const double> samples, const KdeOptions& options) {
    if (samples.size() < 2) throw std::invalid_argument("kde_pdf needs at least two samples");
    for (double v : samples) {
        if (!std::isfinite(v)) throw std::invalid_argument("kde_pdf: non-finite sample");
    }
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it, hi = *hi_it;
    const double n = static_cast<double>(samples.size());

    KdeCurve c;
    std::vector<double> centers(samples.begin(), samples.end());
    if (hi == lo) {
        centers = {lo};
        c.bandwidth = options.bandwidth > 0.0 ? options.bandwidth : std::max(std::abs(lo) * 1e-3, 1e-12);
    } else if (options.bandwidth > 0.0) {
        c.bandwidth = options.bandwidth;
    } else {
        double mean = 0.0;
        for (double v : samples) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : samples) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / (n - 1.0));
        std::vector<double> sorted(samples.begin(), samples.end());
        const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
        const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
        c.bandwidth = 0.9 * spread * std::pow(n, -0.2);
    }
    const double h = c.bandwidth;
    const double a = lo - 4.0 * h, b = hi + 4.0 * h;
    const auto wanted = static_cast<std::size_t>(std::ceil((b - a) / (h / 4.0))) + 1;
    const std::size_t m = std::clamp<std::size_t>(wanted, 64, std::max<std::size_t>(options.max_points, 64));
    c.x.resize(m);
    c.density.assign(m, 0.0);
    const double norm = 1.0 / (static_cast<double>(centers.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < m; ++i) {
        const double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(m - 1);
        double s = 0.0;
        for (double v : centers) {
            const double u = (x - v) / h;
            s += std::exp(-0.5 * u * u);
        }
        c.x[i] = x;
        c.density[i] = s * norm;
    }
    return c;
}

PixelIndex probe_pixel(const ProbeLocation& loc, double length_x, double length_y, std::size_t rows, std::size_t cols) {
    const double x = loc.x + 0.5 * length_x, y = loc.y + 0.5 * length_y;
    if (!(x >= 0.0 && x <= length_x && y >= 0.0 && y <= length_y)) {
        throw std::invalid_argument(fmt::format("probe ({}, {}) lies outside the plate", loc.x, loc.y));
    }
    auto index = [](double u, double len, std::size_t count) {
        return std::min(static_cast<std::size_t>(std::floor(u / len * static_cast<double>(count))), count - 1);
    };
    return {index(y, length_y, rows), index(x, length_x, cols)};
}

std::vector<double> pixel_series(std::span<const double> fields, std::size_t n, std::size_t cols, const PixelIndex& px) {
    const std::size_t p = fields.size() / n;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fields[i * p + px.row * cols + px.col];
    return out;
}

std::vector<ProbeCurves> probe_pdfs(std::span<const double> exact_fields, std::span<const double> pred_fields, std::size_t n,
                                    std::span<const ProbeLocation> locations, double length_x, double length_y,
                                    std::size_t rows, std::size_t cols, const KdeOptions& kde) {
    if (exact_fields.size() != n * rows * cols || pred_fields.size() != exact_fields.size()) {
        throw std::invalid_argument("probe_pdfs: field sets do not match");
    }
    std::vector<ProbeCurves> out;
    for (const ProbeLocation& loc : locations) {
        ProbeCurves c;
        c.location = loc;
        c.pixel = probe_pixel(loc, length_x, length_y, rows, cols);
        const auto e = pixel_series(exact_fields, n, cols, c.pixel);
        const auto p = pixel_series(pred_fields, n, cols, c.pixel);
        c.exact = kde_pdf(e, kde);
        c.predicted = kde_pdf(p, kde);
        c.exact_skewness = skewness(e);
        c.predicted_skewness = skewness(p);
        out.push_back(std::move(c));
    }
    return out;
}

ErrorSummary summarize(const std::vector<ErrorSample>& errors) {
    ErrorSummary s;
    s.n = errors.size();
    if (errors.empty()) return s;
    std::vector<double> mu, sigma;
    for (const ErrorSample& e : errors) {
        mu.push_back(e.e_mu);
        sigma.push_back(e.e_sigma);
    }
    s.median_mu = quantile(mu, 0.5);
    s.iqr_mu = quantile(mu, 0.75) - quantile(mu, 0.25);
    s.median_sigma = quantile(sigma, 0.5);
    s.iqr_sigma = quantile(sigma, 0.75) - quantile(sigma, 0.25);
    return s;
}

std::vector<double> component_fields(const Dataset& data, std::size_t component) {
    if (component >= data.n_components) throw std::invalid_argument("component index out of range for this dataset");
    std::vector<double> out;
    out.reserve(data.size() * data.pixels());
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (float v : data.field(i, component)) out.push_back(v);
    }
    return out;
}

std::vector<double> conditions_of(const Dataset& data) {
    std::vector<double> out;
    for (const SampleRecord& r : data.records) out.insert(out.end(), r.condition.begin(), r.condition.end());
    return out;
}

EvalReport evaluate(const SurrogateModel& model, const Dataset& test, const EvalOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    if (test.records.empty()) throw std::invalid_argument("evaluate: empty test split");
    if (test.condition_dim != model.cvae.condition_dim() || test.rows != model.cvae.architecture().input[1] ||
        test.cols != model.cvae.architecture().input[2]) {
        throw std::invalid_argument("evaluate: test data does not match the network shapes");
    }
    const std::size_t n = test.size(), c = model.component_index();
    const auto exact_fields = component_fields(test, c);
    const auto conditions = conditions_of(test);

    EvalReport r;
    r.component = model.component;
    r.exact = field_stats(exact_fields, n, test.rows, test.cols);
    const FieldDecoder decode = surrogate_decoder(model);
    r.errors = error_mc(r.exact, decode, model.cvae.latent_dim(), conditions, n, options.n_mc, options.seed);
    const auto pred_fields = predict_fields(decode, model.cvae.latent_dim(), conditions, n, repetition_seed(options.seed, 0));
    r.predicted = field_stats(pred_fields, n, test.rows, test.cols);
    r.probes = probe_pdfs(exact_fields, pred_fields, n, options.probes, options.length_x, options.length_y, test.rows, test.cols,
                          options.kde);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.metadata["component"] = std::string(component_name(model.component));
    r.metadata["test_instances"] = std::to_string(n);
    r.metadata["n_mc"] = std::to_string(options.n_mc);
    r.metadata["seed"] = std::to_string(options.seed);
    r.metadata["wall_seconds"] = fmt::format("{:.3f}", secs);
    return r;
}

std::string summary_text(const ErrorSummary& s) {
    return fmt::format("samples {}\nmedian_e_mu {:.6e}\niqr_e_mu {:.6e}\nmedian_e_sigma {:.6e}\niqr_e_sigma {:.6e}\n", s.n,
                       s.median_mu, s.iqr_mu, s.median_sigma, s.iqr_sigma);
}

void write_report(const EvalReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path root(dir);
    {
        auto out = fmt::output_file((root / "field_stats.csv").string());
        out.print("i,j,exact_mean,exact_std,pred_mean,pred_std\n");
        for (std::size_t i = 0; i < r.exact.rows; ++i) {
            for (std::size_t j = 0; j < r.exact.cols; ++j) {
                const std::size_t q = i * r.exact.cols + j;
                out.print("{},{},{:.10e},{:.10e},{:.10e},{:.10e}\n", i, j, r.exact.mean[q], r.exact.std[q], r.predicted.mean[q],
                          r.predicted.std[q]);
            }
        }
    }
    {
        auto out = fmt::output_file((root / "error_samples.csv").string());
        out.print("rep,seed,e_mu,e_sigma\n");
        for (const ErrorSample& e : r.errors) out.print("{},{},{:.10e},{:.10e}\n", e.rep, e.seed, e.e_mu, e.e_sigma);
    }
    {
        auto out = fmt::output_file((root / "kde_curves.csv").string());
        out.print("probe,x_m,y_m,row,col,source,bandwidth,value,density\n");
        for (std::size_t k = 0; k < r.probes.size(); ++k) {
            const ProbeCurves& p = r.probes[k];
            for (const auto& [name, curve] : {std::pair{"exact", &p.exact}, std::pair{"surrogate", &p.predicted}}) {
                for (std::size_t i = 0; i < curve->x.size(); ++i) {
                    out.print("{},{},{},{},{},{},{:.10e},{:.10e},{:.10e}\n", k, p.location.x, p.location.y, p.pixel.row, p.pixel.col,
                              name, curve->bandwidth, curve->x[i], curve->density[i]);
                }
            }
        }
    }
    std::ofstream out(root / "summary.txt", std::ios::trunc);
    out << summary_text(summarize(r.errors));
    for (const ProbeCurves& p : r.probes) {
        out << fmt::format("probe ({}, {}) pixel ({}, {}) skewness exact {:.4f} surrogate {:.4f}\n", p.location.x, p.location.y,
                           p.pixel.row, p.pixel.col, p.exact_skewness, p.predicted_skewness);
    }
    for (const auto& [k, v] : r.metadata) out << k << ' ' << v << '\n';
    if (!out) throw std::runtime_error("failed to write summary in " + dir);
}

std::vector<ErrorSample> read_error_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "rep,seed,e_mu,e_sigma") throw std::runtime_error(path + " is not an error-sample table");
    std::vector<ErrorSample> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        ErrorSample e;
        if (!(ss >> e.rep >> e.seed >> e.e_mu >> e.e_sigma)) throw std::runtime_error("malformed row in " + path + ": " + line);
        out.push_back(e);
    }
    return out;
}

}  // namespace cvs
