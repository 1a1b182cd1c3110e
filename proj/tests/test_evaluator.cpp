#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "cvs/evaluator.hpp"
#include "cvs/rng.hpp"

using namespace cvs;
namespace fs = std::filesystem;

namespace {

// Welford, one pixel at a time.
FieldStats welford_stats(const std::vector<double>& f, std::size_t n, std::size_t rows, std::size_t cols) {
    FieldStats s{rows, cols, {}, {}};
    const std::size_t p = rows * cols;
    for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = f[i * p + j];
            const double d = x - mean;
            mean += d / static_cast<double>(i + 1);
            m2 += d * (x - mean);
        }
        s.mean.push_back(mean);
        s.std.push_back(std::sqrt(m2 / static_cast<double>(n)));
    }
    return s;
}

std::vector<double> gaussian_sample(std::size_t n, std::uint64_t seed, double mu = 0.0, double sd = 1.0) {
    Rng r(seed);
    std::vector<double> v(n);
    for (double& x : v) x = mu + sd * r.normal();
    return v;
}

double trapezoid(const KdeCurve& c) {
    double s = 0.0;
    for (std::size_t i = 1; i < c.x.size(); ++i) s += 0.5 * (c.density[i] + c.density[i - 1]) * (c.x[i] - c.x[i - 1]);
    return s;
}

// Fields that depend on the condition plus a z-driven perturbation.
std::vector<double> toy_fields(std::span<const double> t, std::span<const float> z, std::size_t n, std::size_t p, double noise) {
    std::vector<double> out(n * p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) out[i * p + j] = t[i] * (1.0 + 0.1 * static_cast<double>(j)) + noise * z[i] * static_cast<double>(j % 3);
    return out;
}

}  // namespace

TEST_CASE("field statistics match a per-pixel Welford oracle") {
    const std::size_t n = 37, rows = 4, cols = 5;
    std::vector<double> f = gaussian_sample(n * rows * cols, 3, 1e-3, 2e-4);
    const FieldStats s = field_stats(f, n, rows, cols);
    const FieldStats o = welford_stats(f, n, rows, cols);
    for (std::size_t j = 0; j < rows * cols; ++j) {
        CHECK(s.mean[j] == doctest::Approx(o.mean[j]).epsilon(1e-12));
        CHECK(s.std[j] == doctest::Approx(o.std[j]).epsilon(1e-10));
    }
    const FieldStats one = field_stats(std::vector<double>(rows * cols, 2.0), 1, rows, cols);
    CHECK(one.std == std::vector<double>(rows * cols, 0.0));
    CHECK_THROWS_AS(field_stats(f, 36, rows, cols), std::invalid_argument);
}

TEST_CASE("normalized errors") {
    FieldStats e{1, 2, {3.0, 4.0}, {1.0, 0.0}};
    FieldStats p = e;
    ErrorSample r = normalized_errors(e, p);
    CHECK(r.e_mu == 0.0);
    CHECK(r.e_sigma == 0.0);
    p.mean = {3.3, 4.4};
    p.std = {0.0, 0.0};
    r = normalized_errors(e, p);
    CHECK(r.e_mu == doctest::Approx(0.1));
    CHECK(r.e_sigma == doctest::Approx(1.0));
    FieldStats zero{1, 2, {0.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(normalized_errors(zero, p), std::invalid_argument);
    FieldStats other{2, 1, {3.0, 4.0}, {1.0, 0.0}};
    CHECK_THROWS_AS(normalized_errors(e, other), std::invalid_argument);
}

TEST_CASE("a decoder that ignores the latent has zero spread") {
    const std::size_t n = 20, p = 6;
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = 7.0 + 0.15 * static_cast<double>(i);
    const std::vector<float> zeros(n, 0.0f);
    const FieldStats exact = field_stats(toy_fields(t, zeros, n, p, 0.0), n, 2, 3);

    const FieldDecoder flat = [&](std::span<const double> c, std::span<const float> z, std::size_t m) {
        return toy_fields(c, z, m, p, 0.0);
    };
    const auto errs = error_mc(exact, flat, 1, t, n, 4, 11);
    REQUIRE(errs.size() == 4);
    for (const ErrorSample& e : errs) {
        CHECK(e.e_mu == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(e.e_sigma == doctest::Approx(0.0).epsilon(1e-14));
    }

    // Exact data spread comes only from the condition; a latent-dependent
    // decoder adds spread and error.
    const FieldDecoder noisy = [&](std::span<const double> c, std::span<const float> z, std::size_t m) {
        return toy_fields(c, z, m, p, 0.5);
    };
    const auto e2 = error_mc(exact, noisy, 1, t, n, 4, 11);
    for (const ErrorSample& e : e2) CHECK(e.e_sigma > 0.01);

    // Per-condition constant decoder yields zero std at every pixel.
    const std::vector<double> one_t(n, 8.0);
    const FieldStats s = field_stats(predict_fields(flat, 1, one_t, n, 3), n, 2, 3);
    for (double v : s.std) CHECK(v < 1e-12);
}

TEST_CASE("repetitions are seeded independently of their order") {
    const std::size_t n = 10, p = 6;
    std::vector<double> t(n, 8.0);
    for (std::size_t i = 0; i < n; ++i) t[i] += 0.1 * static_cast<double>(i);
    const FieldStats exact = field_stats(toy_fields(t, std::vector<float>(n, 0.3f), n, p, 0.5), n, 2, 3);
    const FieldDecoder noisy = [&](std::span<const double> c, std::span<const float> z, std::size_t m) {
        return toy_fields(c, z, m, p, 0.5);
    };
    const auto a = error_mc(exact, noisy, 1, t, n, 6, 21);
    const auto b = error_mc(exact, noisy, 1, t, n, 3, 21);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a[i].rep == i);
        CHECK(a[i].seed == repetition_seed(21, static_cast<std::uint32_t>(i)));
        CHECK(a[i].e_mu == b[i].e_mu);
        CHECK(a[i].e_sigma == b[i].e_sigma);
    }
    CHECK(repetition_seed(21, 0) != repetition_seed(21, 1));
    CHECK(repetition_seed(21, 0) != repetition_seed(22, 0));
}

TEST_CASE("kernel density estimate") {
    const std::vector<double> x = gaussian_sample(2000, 5, 2.0, 0.5);
    const KdeCurve c = kde_pdf(x);
    CHECK(trapezoid(c) == doctest::Approx(1.0).epsilon(1e-3));
    // Silverman: 0.9 min(sd, IQR/1.34) n^-1/5
    double mean = 0, ss = 0;
    for (double v : x) mean += v;
    mean /= x.size();
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (x.size() - 1));
    const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
    CHECK(c.bandwidth == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(2000.0, -0.2)).epsilon(1e-12));
    const auto peak = std::max_element(c.density.begin(), c.density.end()) - c.density.begin();
    CHECK(c.x[peak] == doctest::Approx(2.0).epsilon(0.05));
    CHECK(c.density[peak] == doctest::Approx(1.0 / (0.5 * std::sqrt(2 * std::numbers::pi))).epsilon(0.1));
    CHECK(c.x.front() <= *std::min_element(x.begin(), x.end()) - 3.9 * c.bandwidth);
    for (std::size_t i = 1; i < c.x.size(); ++i) CHECK(c.x[i] - c.x[i - 1] <= c.bandwidth / 4.0 + 1e-12);

    const KdeCurve fixed = kde_pdf(x, KdeOptions{0.2, 2048});
    CHECK(fixed.bandwidth == 0.2);
    CHECK(trapezoid(fixed) == doctest::Approx(1.0).epsilon(1e-3));

    const KdeCurve degenerate = kde_pdf(std::vector<double>(10, 3.0));
    CHECK(degenerate.bandwidth > 0.0);
    CHECK(trapezoid(degenerate) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK_THROWS(kde_pdf(std::vector<double>{}));
}

TEST_CASE("skewness and quantiles") {
    CHECK(skewness(std::vector<double>{1, 2, 3}) == doctest::Approx(0.0));
    // {0,0,0,1}: m2 = 3/16, m3 = 3/32
    CHECK(skewness(std::vector<double>{0, 0, 0, 1}) == doctest::Approx((3.0 / 32.0) / std::pow(3.0 / 16.0, 1.5)));
    CHECK(skewness(std::vector<double>{4, 4, 4}) == 0.0);
    CHECK(quantile({4, 1, 3, 2}, 0.5) == 2.5);
    CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({7}, 0.9) == 7);
    const ErrorSummary s = summarize({{0, 0, 1.0, 10.0}, {1, 0, 2.0, 20.0}, {2, 0, 3.0, 30.0}, {3, 0, 4.0, 40.0}, {4, 0, 5.0, 50.0}});
    CHECK(s.n == 5);
    CHECK(s.median_mu == 3.0);
    CHECK(s.iqr_mu == 2.0);
    CHECK(s.median_sigma == 30.0);
    CHECK(s.iqr_sigma == 20.0);
    CHECK(summary_text(s).find("median_e_mu") != std::string::npos);
}

TEST_CASE("probe pixels") {
    PixelIndex c = probe_pixel({0.0, 0.0}, 1.0, 1.0, 25, 25);
    CHECK(c.row == 12);
    CHECK(c.col == 12);
    c = probe_pixel({-0.5, 0.5}, 1.0, 1.0, 25, 25);
    CHECK(c.row == 24);
    CHECK(c.col == 0);
    c = probe_pixel({1.0, -0.4}, 3.0, 1.0, 8, 24);
    CHECK(c.col == 20);
    CHECK(c.row == 0);
    CHECK_THROWS_AS(probe_pixel({0.6, 0.0}, 1.0, 1.0, 25, 25), std::invalid_argument);

    std::vector<double> f(3 * 6);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i);
    CHECK(pixel_series(f, 3, 3, PixelIndex{1, 2}) == std::vector<double>{5, 11, 17});

    const std::vector<double> exact = gaussian_sample(400 * 4, 8), pred = gaussian_sample(400 * 4, 9);
    const std::vector<ProbeLocation> locs{{0.0, 0.0}, {-0.4, 0.4}};
    const auto curves = probe_pdfs(exact, pred, 400, locs, 1.0, 1.0, 2, 2);
    REQUIRE(curves.size() == 2);
    CHECK(curves[1].pixel.row == 1);
    CHECK(curves[1].pixel.col == 0);
    CHECK(trapezoid(curves[0].exact) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(curves[0].predicted_skewness) < 0.5);
}

TEST_CASE("evaluate and report on a small model") {
    Dataset test{1, 3, 8, 8, {}};
    for (int i = 0; i < 12; ++i) {
        SampleRecord r;
        r.condition = {7.0f + 0.25f * static_cast<float>(i)};
        r.source_rvs = {0, 0, 0};
        for (int j = 0; j < 192; ++j) r.fields.push_back(0.01f * static_cast<float>((i + 1) * (j % 17)) - 0.3f);
        test.records.push_back(r);
    }
    SurrogateModel m{StrainComponent::yy, MinMaxScaler{{-1, -1, -1}, {1, 1, 1}, {7}, {10}}, Cvae<float>(CvaeConfig{tiny_params(1), 1.0})};
    m.cvae.init(2);
    EvalOptions o;
    o.n_mc = 5;
    o.seed = 4;
    o.probes = {{0.0, 0.0}, {0.2, -0.2}};
    const EvalReport r = evaluate(m, test, o);
    CHECK(r.component == StrainComponent::yy);
    CHECK(r.errors.size() == 5);
    CHECK(r.probes.size() == 2);
    CHECK(r.exact.rows == 8);
    const std::vector<double> exact_yy = component_fields(test, 1);
    const FieldStats oracle = welford_stats(exact_yy, 12, 8, 8);
    for (std::size_t j = 0; j < 64; ++j) CHECK(r.exact.mean[j] == doctest::Approx(oracle.mean[j]).epsilon(1e-12));
    CHECK(conditions_of(test).size() == 12);

    const fs::path dir = fs::temp_directory_path() / "cvs_eval_report";
    fs::remove_all(dir);
    write_report(r, dir.string());
    for (const char* f : {"field_stats.csv", "error_samples.csv", "kde_curves.csv", "summary.txt"}) CHECK(fs::exists(dir / f));
    const auto back = read_error_samples((dir / "error_samples.csv").string());
    REQUIRE(back.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(back[i].seed == r.errors[i].seed);
        CHECK(back[i].e_mu == doctest::Approx(r.errors[i].e_mu).epsilon(1e-9));
    }
    std::ifstream in(dir / "kde_curves.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "probe,x_m,y_m,row,col,source,bandwidth,value,density");
    fs::remove_all(dir);
}
