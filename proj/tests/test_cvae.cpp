#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "cvs/cvae.hpp"
#include "cvs/rng.hpp"
#include "cvs/surrogate.hpp"

using namespace cvs;
using nn::Shape;
using nn::Tensor;

namespace {

template <class T>
Tensor<T> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(s));
    Rng r(seed);
    for (T& v : t.data) v = static_cast<T>(lo + (hi - lo) * r.uniform());
    return t;
}

template <class T>
Tensor<T> normal_tensor(Shape s, std::uint64_t seed) {
    Tensor<T> t(std::move(s));
    Rng r(seed);
    for (T& v : t.data) v = static_cast<T>(r.normal());
    return t;
}

void fd_check_cvae(std::size_t k, double kl_weight, std::uint64_t seed) {
    Cvae<double> m(CvaeConfig{tiny_params(k), kl_weight});
    m.init(seed);
    auto params = m.parameters();
    Rng jitter(seed + 7);
    for (auto& p : params)
        for (double& v : p.value) v += 0.05 * jitter.normal();

    const std::size_t n = 3;
    const auto x = random_tensor<double>({n, 1, 8, 8}, seed + 1, 0.0, 1.0);
    const auto t = random_tensor<double>({n, k}, seed + 2, 0.0, 1.0);
    const auto eps = normal_tensor<double>({n, 2}, seed + 3);

    const LossTerms base = m.loss_and_gradients(x, t, eps);
    CHECK(base.total == doctest::Approx(m.loss(x, t, eps).total).epsilon(1e-14));

    const double h = 1e-5;
    std::size_t checked = 0;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double keep = p.value[i];
            p.value[i] = keep + h;
            const double up = m.loss(x, t, eps).total;
            p.value[i] = keep - h;
            const double down = m.loss(x, t, eps).total;
            p.value[i] = keep;
            const double numeric = (up - down) / (2 * h);
            const double denom = std::max({std::abs(numeric), std::abs(p.grad[i]), 1e-6});
            INFO(p.name << "[" << i << "] analytic " << p.grad[i] << " numeric " << numeric);
            CHECK(std::abs(numeric - p.grad[i]) / denom < 1e-4);
            ++checked;
        }
    }
    CHECK(checked == m.parameter_count());
}

}  // namespace

TEST_CASE("kl term closed form") {
    const std::vector<double> zero{0.0, 0.0}, one{1.0, 0.0}, lv{1.0, 0.0};
    CHECK(kl_term(zero, zero) == 0.0);
    CHECK(kl_term(one, zero) == doctest::Approx(0.5));
    CHECK(kl_term(zero, lv) == doctest::Approx((std::exp(1.0) - 2.0) / 2.0));
    CHECK_THROWS_AS(kl_term(zero, std::vector<double>{0.0}), std::invalid_argument);
}

TEST_CASE("architectures mirror back to the input shape") {
    for (const ArchitectureParams& p : {table1_params(), table2_params(), reduced_plate_params(25, 25, 8), tiny_params(3)}) {
        const Architecture a = build_architecture(p);
        nn::Sequential<float> dec(a.decoder, Shape{a.decoder_input()});
        CHECK(dec.output_shape() == a.input);
        nn::Sequential<float> enc(a.encoder, a.input);
        CHECK(nn::output_shape(a.mu_head, enc.output_shape()) == Shape{p.latent_dim});
        CHECK(a.decoder.back().activation == nn::Activation::sigmoid);
        CHECK(a.mu_head.activation == nn::Activation::identity);
        CHECK(!describe(a).empty());
    }
    const Architecture t1 = build_architecture(table1_params());
    CHECK(t1.input == Shape{1, 50, 50});
    CHECK(t1.params.latent_dim == 32);
    const Architecture t2 = build_architecture(table2_params());
    CHECK(t2.input == Shape{1, 8, 24});
    CHECK(t2.params.condition_dim == 4);
    CHECK(t2.params.latent_dim == 2);

    ArchitectureParams bad = tiny_params();
    bad.rows = 0;
    CHECK_THROWS_AS(build_architecture(bad), std::invalid_argument);
    bad = tiny_params();
    bad.latent_dim = 0;
    CHECK_THROWS_AS(build_architecture(bad), std::invalid_argument);
    CHECK_THROWS(preset_architecture("nope"));
    CHECK(preset_architecture("tiny") == tiny_params());
}

TEST_CASE("loss composes reconstruction and scaled KL") {
    Cvae<double> m(CvaeConfig{tiny_params(1), 0.5});
    m.init(3);
    const auto x = random_tensor<double>({4, 1, 8, 8}, 4, 0.0, 1.0);
    const auto t = random_tensor<double>({4, 1}, 5, 0.0, 1.0);
    const auto eps = normal_tensor<double>({4, 2}, 6);

    const EncoderOutput<double> enc = m.encode(x);
    const Tensor<double> z = Cvae<double>::reparameterize(enc, eps);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(z.data[i] == doctest::Approx(enc.mu.data[i] + eps.data[i] * std::exp(0.5 * enc.logvar.data[i])));
    }
    const Tensor<double> zc = Cvae<double>::condition_concat(z, t);
    CHECK(zc.shape == Shape{4, 3});
    CHECK(zc.data[2] == t.data[0]);
    CHECK(zc.data[5] == t.data[1]);
    const Tensor<double> xhat = m.decode(zc);
    CHECK(xhat.shape == x.shape);
    CHECK(std::all_of(xhat.data.begin(), xhat.data.end(), [](double v) { return v > 0.0 && v < 1.0; }));

    double mse = 0.0, kl = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 64; ++j) mse += std::pow(xhat.sample(i)[j] - x.sample(i)[j], 2) / 64.0 / 4.0;
        kl += kl_term(std::span<const double>(enc.mu.sample(i), 2), std::span<const double>(enc.logvar.sample(i), 2)) / 4.0;
    }
    const LossTerms l = m.loss(x, t, eps);
    CHECK(l.mse == doctest::Approx(mse).epsilon(1e-12));
    CHECK(l.kl == doctest::Approx(kl).epsilon(1e-12));
    CHECK(l.total == doctest::Approx(mse + 0.5 * kl / 64.0).epsilon(1e-12));

    CHECK_THROWS_AS(m.loss(x, random_tensor<double>({3, 1}, 1), eps), std::invalid_argument);
    CHECK_THROWS_AS(m.loss(x, t, normal_tensor<double>({4, 3}, 1)), std::invalid_argument);
    CHECK_THROWS_AS(Cvae<double>(CvaeConfig{tiny_params(), -1.0}), std::invalid_argument);
}

TEST_CASE("finite-difference gradient of the full loss, one condition") { fd_check_cvae(1, 0.7, 11); }

TEST_CASE("finite-difference gradient of the full loss, four conditions") { fd_check_cvae(4, 1.0, 12); }

TEST_CASE("clamped logvar passes no gradient to its head") {
    Cvae<double> m(CvaeConfig{tiny_params(1), 1.0});
    m.init(1);
    for (auto& p : m.parameters()) {
        if (p.name.rfind("logvar_head.", 0) == 0 && p.value.size() == 2) std::fill(p.value.begin(), p.value.end(), 50.0);
    }
    const auto x = random_tensor<double>({2, 1, 8, 8}, 1, 0.0, 1.0);
    const auto t = random_tensor<double>({2, 1}, 2, 0.0, 1.0);
    const auto eps = normal_tensor<double>({2, 2}, 3);
    const auto enc = m.encode(x);
    CHECK(std::all_of(enc.logvar.data.begin(), enc.logvar.data.end(), [](double v) { return v == kLogvarBound; }));
    const LossTerms l = m.loss_and_gradients(x, t, eps);
    CHECK(std::isfinite(l.total));
    bool saw_head = false;
    for (const auto& p : m.parameters()) {
        if (p.name.rfind("logvar_head.", 0) != 0) continue;
        saw_head = true;
        for (double g : p.grad) CHECK(g == 0.0);
    }
    CHECK(saw_head);
}

TEST_CASE("init is seeded and parameters are named") {
    Cvae<float> a(CvaeConfig{tiny_params(1), 1.0}), b(CvaeConfig{tiny_params(1), 1.0});
    a.init(5);
    b.init(5);
    auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(std::equal(pa[i].value.begin(), pa[i].value.end(), pb[i].value.begin()));
    }
    b.init(6);
    for (std::size_t i = 0; i < pa.size(); ++i) any_diff |= !std::equal(pa[i].value.begin(), pa[i].value.end(), pb[i].value.begin());
    CHECK(any_diff);
    CHECK(pa.front().name.rfind("encoder.", 0) == 0);
    CHECK(pa.back().name.rfind("decoder.", 0) == 0);
}

TEST_CASE("surrogate sampling") {
    SurrogateModel m{StrainComponent::yy, MinMaxScaler{{0, -2.0, 0}, {0, 3.0, 0}, {7.0}, {10.0}}, Cvae<float>(CvaeConfig{tiny_params(1), 1.0})};
    m.cvae.init(9);
    const std::vector<double> t{8.0};
    bool extrap = true;
    const std::vector<double> a = sample_conditional(m, t, 50, 4, &extrap);
    CHECK(!extrap);
    CHECK(a.size() == 50u * 64u);
    CHECK(std::all_of(a.begin(), a.end(), [](double v) { return v > -2.0 && v < 3.0; }));
    CHECK(sample_conditional(m, t, 50, 4) == a);
    CHECK(sample_conditional(m, t, 50, 5) != a);

    const std::vector<double> far{12.0};
    sample_conditional(m, far, 2, 4, &extrap);
    CHECK(extrap);
    CHECK(inside_training_range(m.scaler, t));
    CHECK(!inside_training_range(m.scaler, far));

    // decode_physical matches unscaling the raw decoder output.
    const std::vector<float> z = latent_draws(3, 2, 8);
    const std::vector<double> conds{7.5, 8.5, 9.5};
    const std::vector<double> phys = decode_physical(m, conds, z, 3);
    Tensor<float> zc({3, 3});
    for (std::size_t i = 0; i < 3; ++i) {
        zc.data[i * 3] = z[i * 2];
        zc.data[i * 3 + 1] = z[i * 2 + 1];
        zc.data[i * 3 + 2] = static_cast<float>((conds[i] - 7.0) / 3.0);
    }
    const Tensor<float> raw = m.cvae.decode(zc);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(phys[i] == doctest::Approx(-2.0 + 5.0 * raw.data[i]).epsilon(1e-6));

    const std::vector<float> big = latent_draws(20000, 2, 1);
    double s = 0, ss = 0;
    for (float v : big) {
        s += v;
        ss += v * v;
    }
    CHECK(std::abs(s / big.size()) < 0.03);
    CHECK(ss / big.size() == doctest::Approx(1.0).epsilon(0.03));
}
