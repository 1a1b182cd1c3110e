#include "cvs/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cvs/rng.hpp"

namespace cvs {

using nn::Shape;
using nn::Tensor;

double kl_term(std::span<const double> mu, std::span<const double> logvar) {
    if (mu.size() != logvar.size()) throw std::invalid_argument("kl_term: mu and logvar differ in length");
    double s = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) s += 1.0 + logvar[j] - mu[j] * mu[j] - std::exp(logvar[j]);
    return -0.5 * s;
}

namespace {

template <class T>
double kl_row(const T* mu, const T* lv, std::size_t l) {
    double s = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
        const double m = mu[j], v = lv[j];
        s += 1.0 + v - m * m - std::exp(v);
    }
    return -0.5 * s;
}

}  // namespace

template <class T>
Cvae<T>::Cvae(CvaeConfig config) : config_(std::move(config)), arch_(build_architecture(config_.arch)) {
    if (!(config_.kl_weight >= 0.0) || !std::isfinite(config_.kl_weight)) throw std::invalid_argument("kl_weight must be finite and non-negative");
    encoder_ = nn::Sequential<T>(arch_.encoder, arch_.input);
    const Shape hidden = encoder_.output_shape();
    mu_head_ = nn::Sequential<T>({arch_.mu_head}, hidden);
    logvar_head_ = nn::Sequential<T>({arch_.logvar_head}, hidden);
    decoder_ = nn::Sequential<T>(arch_.decoder, Shape{arch_.decoder_input()});
}

template <class T>
void Cvae<T>::init(std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0}));
    encoder_.init(rng);
    mu_head_.init(rng);
    logvar_head_.init(rng);
    decoder_.init(rng);
}

template <class T>
EncoderOutput<T> Cvae<T>::encode(const Tensor<T>& x) const {
    if (x.sample_shape() != arch_.input) {
        throw std::invalid_argument("encode: expected samples of shape " + nn::shape_string(arch_.input) + ", got " +
                                    nn::shape_string(x.sample_shape()));
    }
    Tensor<T> h = encoder_.forward(x);
    EncoderOutput<T> out{mu_head_.forward(h), logvar_head_.forward(h)};
    const T bound = static_cast<T>(kLogvarBound);
    for (T& v : out.logvar.data) v = std::clamp(v, -bound, bound);
    return out;
}

template <class T>
Tensor<T> Cvae<T>::reparameterize(const EncoderOutput<T>& enc, const Tensor<T>& eps) {
    if (enc.mu.shape != eps.shape || enc.logvar.shape != eps.shape) throw std::invalid_argument("reparameterize: shape mismatch");
    Tensor<T> z(eps.shape);
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = enc.mu.data[i] + eps.data[i] * std::exp(enc.logvar.data[i] / T{2});
    return z;
}

template <class T>
Tensor<T> Cvae<T>::condition_concat(const Tensor<T>& z, const Tensor<T>& t) {
    if (z.shape.size() != 2 || t.shape.size() != 2 || z.batch() != t.batch()) {
        throw std::invalid_argument("condition_concat: expected (N, l) and (N, k) with equal N");
    }
    const std::size_t n = z.batch(), l = z.shape[1], k = t.shape[1];
    Tensor<T> out(Shape{n, l + k});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(z.sample(i), l, out.sample(i));
        std::copy_n(t.sample(i), k, out.sample(i) + l);
    }
    return out;
}

template <class T>
Tensor<T> Cvae<T>::decode(const Tensor<T>& zc) const {
    if (zc.shape.size() != 2 || zc.shape[1] != arch_.decoder_input()) {
        throw std::invalid_argument("decode: expected (N, " + std::to_string(arch_.decoder_input()) + "), got " +
                                    nn::shape_string(zc.shape));
    }
    return decoder_.forward(zc);
}

template <class T>
void Cvae<T>::check_batch(const Tensor<T>& x, const Tensor<T>& t, const Tensor<T>& eps) const {
    const std::size_t n = x.batch();
    if (n == 0) throw std::invalid_argument("loss: empty batch");
    if (t.shape != Shape{n, condition_dim()}) throw std::invalid_argument("loss: condition batch has shape " + nn::shape_string(t.shape));
    if (eps.shape != Shape{n, latent_dim()}) throw std::invalid_argument("loss: noise batch has shape " + nn::shape_string(eps.shape));
}

template <class T>
LossTerms Cvae<T>::loss(const Tensor<T>& x, const Tensor<T>& t, const Tensor<T>& eps) const {
    check_batch(x, t, eps);
    const EncoderOutput<T> enc = encode(x);
    const Tensor<T> xhat = decode(condition_concat(reparameterize(enc, eps), t));
    const std::size_t n = x.batch(), p = pixels(), l = latent_dim();
    LossTerms r;
    for (std::size_t i = 0; i < n; ++i) {
        double se = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double d = static_cast<double>(xhat.sample(i)[j]) - static_cast<double>(x.sample(i)[j]);
            se += d * d;
        }
        r.mse += se / static_cast<double>(p);
        r.kl += kl_row(enc.mu.sample(i), enc.logvar.sample(i), l);
    }
    r.mse /= static_cast<double>(n);
    r.kl /= static_cast<double>(n);
    r.total = r.mse + config_.kl_weight * r.kl / static_cast<double>(p);
    return r;
}

template <class T>
LossTerms Cvae<T>::loss_and_gradients(const Tensor<T>& x, const Tensor<T>& t, const Tensor<T>& eps) {
    check_batch(x, t, eps);
    if (x.sample_shape() != arch_.input) throw std::invalid_argument("loss: field batch has shape " + nn::shape_string(x.shape));
    const std::size_t n = x.batch(), p = pixels(), l = latent_dim();
    const double lambda = config_.kl_weight;

    zero_grad();
    const Tensor<T>& h = encoder_.forward(x, enc_tape_);
    const Tensor<T>& mu = mu_head_.forward(h, mu_tape_);
    Tensor<T> lv = logvar_head_.forward(h, lv_tape_);
    const T bound = static_cast<T>(kLogvarBound);
    std::vector<bool> clamped(lv.size());
    for (std::size_t i = 0; i < lv.size(); ++i) {
        clamped[i] = lv.data[i] < -bound || lv.data[i] > bound;
        lv.data[i] = std::clamp(lv.data[i], -bound, bound);
    }
    Tensor<T> sigma(lv.shape);
    for (std::size_t i = 0; i < lv.size(); ++i) sigma.data[i] = std::exp(lv.data[i] / T{2});
    Tensor<T> z(mu.shape);
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = mu.data[i] + eps.data[i] * sigma.data[i];
    const Tensor<T>& xhat = decoder_.forward(condition_concat(z, t), dec_tape_);

    LossTerms r;
    const double scale = 1.0 / (static_cast<double>(p) * static_cast<double>(n));
    Tensor<T> dxhat(xhat.shape);
    for (std::size_t i = 0; i < n; ++i) {
        double se = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double d = static_cast<double>(xhat.sample(i)[j]) - static_cast<double>(x.sample(i)[j]);
            se += d * d;
            dxhat.sample(i)[j] = static_cast<T>(2.0 * d * scale);
        }
        r.mse += se / static_cast<double>(p);
        r.kl += kl_row(mu.sample(i), lv.sample(i), l);
    }
    r.mse /= static_cast<double>(n);
    r.kl /= static_cast<double>(n);
    r.total = r.mse + lambda * r.kl / static_cast<double>(p);

    const Tensor<T> dzc = decoder_.backward(dxhat, dec_tape_);
    Tensor<T> dmu(mu.shape), dlv(lv.shape);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < l; ++j) {
            const std::size_t q = i * l + j;
            const double dz = dzc.sample(i)[j];
            dmu.data[q] = static_cast<T>(dz + lambda * scale * mu.data[q]);
            const double g = 0.5 * dz * eps.data[q] * sigma.data[q] + lambda * scale * 0.5 * (std::exp(static_cast<double>(lv.data[q])) - 1.0);
            dlv.data[q] = clamped[q] ? T{0} : static_cast<T>(g);
        }
    }
    Tensor<T> dh = mu_head_.backward(dmu, mu_tape_);
    const Tensor<T> dh2 = logvar_head_.backward(dlv, lv_tape_);
    for (std::size_t i = 0; i < dh.size(); ++i) dh.data[i] += dh2.data[i];
    encoder_.backward(dh, enc_tape_);
    return r;
}

template <class T>
std::vector<nn::ParamRef<T>> Cvae<T>::parameters() {
    std::vector<nn::ParamRef<T>> out;
    auto append = [&](nn::Sequential<T>& s, const char* prefix) {
        for (auto& ref : s.parameters()) {
            ref.name = std::string(prefix) + "." + ref.name;
            out.push_back(ref);
        }
    };
    append(encoder_, "encoder");
    append(mu_head_, "mu_head");
    append(logvar_head_, "logvar_head");
    append(decoder_, "decoder");
    return out;
}

template <class T>
std::size_t Cvae<T>::parameter_count() const {
    return encoder_.parameter_count() + mu_head_.parameter_count() + logvar_head_.parameter_count() + decoder_.parameter_count();
}

template <class T>
void Cvae<T>::zero_grad() {
    encoder_.zero_grad();
    mu_head_.zero_grad();
    logvar_head_.zero_grad();
    decoder_.zero_grad();
}

template class Cvae<float>;
template class Cvae<double>;

}  // namespace cvs
