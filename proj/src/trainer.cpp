#include "cvs/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>

#include <fmt/format.h>
#include <fmt/os.h>

#include "cvs/binary_io.hpp"
#include "cvs/rng.hpp"

namespace cvs {

using nn::Shape;
using nn::Tensor;

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be positive");
}

Checkpoint make_checkpoint(const CvaeConfig& cvae, const TrainConfig& train, StrainComponent component,
                           const MinMaxScaler& scaler, const SplitInfo& split) {
    train.validate();
    Checkpoint ck{train, SurrogateModel{component, scaler, Cvae<float>(cvae)}, {}, 0, split, {}};
    ck.model.cvae.init(train.seed);
    ck.adam = nn::AdamState<float>(nn::AdamHyper{train.learning_rate}, ck.model.cvae.parameters());
    return ck;
}

TrainData make_train_data(const Dataset& data, const MinMaxScaler& scaler, std::size_t component) {
    if (data.records.empty()) throw std::invalid_argument("training split is empty");
    if (component >= data.n_components) throw std::invalid_argument("component index out of range for this dataset");
    const std::size_t n = data.size(), p = data.pixels(), k = data.condition_dim;
    TrainData d{Tensor<float>(Shape{n, 1, data.rows, data.cols}), Tensor<float>(Shape{n, k})};
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = data.field(i, component);
        for (std::size_t j = 0; j < p; ++j) d.x.sample(i)[j] = static_cast<float>(scaler.scale_component(component, f[j]));
        for (std::size_t j = 0; j < k; ++j) d.t.sample(i)[j] = static_cast<float>(scaler.scale_condition(j, data.records[i].condition[j]));
    }
    return d;
}

void train(Checkpoint& ck, const TrainData& data, const std::function<void(const Checkpoint&)>& on_epoch) {
    ck.train.validate();
    Cvae<float>& model = ck.model.cvae;
    const std::size_t n = data.x.batch(), l = model.latent_dim(), k = model.condition_dim();
    if (n == 0) throw std::invalid_argument("training split is empty");
    if (data.x.sample_shape() != model.architecture().input || data.t.shape != Shape{n, k}) {
        throw std::invalid_argument("training data " + nn::shape_string(data.x.shape) + " does not match the network input " +
                                    nn::shape_string(model.architecture().input));
    }
    const std::size_t bs = ck.train.batch_size, p = model.pixels();
    const double lambda = model.config().kl_weight;
    const std::size_t sample_x = data.x.sample_size();

    while (ck.epochs_done < ck.train.epochs) {
        const std::uint32_t epoch = ck.epochs_done + 1;
        std::optional<Checkpoint> last_good(ck);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(ck.train.seed, {1, epoch}));
        shuffle_rng.shuffle(order.begin(), order.end());

        double mse = 0.0, kl = 0.0;
        auto params = model.parameters();
        for (std::size_t lo = 0, b = 0; lo < n; lo += bs, ++b) {
            const std::size_t m = std::min(bs, n - lo);
            Tensor<float> x(Shape{m, 1, data.x.shape[2], data.x.shape[3]}), t(Shape{m, k}), eps(Shape{m, l});
            for (std::size_t i = 0; i < m; ++i) {
                std::copy_n(data.x.sample(order[lo + i]), sample_x, x.sample(i));
                std::copy_n(data.t.sample(order[lo + i]), k, t.sample(i));
            }
            Rng noise(derive_seed(ck.train.seed, {2, epoch, b}));
            for (float& e : eps.data) e = static_cast<float>(noise.normal());

            const LossTerms terms = model.loss_and_gradients(x, t, eps);
            if (!std::isfinite(terms.total)) {
                const std::string msg = fmt::format("non-finite loss at epoch {} batch {} (mse {}, kl {}); rolled back to epoch {}",
                                                    epoch, b, terms.mse, terms.kl, ck.epochs_done);
                ck = std::move(*last_good);
                throw TrainingDiverged(msg);
            }
            nn::adam_step(params, ck.adam);
            mse += terms.mse * static_cast<double>(m);
            kl += terms.kl * static_cast<double>(m);
        }
        EpochLoss row{epoch, mse / static_cast<double>(n), lambda * kl / (static_cast<double>(n) * static_cast<double>(p)), 0.0};
        row.total = row.mse + row.kl;
        ck.history.push_back(row);
        ck.epochs_done = epoch;
        if (on_epoch) on_epoch(ck);
    }
}

namespace {

void write_architecture(std::ostream& out, const ArchitectureParams& a) {
    io::write_string(out, a.name);
    io::write_u32(out, static_cast<std::uint32_t>(a.in_channels));
    io::write_u32(out, static_cast<std::uint32_t>(a.rows));
    io::write_u32(out, static_cast<std::uint32_t>(a.cols));
    io::write_u32(out, static_cast<std::uint32_t>(a.conv.size()));
    for (const ConvStage& s : a.conv) {
        for (std::size_t v : {s.channels, s.kernel_h, s.kernel_w, s.stride_h, s.stride_w, s.pad_h, s.pad_w}) {
            io::write_u32(out, static_cast<std::uint32_t>(v));
        }
    }
    io::write_u32(out, static_cast<std::uint32_t>(a.dense.size()));
    for (std::size_t w : a.dense) io::write_u32(out, static_cast<std::uint32_t>(w));
    io::write_u32(out, static_cast<std::uint32_t>(a.latent_dim));
    io::write_u32(out, static_cast<std::uint32_t>(a.condition_dim));
    io::write_f64(out, a.leaky_slope);
}

ArchitectureParams read_architecture(std::istream& in) {
    ArchitectureParams a;
    a.name = io::read_string(in, "architecture name");
    a.in_channels = io::read_u32(in, "input channels");
    a.rows = io::read_u32(in, "rows");
    a.cols = io::read_u32(in, "cols");
    const std::uint32_t stages = io::read_u32(in, "conv stage count");
    if (stages > 64) throw io::FormatError("shape mismatch: implausible conv stage count");
    a.conv.resize(stages);
    for (ConvStage& s : a.conv) {
        for (std::size_t* v : {&s.channels, &s.kernel_h, &s.kernel_w, &s.stride_h, &s.stride_w, &s.pad_h, &s.pad_w}) {
            *v = io::read_u32(in, "conv stage");
        }
    }
    const std::uint32_t dense = io::read_u32(in, "dense count");
    if (dense > 64) throw io::FormatError("shape mismatch: implausible dense layer count");
    a.dense.resize(dense);
    for (std::size_t& w : a.dense) w = io::read_u32(in, "dense width");
    a.latent_dim = io::read_u32(in, "latent dimension");
    a.condition_dim = io::read_u32(in, "condition dimension");
    a.leaky_slope = io::read_f64(in, "leaky slope");
    return a;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    io::write_u32(out, static_cast<std::uint32_t>(v.size()));
    for (double x : v) io::write_f64(out, x);
}

std::vector<double> read_doubles(std::istream& in, const char* what) {
    const std::uint32_t n = io::read_u32(in, what);
    if (n > (1u << 20)) throw io::FormatError(std::string("implausible length for ") + what);
    std::vector<double> v(n);
    for (double& x : v) x = io::read_f64(in, what);
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write("CVCK", 4);
    io::write_u32(out, kCheckpointVersion);

    const CvaeConfig& cfg = ck.model.cvae.config();
    write_architecture(out, cfg.arch);
    io::write_f64(out, cfg.kl_weight);
    io::write_u32(out, ck.train.epochs);
    io::write_u32(out, ck.train.batch_size);
    io::write_f64(out, ck.train.learning_rate);
    io::write_u64(out, ck.train.seed);
    io::write_u32(out, ck.train.checkpoint_every);
    io::write_u32(out, static_cast<std::uint32_t>(ck.model.component));

    write_doubles(out, ck.model.scaler.component_min);
    write_doubles(out, ck.model.scaler.component_max);
    write_doubles(out, ck.model.scaler.condition_min);
    write_doubles(out, ck.model.scaler.condition_max);

    auto params = const_cast<Cvae<float>&>(ck.model.cvae).parameters();
    io::write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        io::write_string(out, p.name);
        io::write_u64(out, p.value.size());
        io::write_f32s(out, p.value.data(), p.value.size());
    }

    const nn::AdamHyper& h = ck.adam.hyper;
    io::write_f64(out, h.learning_rate);
    io::write_f64(out, h.beta1);
    io::write_f64(out, h.beta2);
    io::write_f64(out, h.epsilon);
    io::write_u64(out, ck.adam.step);
    io::write_u32(out, static_cast<std::uint32_t>(ck.adam.first.size()));
    for (std::size_t i = 0; i < ck.adam.first.size(); ++i) {
        io::write_u64(out, ck.adam.first[i].size());
        io::write_f32s(out, ck.adam.first[i].data(), ck.adam.first[i].size());
        io::write_f32s(out, ck.adam.second[i].data(), ck.adam.second[i].size());
    }

    io::write_u64(out, ck.train.seed);
    io::write_u32(out, ck.epochs_done);

    io::write_u64(out, ck.split.seed);
    io::write_f64(out, ck.split.train_fraction);
    io::write_u64(out, ck.split.dataset_fingerprint);

    io::write_u32(out, static_cast<std::uint32_t>(ck.history.size()));
    for (const EpochLoss& e : ck.history) {
        io::write_u32(out, e.epoch);
        io::write_f64(out, e.mse);
        io::write_f64(out, e.kl);
        io::write_f64(out, e.total);
    }
    out.flush();
    if (!out) throw std::runtime_error("failed while writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    io::expect_magic(in, "CVCK");
    const std::uint32_t version = io::read_u32(in, "version");
    if (version != kCheckpointVersion) {
        throw io::FormatError(fmt::format("unsupported version {} in checkpoint {} (reader supports {})", version, path, kCheckpointVersion));
    }

    CvaeConfig cfg;
    cfg.arch = read_architecture(in);
    cfg.kl_weight = io::read_f64(in, "kl weight");
    TrainConfig tc;
    tc.epochs = io::read_u32(in, "epochs");
    tc.batch_size = io::read_u32(in, "batch size");
    tc.learning_rate = io::read_f64(in, "learning rate");
    tc.seed = io::read_u64(in, "seed");
    tc.checkpoint_every = io::read_u32(in, "checkpoint cadence");
    const std::uint32_t component = io::read_u32(in, "component");
    if (component > 2) throw io::FormatError("unknown strain component in checkpoint");

    MinMaxScaler scaler;
    scaler.component_min = read_doubles(in, "scaler");
    scaler.component_max = read_doubles(in, "scaler");
    scaler.condition_min = read_doubles(in, "scaler");
    scaler.condition_max = read_doubles(in, "scaler");
    if (scaler.component_min.size() != scaler.component_max.size() || scaler.condition_min.size() != scaler.condition_max.size() ||
        scaler.condition_min.size() != cfg.arch.condition_dim || component >= scaler.component_min.size()) {
        throw io::FormatError("shape mismatch: scaler does not match the network");
    }

    std::optional<Cvae<float>> cvae;
    try {
        cvae.emplace(cfg);
    } catch (const std::invalid_argument& e) {
        throw io::FormatError(std::string("shape mismatch: stored architecture is invalid: ") + e.what());
    }
    Checkpoint ck{tc, SurrogateModel{static_cast<StrainComponent>(component), scaler, std::move(*cvae)}, {}, 0, {}, {}};

    auto params = ck.model.cvae.parameters();
    if (io::read_u32(in, "parameter count") != params.size()) throw io::FormatError("shape mismatch: parameter tensor count");
    for (auto& p : params) {
        const std::string name = io::read_string(in, "parameter name");
        if (name != p.name || io::read_u64(in, "parameter size") != p.value.size()) {
            throw io::FormatError("shape mismatch: parameter " + p.name);
        }
        io::read_f32s(in, p.value.data(), p.value.size(), "parameters");
    }

    nn::AdamHyper h;
    h.learning_rate = io::read_f64(in, "adam");
    h.beta1 = io::read_f64(in, "adam");
    h.beta2 = io::read_f64(in, "adam");
    h.epsilon = io::read_f64(in, "adam");
    ck.adam = nn::AdamState<float>(h, params);
    ck.adam.step = io::read_u64(in, "adam step");
    if (io::read_u32(in, "moment count") != params.size()) throw io::FormatError("shape mismatch: Adam moments");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (io::read_u64(in, "moment size") != params[i].value.size()) throw io::FormatError("shape mismatch: Adam moments for " + params[i].name);
        io::read_f32s(in, ck.adam.first[i].data(), ck.adam.first[i].size(), "first moments");
        io::read_f32s(in, ck.adam.second[i].data(), ck.adam.second[i].size(), "second moments");
    }

    if (io::read_u64(in, "rng seed") != tc.seed) throw io::FormatError("random state does not match the training seed");
    ck.epochs_done = io::read_u32(in, "epochs done");

    ck.split.seed = io::read_u64(in, "split seed");
    ck.split.train_fraction = io::read_f64(in, "split fraction");
    ck.split.dataset_fingerprint = io::read_u64(in, "dataset fingerprint");

    const std::uint32_t rows = io::read_u32(in, "history length");
    if (rows != ck.epochs_done) throw io::FormatError("loss history length differs from the completed epochs");
    ck.history.resize(rows);
    for (EpochLoss& e : ck.history) {
        e.epoch = io::read_u32(in, "history");
        e.mse = io::read_f64(in, "history");
        e.kl = io::read_f64(in, "history");
        e.total = io::read_f64(in, "history");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw io::FormatError("trailing bytes after checkpoint payload");
    return ck;
}

void write_loss_csv(const std::vector<EpochLoss>& history, const std::string& path) {
    auto out = fmt::output_file(path);
    out.print("epoch,mse_term,kl_term,total\n");
    for (const EpochLoss& e : history) out.print("{},{:.10e},{:.10e},{:.10e}\n", e.epoch, e.mse, e.kl, e.total);
}

}  // namespace cvs
