#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cvs/commands.hpp"
#include "cvs/rng.hpp"

using namespace cvs;
using nn::LayerSpec;
using nn::Shape;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// ---------------------------------------------------------------------------
// C1

// |a - n| / max(|a|, |n|, floor), floor = 1e-3 * largest gradient magnitude
struct GradCheck {
    double max_rel = 0.0;
    std::size_t count = 0;

    void add(const std::vector<double>& analytic, const std::vector<double>& numeric) {
        double scale = 0.0;
        for (double v : analytic) scale = std::max(scale, std::abs(v));
        const double floor = std::max(1e-3 * scale, 1e-12);
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            const double d = std::abs(analytic[i] - numeric[i]) / std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
            max_rel = std::max(max_rel, d);
        }
        count += analytic.size();
    }
};

constexpr double kFdStep = 1e-5;

void check_stack(GradCheck& gc, const std::vector<LayerSpec>& specs, const Shape& input, std::uint64_t seed) {
    nn::Sequential<double> net(specs, input);
    Rng rng(seed);
    net.init(rng);
    auto params = net.parameters();
    for (auto& p : params)
        for (double& v : p.value) v += 0.1 * rng.normal();
    Shape xs{2};
    xs.insert(xs.end(), input.begin(), input.end());
    Tensor<double> x(xs);
    for (double& v : x.data) v = rng.normal();
    Shape os{2};
    const Shape o = net.output_shape();
    os.insert(os.end(), o.begin(), o.end());
    Tensor<double> r(os);
    for (double& v : r.data) v = rng.normal();

    auto loss = [&](const Tensor<double>& in) {
        const Tensor<double> y = net.forward(in);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * r.data[i];
        return s;
    };
    nn::Tape<double> tape;
    net.zero_grad();
    net.forward(x, tape);
    const Tensor<double> dx = net.backward(r, tape);

    std::vector<double> analytic, numeric;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double keep = p.value[i];
            p.value[i] = keep + kFdStep;
            const double up = loss(x);
            p.value[i] = keep - kFdStep;
            const double down = loss(x);
            p.value[i] = keep;
            analytic.push_back(p.grad[i]);
            numeric.push_back((up - down) / (2 * kFdStep));
        }
    }
    gc.add(analytic, numeric);
    analytic.clear();
    numeric.clear();
    Tensor<double> xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp.data[i] = x.data[i] + kFdStep;
        const double up = loss(xp);
        xp.data[i] = x.data[i] - kFdStep;
        const double down = loss(xp);
        xp.data[i] = x.data[i];
        analytic.push_back(dx.data[i]);
        numeric.push_back((up - down) / (2 * kFdStep));
    }
    gc.add(analytic, numeric);
}

void check_cvae(GradCheck& gc, std::size_t k, std::uint64_t seed) {
    Cvae<double> m(CvaeConfig{tiny_params(k), 1.0});
    m.init(seed);
    Rng rng(seed + 1);
    auto params = m.parameters();
    for (auto& p : params)
        for (double& v : p.value) v += 0.05 * rng.normal();
    Tensor<double> x({3, 1, 8, 8}), t({3, k}), eps({3, 2});
    for (double& v : x.data) v = rng.uniform();
    for (double& v : t.data) v = rng.uniform();
    for (double& v : eps.data) v = rng.normal();
    m.loss_and_gradients(x, t, eps);
    std::vector<double> analytic, numeric;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double keep = p.value[i];
            p.value[i] = keep + kFdStep;
            const double up = m.loss(x, t, eps).total;
            p.value[i] = keep - kFdStep;
            const double down = m.loss(x, t, eps).total;
            p.value[i] = keep;
            analytic.push_back(p.grad[i]);
            numeric.push_back((up - down) / (2 * kFdStep));
        }
    }
    gc.add(analytic, numeric);
}

Outcome c1_gradients() {
    const auto t0 = Clock::now();
    using nn::Activation;
    GradCheck gc;
    check_stack(gc, {LayerSpec::dense(5, Activation::leaky_relu), LayerSpec::dense(3, Activation::sigmoid)}, {4}, 1);
    check_stack(gc, {LayerSpec::conv(3, 3, 3, 2, 2, 1, 1, Activation::leaky_relu)}, {2, 7, 6}, 2);
    check_stack(gc, {LayerSpec::deconv(2, 3, 3, 2, 2, 1, 1, 1, 0, Activation::sigmoid)}, {3, 4, 3}, 3);
    check_stack(gc, {LayerSpec::flatten(), LayerSpec::dense(12, Activation::identity), LayerSpec::reshape(3, 2, 2)}, {2, 3, 3}, 4);
    check_cvae(gc, 1, 5);
    check_cvae(gc, 4, 6);
    const double secs = since(t0);
    return {gc.max_rel < 1e-4 && secs < 60.0,
            fmt::format("max relative error {:.2e} over {} gradients (< 1e-4), {:.1f} s (< 60 s)", gc.max_rel, gc.count, secs)};
}

// ---------------------------------------------------------------------------
// C2

Outcome c2_kl() {
    const auto t0 = Clock::now();
    const double at_zero = kl_term(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0});
    Rng rng(2024);
    double worst = 0.0;
    constexpr std::size_t draws = 1'000'000;
    for (int pair = 0; pair < 20; ++pair) {
        const std::vector<double> mu{rng.uniform() * 3.0 - 1.5, rng.uniform() * 3.0 - 1.5};
        const std::vector<double> lv{rng.uniform() * 3.0 - 1.5, rng.uniform() * 3.0 - 1.5};
        const double closed = kl_term(mu, lv);
        // E_q[log q(z) - log p(z)] with z = mu + sigma e
        double acc = 0.0;
        for (std::size_t s = 0; s < draws; ++s) {
            double v = 0.0;
            for (std::size_t j = 0; j < 2; ++j) {
                const double e = rng.normal();
                const double z = mu[j] + std::exp(0.5 * lv[j]) * e;
                v += -0.5 * lv[j] - 0.5 * e * e + 0.5 * z * z;
            }
            acc += v;
        }
        worst = std::max(worst, std::abs(acc / draws - closed) / closed);
    }
    const double secs = since(t0);
    return {std::abs(at_zero) <= 1e-12 && worst < 0.01 && secs < 30.0,
            fmt::format("KL(0,0) = {:.1e}; worst MC relative gap {:.2e} over 20 pairs (< 1%), {:.1f} s (< 30 s)", std::abs(at_zero), worst, secs)};
}

// ---------------------------------------------------------------------------
// C3

Outcome c3_architecture() {
    const Architecture a = build_architecture(table1_params());
    const Architecture b = build_architecture(table2_params());
    auto round_trips = [](const Architecture& arch) {
        nn::Sequential<float> dec(arch.decoder, Shape{arch.decoder_input()});
        return dec.output_shape() == arch.input;
    };
    const bool ok = a.flatten_width == 1600 && a.decoder_input() == 33 && b.flatten_width == 1024 && b.decoder_input() == 6 &&
                    round_trips(a) && round_trips(b);
    return {ok, fmt::format("plate net flatten {} decoder input {} (1600, 33); multi-region net flatten {} decoder input {} (1024, 6)",
                            a.flatten_width, a.decoder_input(), b.flatten_width, b.decoder_input())};
}

// ---------------------------------------------------------------------------
// C4

Outcome c4_plate() {
    const auto t0 = Clock::now();
    const double q = 1e4, t_mm = 10.0;
    std::vector<double> errors;
    std::string detail;
    for (int grid : {25, 50, 100}) {
        const PlateSpec spec = uniform_plate(1.0, 1.0, grid, grid, t_mm);
        const GridField w = solve_plate(spec, std::vector<double>{t_mm}, nodal_load(spec, [q](double, double) { return q; }));
        const double wmax = *std::max_element(w.values.begin(), w.values.end());
        const double d = flexural_rigidity(spec.material.youngs_modulus, spec.material.poisson_ratio, t_mm * 1e-3);
        const double coeff = wmax * d / q;
        errors.push_back(std::abs(coeff - 0.00126) / 0.00126);
        detail += fmt::format("{} nodes: {:.6f} ({:.2f}%); ", grid + 1, coeff, 100 * errors.back());
    }
    const double secs = since(t0);
    const bool ok = errors[2] < 0.01 && errors[0] > errors[1] && errors[1] > errors[2] && secs < 120.0;
    return {ok, detail + fmt::format("{:.1f} s", secs)};
}

// ---------------------------------------------------------------------------
// C5

Outcome c5_sampling() {
    bool strata_ok = true;
    for (auto [n, d] : {std::pair<std::size_t, std::size_t>{10, 2}, {1000, 4}}) {
        const LhsDesign lhs = latin_hypercube(n, d, 77);
        for (std::size_t j = 0; j < d; ++j) {
            std::set<std::size_t> seen;
            for (std::size_t i = 0; i < n; ++i) seen.insert(static_cast<std::size_t>(lhs(i, j) * static_cast<double>(n)));
            strata_ok = strata_ok && seen.size() == n && *seen.rbegin() == n - 1;
        }
    }
    const BetaParams bp = beta_params_from_moments(0.95, 0.014);
    constexpr std::size_t draws = 1'000'000;
    const LhsDesign u = latin_hypercube(draws, 1, 5);
    double s = 0.0, ss = 0.0;
    for (double v : u.points) {
        const double x = transform_beta(v, bp.alpha, bp.beta);
        s += x;
        ss += x * x;
    }
    const double mean = s / draws, sd = std::sqrt(ss / draws - mean * mean);
    const double em = std::abs(mean - 0.95) / 0.95, es = std::abs(sd - 0.014) / 0.014;
    return {strata_ok && em < 1e-3 && es < 1e-3,
            fmt::format("strata exact: {}; beta mean {:.6f} ({:.3f}%), std {:.6f} ({:.3f}%) over 1e6 draws (< 0.1%)",
                        strata_ok ? "yes" : "no", mean, 100 * em, sd, 100 * es)};
}

// ---------------------------------------------------------------------------
// C6 / C7

struct DeskResult {
    bool ok = false;
    std::vector<ErrorSummary> summaries;
    std::string detail;
};

bool loss_trend_ok(const std::vector<EpochLoss>& h) {
    if (h.size() < 20) return false;
    std::vector<double> first, last;
    for (std::size_t i = 0; i < 10; ++i) {
        first.push_back(h[i].total);
        last.push_back(h[h.size() - 10 + i].total);
    }
    return median(last) < median(first);
}

DeskResult desk_run(const std::string& preset, const fs::path& dir, double max_mu, double max_sigma) {
    const auto t0 = Clock::now();
    RunConfig cfg = preset_config(preset);
    cfg.output_root = dir.string();
    DeskResult r;
    run_generate(cfg, cfg.seed, cfg.dataset_path());
    bool ok = true;
    for (StrainComponent c : {StrainComponent::xx, StrainComponent::yy, StrainComponent::xy}) {
        TrainRequest tr{c, cfg.train.seed, false, cfg.dataset_path(), cfg.checkpoint_path(c), cfg.loss_csv_path(c)};
        const Checkpoint ck = run_train(cfg, tr);
        EvaluateRequest er{c, cfg.dataset_path(), cfg.checkpoint_path(c), cfg.eval_dir(c), cfg.eval.n_mc, cfg.seed};
        const EvalReport rep = run_evaluate(cfg, er);
        const ErrorSummary s = summarize(rep.errors);
        const bool trend = loss_trend_ok(ck.history);
        const bool pass = s.median_mu <= max_mu && s.median_sigma <= max_sigma && trend;
        ok = ok && pass;
        r.summaries.push_back(s);
        r.detail += fmt::format("{}: med e_mu {:.4f} (IQR {:.4f}), med e_sigma {:.4f} (IQR {:.4f}){}; ", component_name(c), s.median_mu,
                                s.iqr_mu, s.median_sigma, s.iqr_sigma, trend ? "" : " [loss not decreasing]");
    }
    const double secs = since(t0);
    r.ok = ok && secs <= 1800.0;
    r.detail += fmt::format("{:.0f} s (<= 1800 s)", secs);
    return r;
}

// ---------------------------------------------------------------------------
// C8

Outcome c8_determinism(const fs::path& dir) {
    std::vector<std::string> failures;
    auto run_once = [&](const fs::path& root) {
        RunConfig cfg = preset_config("smoke");
        cfg.output_root = root.string();
        run_generate(cfg, cfg.seed, cfg.dataset_path());
        TrainRequest tr{StrainComponent::xy, cfg.train.seed, false, cfg.dataset_path(), cfg.checkpoint_path(StrainComponent::xy),
                        cfg.loss_csv_path(StrainComponent::xy)};
        run_train(cfg, tr);
        EvaluateRequest er{StrainComponent::xy, cfg.dataset_path(), cfg.checkpoint_path(StrainComponent::xy),
                           cfg.eval_dir(StrainComponent::xy), cfg.eval.n_mc, cfg.seed};
        run_evaluate(cfg, er);
    };
    const fs::path a = dir / "a", b = dir / "b";
    run_once(a);
    run_once(b);
    for (const char* f : {"dataset.cvsd", "loss_xy.csv", "model_xy.cvck", "eval_xy/field_stats.csv", "eval_xy/error_samples.csv",
                          "eval_xy/kde_curves.csv"}) {
        if (read_bytes(a / f) != read_bytes(b / f) || read_bytes(a / f).empty()) failures.push_back(f);
    }

    const Dataset data = load_dataset((a / "dataset.cvsd").string());
    save_dataset(data, (dir / "dataset_copy.cvsd").string());
    if (read_bytes(a / "dataset.cvsd") != read_bytes(dir / "dataset_copy.cvsd")) failures.push_back("dataset round trip");

    Checkpoint ck = load_checkpoint((a / "model_xy.cvck").string());
    save_checkpoint(ck, (dir / "model_copy.cvck").string());
    if (read_bytes(a / "model_xy.cvck") != read_bytes(dir / "model_copy.cvck")) failures.push_back("checkpoint round trip");
    Checkpoint again = load_checkpoint((dir / "model_copy.cvck").string());
    Tensor<float> zc({4, 3});
    Rng rng(8);
    for (float& v : zc.data) v = static_cast<float>(rng.normal());
    if (ck.model.cvae.decode(zc).data != again.model.cvae.decode(zc).data) failures.push_back("decode after reload");

    std::string detail = failures.empty() ? "dataset, loss history, checkpoint and evaluation CSVs identical; round trips bitwise"
                                          : "mismatch:";
    for (const auto& f : failures) detail += " " + f;
    return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// C9

Outcome c9_speedup(const fs::path& c6_dir) {
    RunConfig cfg = preset_config("desk_A");
    constexpr std::size_t n = 3000;

    auto t0 = Clock::now();
    generate_dataset(cfg.model, n, 99);
    const double solve_secs = since(t0);

    const fs::path ckpt = c6_dir / "model_xx.cvck";
    std::optional<Checkpoint> ck;
    if (fs::exists(ckpt)) {
        ck.emplace(load_checkpoint(ckpt.string()));
    } else {
        // Timing does not depend on the weights.
        const Dataset small = generate_dataset(cfg.model, 16, 1);
        ck.emplace(make_checkpoint(cfg.cvae, cfg.train, StrainComponent::xx, scaler_fit(small), SplitInfo{}));
    }
    const LhsDesign u = latin_hypercube(n, 1, 4);
    std::vector<double> conds(n);
    for (std::size_t i = 0; i < n; ++i) conds[i] = cfg.model.thickness.distribution_mm.quantile(u.points[i]);
    t0 = Clock::now();
    const std::vector<float> z = latent_draws(n, ck->model.cvae.latent_dim(), 5);
    const std::vector<double> fields = decode_physical(ck->model, conds, z, n);
    const double sample_secs = since(t0);

    const double speedup = solve_secs / sample_secs;
    return {speedup >= 100.0 && fields.size() == n * ck->model.cvae.pixels(),
            fmt::format("{} plate solves {:.2f} s, {} surrogate fields {:.2f} s: speedup {:.1f}x (>= 100x)", n, solve_secs, n,
                        sample_secs, speedup)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria C1-C9"};
    std::string workdir = "acceptance_runs";
    std::vector<std::string> only;
    app.add_option("--workdir", workdir, "Scratch directory for end-to-end runs");
    app.add_option("--only", only, "Run a subset, e.g. --only C4 C9");
    CLI11_PARSE(app, argc, argv);

    unsetenv("CVS_OUTPUT_ROOT");
    spdlog::set_level(spdlog::level::warn);
    const fs::path root(workdir);
    fs::create_directories(root);

    auto wanted = [&](const std::string& id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    int failures = 0;
    auto report = [&](const std::string& id, const std::function<Outcome()>& fn) {
        if (!wanted(id)) return;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failures;
        fmt::print("{} {} {}\n", id, o.pass ? "PASS" : "FAIL", o.detail);
        std::fflush(stdout);
    };

    report("C1", c1_gradients);
    report("C2", c2_kl);
    report("C3", c3_architecture);
    report("C4", c4_plate);
    report("C5", c5_sampling);

    DeskResult a, b;
    report("C6", [&] {
        fs::remove_all(root / "desk_A");
        a = desk_run("desk_A", root / "desk_A", 0.10, 0.40);
        return Outcome{a.ok, a.detail};
    });
    report("C7", [&] {
        fs::remove_all(root / "desk_B");
        b = desk_run("desk_B", root / "desk_B", 0.05, 0.20);
        bool tighter = !a.summaries.empty();
        for (std::size_t i = 0; i < a.summaries.size() && i < b.summaries.size(); ++i) {
            tighter = tighter && b.summaries[i].iqr_mu < a.summaries[i].iqr_mu && b.summaries[i].iqr_sigma < a.summaries[i].iqr_sigma;
        }
        return Outcome{b.ok && tighter, b.detail + (tighter ? "; IQRs below C6" : "; IQRs not below C6 (or C6 not run)")};
    });
    report("C8", [&] {
        fs::remove_all(root / "determinism");
        return c8_determinism(root / "determinism");
    });
    report("C9", [&] { return c9_speedup(root / "desk_A"); });

    return failures == 0 ? 0 : 1;
}
