#include "cvs/commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cvs/rng.hpp"

namespace cvs {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void ensure_parent(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

Dataset run_generate(const RunConfig& cfg, std::uint64_t seed, const std::string& out_path) {
    cfg.validate();
    spdlog::info("generating {} realizations ({}, {}x{} elements, {} LHS dimensions)", cfg.realizations, cfg.experiment,
                 cfg.model.plate.grid_nx, cfg.model.plate.grid_ny, cfg.model.dims());
    const auto t0 = Clock::now();
    const std::size_t step = std::max<std::size_t>(1, cfg.realizations / 10);
    Dataset data = generate_dataset(cfg.model, cfg.realizations, seed, [&](std::size_t done) {
        if (done % step == 0) spdlog::info("  {}/{} plate solves", done, cfg.realizations);
    });
    const double secs = seconds_since(t0);
    spdlog::info("generation took {:.3f} s ({:.3f} ms per realization)", secs, 1e3 * secs / static_cast<double>(cfg.realizations));

    ensure_parent(out_path);
    save_dataset(data, out_path);
    if (!(load_dataset(out_path) == data)) throw std::runtime_error("dataset reload check failed for " + out_path);
    spdlog::info("wrote {}", out_path);
    return data;
}

Checkpoint run_train(const RunConfig& cfg, const TrainRequest& req) {
    cfg.validate();
    const Dataset data = load_dataset(req.dataset_path);
    const std::uint64_t fingerprint = dataset_fingerprint(req.dataset_path);
    if (data.condition_dim != cfg.cvae.arch.condition_dim || data.rows != cfg.cvae.arch.rows || data.cols != cfg.cvae.arch.cols) {
        throw std::invalid_argument("dataset shape does not match the configured architecture");
    }
    if (data.n_components != 3) throw std::invalid_argument("training needs a dataset with all three strain components");
    const auto [train_split, test_split] = split(data, cfg.train_fraction, cfg.split_seed);
    const MinMaxScaler scaler = scaler_fit(train_split);
    const SplitInfo info{cfg.split_seed, cfg.train_fraction, fingerprint};
    spdlog::info("component {}: {} training / {} test records", component_name(req.component), train_split.size(), test_split.size());

    TrainConfig tc = cfg.train;
    tc.seed = req.seed;
    std::optional<Checkpoint> ck;
    if (req.resume && std::filesystem::exists(req.checkpoint_path)) {
        ck.emplace(load_checkpoint(req.checkpoint_path));
        if (ck->split != info) throw std::invalid_argument("checkpoint was trained on a different split or dataset");
        if (ck->model.component != req.component) throw std::invalid_argument("checkpoint holds a different strain component");
        if (!(ck->model.cvae.config() == cfg.cvae)) throw std::invalid_argument("checkpoint architecture differs from the config");
        if (ck->train.seed != tc.seed || ck->train.batch_size != tc.batch_size || ck->train.learning_rate != tc.learning_rate) {
            throw std::invalid_argument("checkpoint training settings differ from the config");
        }
        if (tc.epochs < ck->epochs_done) throw std::invalid_argument("checkpoint is already past the configured epoch count");
        ck->train.epochs = tc.epochs;
        ck->train.checkpoint_every = tc.checkpoint_every;
        spdlog::info("resuming from epoch {}", ck->epochs_done);
    } else {
        if (req.resume) spdlog::warn("no checkpoint at {}; starting from scratch", req.checkpoint_path);
        ck.emplace(make_checkpoint(cfg.cvae, tc, req.component, scaler, info));
    }
    spdlog::info("network has {} parameters", ck->model.cvae.parameter_count());

    const TrainData td = make_train_data(train_split, scaler, static_cast<std::size_t>(req.component));
    ensure_parent(req.checkpoint_path);
    const auto t0 = Clock::now();
    const std::uint32_t log_every = std::max<std::uint32_t>(1, tc.epochs / 20);
    try {
        train(*ck, td, [&](const Checkpoint& c) {
            const EpochLoss& e = c.history.back();
            if (e.epoch % log_every == 0 || e.epoch == c.train.epochs) {
                spdlog::info("epoch {:>5}  mse {:.4e}  kl {:.4e}  total {:.4e}  ({:.1f} s)", e.epoch, e.mse, e.kl, e.total, seconds_since(t0));
            }
            if (c.train.checkpoint_every > 0 && e.epoch % c.train.checkpoint_every == 0) save_checkpoint(c, req.checkpoint_path);
        });
    } catch (const TrainingDiverged& e) {
        save_checkpoint(*ck, req.checkpoint_path);
        write_loss_csv(ck->history, req.loss_csv_path);
        spdlog::error("{}; last good checkpoint written to {}", e.what(), req.checkpoint_path);
        throw;
    }
    save_checkpoint(*ck, req.checkpoint_path);
    ensure_parent(req.loss_csv_path);
    write_loss_csv(ck->history, req.loss_csv_path);
    const Checkpoint reloaded = load_checkpoint(req.checkpoint_path);
    if (reloaded.history != ck->history) throw std::runtime_error("checkpoint reload check failed for " + req.checkpoint_path);
    spdlog::info("wrote {} and {}", req.checkpoint_path, req.loss_csv_path);
    return std::move(*ck);
}

Dataset run_sample(const SampleRequest& req) {
    if (req.checkpoints.size() != 1 && req.checkpoints.size() != 3) throw std::invalid_argument("sample takes one or three checkpoints");
    if (req.conditions.empty()) throw std::invalid_argument("sample needs at least one condition");
    if (req.n == 0) throw std::invalid_argument("sample count must be positive");

    std::vector<Checkpoint> cks;
    for (const std::string& p : req.checkpoints) cks.push_back(load_checkpoint(p));
    std::sort(cks.begin(), cks.end(), [](const Checkpoint& a, const Checkpoint& b) { return a.model.component < b.model.component; });
    for (std::size_t i = 1; i < cks.size(); ++i) {
        if (cks[i].model.component == cks[i - 1].model.component) throw std::invalid_argument("checkpoints repeat a strain component");
    }
    const Architecture& arch = cks[0].model.cvae.architecture();
    for (const Checkpoint& c : cks) {
        if (c.model.cvae.architecture().input != arch.input || c.model.cvae.condition_dim() != arch.params.condition_dim) {
            throw std::invalid_argument("checkpoints disagree on field shape or condition dimension");
        }
    }
    const std::size_t k = arch.params.condition_dim, p = nn::shape_size(arch.input);
    for (const auto& t : req.conditions) {
        if (t.size() != k) throw std::invalid_argument(fmt::format("condition has {} entries, the model expects {}", t.size(), k));
    }

    Dataset out;
    out.condition_dim = static_cast<std::uint32_t>(k);
    out.n_components = static_cast<std::uint32_t>(cks.size());
    out.rows = static_cast<std::uint32_t>(arch.input[1]);
    out.cols = static_cast<std::uint32_t>(arch.input[2]);
    const auto t0 = Clock::now();
    for (std::size_t ci = 0; ci < req.conditions.size(); ++ci) {
        const auto& t = req.conditions[ci];
        std::vector<std::vector<double>> per_component;
        for (std::size_t m = 0; m < cks.size(); ++m) {
            per_component.push_back(sample_conditional(cks[m].model, t, req.n, derive_seed(req.seed, {ci, m})));
        }
        for (std::size_t i = 0; i < req.n; ++i) {
            SampleRecord r;
            r.condition.assign(t.begin(), t.end());
            for (const auto& fields : per_component) {
                for (std::size_t j = 0; j < p; ++j) r.fields.push_back(static_cast<float>(fields[i * p + j]));
            }
            out.records.push_back(std::move(r));
        }
    }
    const double secs = seconds_since(t0);
    spdlog::info("sampled {} fields x {} component(s) in {:.3f} s ({:.4f} ms per field)", out.size(), cks.size(), secs,
                 1e3 * secs / static_cast<double>(out.size()));
    ensure_parent(req.out_path);
    save_dataset(out, req.out_path);
    if (!(load_dataset(req.out_path) == out)) throw std::runtime_error("sample reload check failed for " + req.out_path);
    spdlog::info("wrote {}", req.out_path);
    return out;
}

EvalReport run_evaluate(const RunConfig& cfg, const EvaluateRequest& req) {
    const Checkpoint ck = load_checkpoint(req.checkpoint_path);
    const Dataset data = load_dataset(req.dataset_path);
    const std::uint64_t fingerprint = dataset_fingerprint(req.dataset_path);
    if (ck.split.dataset_fingerprint != fingerprint) {
        throw std::invalid_argument("dataset differs from the one the checkpoint was trained on; refusing to re-split");
    }
    if (ck.split.seed != cfg.split_seed || ck.split.train_fraction != cfg.train_fraction) {
        throw std::invalid_argument(fmt::format("split seed/fraction mismatch: checkpoint has ({}, {}), config has ({}, {}); refusing to re-split",
                                                ck.split.seed, ck.split.train_fraction, cfg.split_seed, cfg.train_fraction));
    }
    if (ck.model.component != req.component) throw std::invalid_argument("checkpoint holds a different strain component");
    const Dataset test = split(data, ck.split.train_fraction, ck.split.seed).second;

    EvalOptions opt;
    opt.n_mc = req.n_mc;
    opt.seed = req.seed;
    opt.probes = cfg.eval.probes;
    opt.length_x = cfg.model.plate.length_x;
    opt.length_y = cfg.model.plate.length_y;
    opt.kde.bandwidth = cfg.eval.kde_bandwidth;
    spdlog::info("evaluating component {} on {} test records, n_mc = {}", component_name(req.component), test.size(), req.n_mc);
    EvalReport report = evaluate(ck.model, test, opt);
    report.metadata["checkpoint"] = req.checkpoint_path;
    report.metadata["dataset"] = req.dataset_path;
    write_report(report, req.out_dir);
    if (read_error_samples((std::filesystem::path(req.out_dir) / "error_samples.csv").string()).size() != req.n_mc) {
        throw std::runtime_error("report reload check failed in " + req.out_dir);
    }
    const ErrorSummary s = summarize(report.errors);
    spdlog::info("median e_mu {:.4f} (IQR {:.4f}), median e_sigma {:.4f} (IQR {:.4f})", s.median_mu, s.iqr_mu, s.median_sigma, s.iqr_sigma);
    return report;
}

ErrorSummary run_report(const std::string& dir) {
    return summarize(read_error_samples((std::filesystem::path(dir) / "error_samples.csv").string()));
}

}  // namespace cvs
