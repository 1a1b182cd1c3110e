#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "cvs/commands.hpp"

namespace {

struct Common {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_config_options(CLI::App* cmd, Common& c) {
    auto* cfg = cmd->add_option("--config", c.config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--preset", c.preset, "Built-in configuration instead of --config")->excludes(cfg);
}

cvs::RunConfig resolve_config(const Common& c) {
    if (!c.config_path.empty()) return cvs::load_run_config(c.config_path);
    if (!c.preset.empty()) return cvs::preset_config(c.preset);
    throw std::invalid_argument("either --config or --preset is required");
}

std::vector<cvs::StrainComponent> components_of(const std::string& name) {
    if (name == "all") return {cvs::StrainComponent::xx, cvs::StrainComponent::yy, cvs::StrainComponent::xy};
    return {cvs::parse_component(name)};
}

std::vector<double> parse_condition(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad condition value '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty condition");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional VAE surrogate for stochastic plate strain fields"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    Common gen;
    auto* generate = app.add_subcommand("generate", "Monte-Carlo plate solves into a dataset file");
    add_config_options(generate, gen);
    generate->add_option("--seed", gen.seed, "Sampling seed (default: config seed)");
    generate->add_option("--out", gen.out, "Dataset path (default: <root>/dataset.cvsd)");

    Common tr;
    std::string train_component = "xx";
    bool resume = false;
    std::string train_dataset;
    auto* train = app.add_subcommand("train", "Train one model per strain component");
    add_config_options(train, tr);
    train->add_option("--component", train_component, "xx, yy, xy or all")->check(CLI::IsMember({"xx", "yy", "xy", "all"}));
    train->add_option("--seed", tr.seed, "Training seed (default: config train.seed)");
    train->add_flag("--resume", resume, "Continue from an existing checkpoint");
    train->add_option("--dataset", train_dataset, "Dataset path (default: <root>/dataset.cvsd)");
    train->add_option("--out", tr.out, "Checkpoint path (single component only)");

    cvs::SampleRequest sreq;
    std::vector<std::string> condition_text;
    std::optional<std::uint64_t> sample_seed;
    auto* sample = app.add_subcommand("sample", "Draw strain fields from trained models");
    sample->add_option("--checkpoint", sreq.checkpoints, "One checkpoint, or three (xx, yy, xy)")->required()->check(CLI::ExistingFile);
    sample->add_option("--condition,-t", condition_text, "Comma-separated condition values in mm; repeatable")->required();
    sample->add_option("-n", sreq.n, "Fields per condition")->check(CLI::PositiveNumber);
    sample->add_option("--seed", sample_seed, "Latent sampling seed");
    sample->add_option("--out", sreq.out_path, "Output dataset path")->required();

    Common ev;
    std::string eval_component = "xx";
    std::optional<std::size_t> n_mc;
    std::string eval_checkpoint, eval_dataset;
    auto* evaluate = app.add_subcommand("evaluate", "Statistical comparison on the held-out split");
    add_config_options(evaluate, ev);
    evaluate->add_option("--component", eval_component, "xx, yy, xy or all")->check(CLI::IsMember({"xx", "yy", "xy", "all"}));
    evaluate->add_option("--n-mc", n_mc, "Latent Monte-Carlo repetitions (default: config)")->check(CLI::PositiveNumber);
    evaluate->add_option("--seed", ev.seed, "Evaluation seed (default: config seed)");
    evaluate->add_option("--checkpoint", eval_checkpoint, "Checkpoint (single component only)");
    evaluate->add_option("--dataset", eval_dataset, "Dataset path (default: <root>/dataset.cvsd)");
    evaluate->add_option("--out", ev.out, "Report directory (single component only)");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Summarize an evaluation directory");
    report->add_option("--out", report_dir, "Evaluation directory")->required()->check(CLI::ExistingDirectory);

    Common show;
    auto* config = app.add_subcommand("config", "Print the resolved configuration as JSON");
    add_config_options(config, show);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*generate) {
            const cvs::RunConfig cfg = resolve_config(gen);
            cvs::run_generate(cfg, gen.seed.value_or(cfg.seed), gen.out.empty() ? cfg.dataset_path() : gen.out);
        } else if (*train) {
            const cvs::RunConfig cfg = resolve_config(tr);
            const auto comps = components_of(train_component);
            if (comps.size() > 1 && !tr.out.empty()) throw std::invalid_argument("--out needs a single --component");
            for (cvs::StrainComponent c : comps) {
                cvs::TrainRequest req;
                req.component = c;
                req.seed = tr.seed.value_or(cfg.train.seed);
                req.resume = resume;
                req.dataset_path = train_dataset.empty() ? cfg.dataset_path() : train_dataset;
                req.checkpoint_path = tr.out.empty() ? cfg.checkpoint_path(c) : tr.out;
                req.loss_csv_path = tr.out.empty() ? cfg.loss_csv_path(c) : tr.out + ".loss.csv";
                cvs::run_train(cfg, req);
            }
        } else if (*sample) {
            for (const std::string& t : condition_text) sreq.conditions.push_back(parse_condition(t));
            sreq.seed = sample_seed.value_or(1);
            cvs::run_sample(sreq);
        } else if (*evaluate) {
            const cvs::RunConfig cfg = resolve_config(ev);
            const auto comps = components_of(eval_component);
            if (comps.size() > 1 && (!ev.out.empty() || !eval_checkpoint.empty())) {
                throw std::invalid_argument("--out and --checkpoint need a single --component");
            }
            for (cvs::StrainComponent c : comps) {
                cvs::EvaluateRequest req;
                req.component = c;
                req.dataset_path = eval_dataset.empty() ? cfg.dataset_path() : eval_dataset;
                req.checkpoint_path = eval_checkpoint.empty() ? cfg.checkpoint_path(c) : eval_checkpoint;
                req.out_dir = ev.out.empty() ? cfg.eval_dir(c) : ev.out;
                req.n_mc = n_mc.value_or(cfg.eval.n_mc);
                req.seed = ev.seed.value_or(cfg.seed);
                cvs::run_evaluate(cfg, req);
            }
        } else if (*report) {
            std::cout << cvs::summary_text(cvs::run_report(report_dir));
        } else if (*config) {
            std::cout << cvs::dump_config(resolve_config(show));
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
