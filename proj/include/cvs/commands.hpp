#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvs/run_config.hpp"

namespace cvs {

/// Generates, saves and reloads the dataset; returns it.
Dataset run_generate(const RunConfig& cfg, std::uint64_t seed, const std::string& out_path);

struct TrainRequest {
    StrainComponent component = StrainComponent::xx;
    std::uint64_t seed = 1;
    bool resume = false;
    std::string dataset_path, checkpoint_path, loss_csv_path;
};

/// Split, scale, train (or resume) and persist one component's model.
Checkpoint run_train(const RunConfig& cfg, const TrainRequest& req);

struct SampleRequest {
    std::vector<std::string> checkpoints;      ///< one or three, any component order
    std::vector<std::vector<double>> conditions;  ///< physical units
    std::size_t n = 1;
    std::uint64_t seed = 1;
    std::string out_path;
};

/// n fields per condition, stored as a dataset with one component per
/// checkpoint (ordered xx, yy, xy) and no source variables.
Dataset run_sample(const SampleRequest& req);

struct EvaluateRequest {
    StrainComponent component = StrainComponent::xx;
    std::string dataset_path, checkpoint_path, out_dir;
    std::size_t n_mc = 1000;
    std::uint64_t seed = 1;
};

/// Rebuilds the recorded test split (refusing a different split seed or
/// dataset), evaluates and writes the report directory.
EvalReport run_evaluate(const RunConfig& cfg, const EvaluateRequest& req);

/// Summary of an existing report directory.
ErrorSummary run_report(const std::string& dir);

}  // namespace cvs
