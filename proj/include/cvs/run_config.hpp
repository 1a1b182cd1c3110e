#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvs/cvae.hpp"
#include "cvs/evaluator.hpp"
#include "cvs/experiment.hpp"
#include "cvs/trainer.hpp"

namespace cvs {

struct EvalSettings {
    std::size_t n_mc = 1000;
    std::vector<ProbeLocation> probes;
    double kde_bandwidth = 0.0;  ///< 0 selects Silverman's rule
};

/// One declarative run. Artifacts live under output_root (overridable via the
/// CVS_OUTPUT_ROOT environment variable).
struct RunConfig {
    std::string experiment = "plate_A";  ///< plate_A, multi_region_B or custom
    std::uint64_t seed = 1;
    std::string output_root = "runs/default";
    Experiment model;
    std::size_t realizations = 3000;
    double train_fraction = 0.65;
    std::uint64_t split_seed = 1;
    CvaeConfig cvae;
    TrainConfig train;
    EvalSettings eval;

    void validate() const;

    std::string root() const;
    std::string dataset_path() const;
    std::string checkpoint_path(StrainComponent c) const;
    std::string loss_csv_path(StrainComponent c) const;
    std::string eval_dir(StrainComponent c) const;
    std::string samples_path() const;
};

/// plate_A, plate_A_t8_10, multi_region_B, desk_A, desk_B, smoke.
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

std::string dump_config(const RunConfig& cfg);
/// JSON text. A top-level "preset" key selects the base configuration that the
/// remaining keys patch; an architecture object with its own "preset" key
/// replaces the base architecture.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace cvs
