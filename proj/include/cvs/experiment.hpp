#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cvs/dataset.hpp"
#include "cvs/field_gen.hpp"
#include "cvs/sampling.hpp"

namespace cvs {

/// Stochastic lateral load. A gaussian load draws (q0, x0, y0) with a fixed
/// shape parameter; a fill load draws one fill rate per bay, the bays being
/// equal slices of the plate along x.
struct LoadModel {
    enum class Kind { gaussian, fill };

    Kind kind = Kind::gaussian;
    Distribution q0_pa = Distribution::normal(25e3, 2.5e3);
    Distribution x0_m = Distribution::normal(0.0, 0.15);
    Distribution y0_m = Distribution::normal(0.0, 0.15);
    double s_m = 0.2;
    double p_nominal_pa = 30e3;
    std::size_t bays = 6;
    Distribution fill_rate = Distribution::beta_from_moments(0.95, 0.014);

    std::size_t dims() const { return kind == Kind::gaussian ? 3 : bays; }
};

/// Conditioning variables. In `absolute` mode one thickness applies to every
/// region (k = 1); in `loss` mode each region loses its own amount from its
/// base thickness and the losses are the condition (k = regions).
struct ThicknessModel {
    enum class Mode { absolute, loss };

    Mode mode = Mode::absolute;
    Distribution distribution_mm = Distribution::uniform(7.0, 10.0);
};

struct Experiment {
    PlateSpec plate;
    LoadModel load;
    ThicknessModel thickness;

    std::size_t condition_dim() const { return thickness.mode == ThicknessModel::Mode::absolute ? 1 : plate.regions.size(); }
    /// LHS dimensions: load variables first, then conditions.
    std::size_t dims() const { return load.dims() + condition_dim(); }
    void validate() const;
};

/// Maps one LHS row to physical source variables and conditions, then solves
/// the plate and returns the yield-normalized strain record.
SampleRecord realize(const Experiment& exp, std::span<const double> u);

/// Joint LHS over all source and condition dimensions, one plate solve per
/// realization (OpenMP over realizations; the result does not depend on the
/// thread count). `progress` receives the number of finished solves.
Dataset generate_dataset(const Experiment& exp, std::size_t n, std::uint64_t seed,
                         const std::function<void(std::size_t)>& progress = {});

/// Unit-square 1 m plate, 50x50, t ~ U[lo, hi] mm under the gaussian load.
Experiment plate_experiment(int grid, double t_lo_mm, double t_hi_mm);
/// 3 m x 1 m, 24x8, four longitudinal 12 mm strips losing U[0, 2] mm each,
/// six fill-rate bays.
Experiment multi_region_experiment();

}  // namespace cvs
