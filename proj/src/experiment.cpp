#include "cvs/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace cvs {

void Experiment::validate() const {
    plate.validate();
    if (load.kind == LoadModel::Kind::gaussian) {
        load.q0_pa.validate();
        load.x0_m.validate();
        load.y0_m.validate();
        if (!(load.s_m > 0.0)) throw std::invalid_argument("load shape parameter s must be positive");
    } else {
        if (load.bays == 0) throw std::invalid_argument("fill load needs at least one bay");
        if (!(load.p_nominal_pa >= 0.0)) throw std::invalid_argument("nominal pressure must be non-negative");
        load.fill_rate.validate();
        if (load.fill_rate.kind != Distribution::Kind::beta &&
            (load.fill_rate.quantile(1e-12) < 0.0 || load.fill_rate.quantile(1.0 - 1e-12) > 1.0)) {
            throw std::invalid_argument("fill-rate law must stay inside [0, 1]");
        }
    }
    thickness.distribution_mm.validate();
    if (thickness.mode == ThicknessModel::Mode::absolute && thickness.distribution_mm.kind == Distribution::Kind::normal) {
        throw std::invalid_argument("absolute thickness needs a bounded law");
    }
}

SampleRecord realize(const Experiment& exp, std::span<const double> u) {
    if (u.size() != exp.dims()) throw std::invalid_argument("realize: LHS row has the wrong dimension");
    const PlateSpec& plate = exp.plate;
    const std::size_t nl = exp.load.dims(), k = exp.condition_dim();

    SampleRecord rec;
    std::vector<double> thickness(plate.regions.size());
    for (std::size_t j = 0; j < k; ++j) {
        const double v = exp.thickness.distribution_mm.quantile(u[nl + j]);
        rec.condition.push_back(static_cast<float>(v));
    }
    // the stored float condition is the one the solve uses, so records are self-consistent
    for (std::size_t r = 0; r < thickness.size(); ++r) {
        if (exp.thickness.mode == ThicknessModel::Mode::absolute) {
            thickness[r] = rec.condition[0];
        } else {
            thickness[r] = plate.regions[r].base_thickness_mm - rec.condition[r];
        }
        if (!(thickness[r] > 0.0)) throw std::invalid_argument(fmt::format("non-positive thickness {} mm in region {}", thickness[r], r));
    }

    GridField load;
    if (exp.load.kind == LoadModel::Kind::gaussian) {
        GaussianLoad g{exp.load.q0_pa.quantile(u[0]), exp.load.x0_m.quantile(u[1]), exp.load.y0_m.quantile(u[2]), exp.load.s_m};
        rec.source_rvs = {static_cast<float>(g.q0), static_cast<float>(g.x0), static_cast<float>(g.y0)};
        load = nodal_load(plate, [&](double x, double y) { return gaussian_pressure(g, x, y); });
    } else {
        std::vector<double> p(exp.load.bays);
        for (std::size_t b = 0; b < p.size(); ++b) {
            const double rate = exp.load.fill_rate.quantile(u[b]);
            rec.source_rvs.push_back(static_cast<float>(rate));
            p[b] = fill_pressure(FillLoad{exp.load.p_nominal_pa, rate});
        }
        const double bay_width = plate.length_x / static_cast<double>(p.size());
        load = nodal_load(plate, [&](double x, double) {
            const auto b = static_cast<std::size_t>(std::max(0.0, std::floor((x + 0.5 * plate.length_x) / bay_width)));
            return p[std::min(b, p.size() - 1)];
        });
    }

    const GridField w = solve_plate(plate, thickness, load);
    const StrainTriplet strains = strain_fields(w, thickness, plate);
    for (const StrainField& s : strains) {
        const StrainField n = normalize_by_yield(s, plate.material);
        for (double v : n.field.values) rec.fields.push_back(static_cast<float>(v));
    }
    return rec;
}

Dataset generate_dataset(const Experiment& exp, std::size_t n, std::uint64_t seed, const std::function<void(std::size_t)>& progress) {
    exp.validate();
    if (n == 0) throw std::invalid_argument("generate: realization count must be positive");
    const LhsDesign design = latin_hypercube(n, exp.dims(), seed);

    Dataset data;
    data.condition_dim = static_cast<std::uint32_t>(exp.condition_dim());
    data.n_components = 3;
    data.rows = static_cast<std::uint32_t>(exp.plate.grid_ny);
    data.cols = static_cast<std::uint32_t>(exp.plate.grid_nx);
    data.records.resize(n);

    std::atomic<std::size_t> done{0};
    std::vector<std::string> failures(n);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) {
        try {
            data.records[i] = realize(exp, std::span<const double>(design.points).subspan(i * design.d, design.d));
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
        const std::size_t d = ++done;
        if (progress) {
#pragma omp critical(cvs_progress)
            progress(d);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!failures[i].empty()) throw std::runtime_error(fmt::format("realization {} failed: {}", i, failures[i]));
    }
    data.validate();
    return data;
}

Experiment plate_experiment(int grid, double t_lo_mm, double t_hi_mm) {
    Experiment e;
    e.plate = uniform_plate(1.0, 1.0, grid, grid, 0.5 * (t_lo_mm + t_hi_mm));
    e.thickness = {ThicknessModel::Mode::absolute, Distribution::uniform(t_lo_mm, t_hi_mm)};
    return e;
}

Experiment multi_region_experiment() {
    Experiment e;
    e.plate.length_x = 3.0;
    e.plate.length_y = 1.0;
    e.plate.grid_nx = 24;
    e.plate.grid_ny = 8;
    for (int s = 0; s < 4; ++s) e.plate.regions.push_back(Region{0.0, 3.0, 0.25 * s, 0.25 * (s + 1), 12.0});
    e.load.kind = LoadModel::Kind::fill;
    e.thickness = {ThicknessModel::Mode::loss, Distribution::uniform(0.0, 2.0)};
    return e;
}

}  // namespace cvs
