#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvs {

enum class StrainComponent { xx = 0, yy = 1, xy = 2 };

std::string_view component_name(StrainComponent c);
/// Parses "xx", "yy" or "xy".
StrainComponent parse_component(std::string_view name);

struct Material {
    double youngs_modulus = 206e9;  ///< Pa
    double poisson_ratio = 0.3;
    double yield_stress = 235e6;    ///< Pa
};

/// Axis-aligned rectangle in plate coordinates, origin at the lower-left
/// corner, with its nominal thickness.
struct Region {
    double x0 = 0.0, x1 = 0.0;  ///< m
    double y0 = 0.0, y1 = 0.0;  ///< m
    double base_thickness_mm = 0.0;
};

/// Rectangular plate discretized into grid_nx x grid_ny square-ish elements.
/// Element-centered fields are stored row-major with rows along y
/// (H = grid_ny) and columns along x (W = grid_nx).
struct PlateSpec {
    double length_x = 1.0;  ///< m
    double length_y = 1.0;  ///< m
    int grid_nx = 50;
    int grid_ny = 50;
    Material material;
    std::vector<Region> regions;

    double hx() const { return length_x / grid_nx; }
    double hy() const { return length_y / grid_ny; }
    /// Throws std::invalid_argument when an invariant is violated, including
    /// regions that do not tile the plate exactly.
    void validate() const;
    /// Region index owning element (row, col), by its center.
    std::size_t region_of_element(int row, int col) const;
};

/// Uniform single-region plate.
PlateSpec uniform_plate(double length_x, double length_y, int grid_nx, int grid_ny, double thickness_mm,
                        Material material = {});

struct GaussianLoad {
    double q0 = 0.0;  ///< Pa
    double x0 = 0.0;  ///< m, relative to the plate center
    double y0 = 0.0;  ///< m, relative to the plate center
    double s = 0.2;   ///< m
};

struct FillLoad {
    double p_nominal = 0.0;  ///< Pa
    double fill_rate = 1.0;
};

/// Bell-shaped lateral pressure; x, y relative to the plate center.
double gaussian_pressure(const GaussianLoad& load, double x, double y);
double fill_pressure(const FillLoad& load);
/// D = E t^3 / (12 (1 - nu^2)), t in metres.
double flexural_rigidity(double youngs_modulus, double poisson_ratio, double thickness_m);

/// Values on a (rows x cols) lattice, row-major.
struct GridField {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    GridField() = default;
    GridField(int r, int c, double fill = 0.0) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct StrainField {
    StrainComponent component = StrainComponent::xx;
    GridField field;
};

using StrainTriplet = std::array<StrainField, 3>;

/// Evaluates a pressure function (center-relative coordinates) on the
/// (grid_ny+1) x (grid_nx+1) node lattice.
GridField nodal_load(const PlateSpec& spec, const std::function<double(double, double)>& pressure);

/// Per-element thickness in metres from per-region thicknesses in mm.
std::vector<double> element_thickness_m(const PlateSpec& spec, std::span<const double> thickness_mm);

/// Clamped Kirchhoff plate with element-wise rigidity, discretized by finite
/// differences in energy form and solved by sparse LDL^T. Assembly and
/// factorization happen at construction; the solver is then reusable for any
/// number of load cases.
class PlateSolver {
public:
    PlateSolver(const PlateSpec& spec, std::span<const double> thickness_mm);
    ~PlateSolver();
    PlateSolver(PlateSolver&&) noexcept;
    PlateSolver& operator=(PlateSolver&&) noexcept;

    /// Nodal deflection (m) for nodal pressure (Pa); boundary nodes are zero.
    GridField solve(const GridField& load) const;
    std::size_t unknowns() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

GridField solve_plate(const PlateSpec& spec, std::span<const double> thickness_mm, const GridField& load);

/// Kirchhoff surface strains at element centers from nodal deflection.
StrainTriplet strain_fields(const GridField& w, std::span<const double> thickness_mm, const PlateSpec& spec);

double yield_strain_normal(const Material& m);
/// Von Mises shear yield strain sigma_y / (sqrt(3) G).
double yield_strain_shear(const Material& m);
StrainField normalize_by_yield(const StrainField& field, const Material& m);

/// Debug dump: header "component,nx,ny", one metadata line, then one row of
/// comma-separated values per grid row.
void write_field_csv(const std::string& path, const std::string& component, const GridField& field);

}  // namespace cvs
