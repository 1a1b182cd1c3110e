#include "cvs/field_gen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace cvs {

std::string_view component_name(StrainComponent c) {
    switch (c) {
    case StrainComponent::xx: return "xx";
    case StrainComponent::yy: return "yy";
    case StrainComponent::xy: return "xy";
    }
    return "?";
}

StrainComponent parse_component(std::string_view name) {
    if (name == "xx") return StrainComponent::xx;
    if (name == "yy") return StrainComponent::yy;
    if (name == "xy") return StrainComponent::xy;
    throw std::invalid_argument("unknown strain component '" + std::string(name) + "' (expected xx, yy or xy)");
}

namespace {

double overlap_1d(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

}  // namespace

void PlateSpec::validate() const {
    if (!(length_x > 0.0 && length_y > 0.0)) throw std::invalid_argument("plate lengths must be positive");
    if (grid_nx < 4 || grid_ny < 4) throw std::invalid_argument("plate grid needs at least 4 elements per side");
    if (!(material.youngs_modulus > 0.0)) throw std::invalid_argument("Young's modulus must be positive");
    if (!(material.poisson_ratio > 0.0 && material.poisson_ratio < 0.5)) {
        throw std::invalid_argument("Poisson ratio must lie in (0, 0.5)");
    }
    if (!(material.yield_stress > 0.0)) throw std::invalid_argument("yield stress must be positive");
    if (regions.empty()) throw std::invalid_argument("plate needs at least one region");

    const double tol = 1e-9 * length_x * length_y;
    double area = 0.0;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const Region& r = regions[i];
        if (!(r.base_thickness_mm > 0.0)) throw std::invalid_argument("region thickness must be positive");
        if (!(r.x0 < r.x1 && r.y0 < r.y1)) throw std::invalid_argument("region extents must be non-empty");
        const double eps = 1e-12 * std::max(length_x, length_y);
        if (r.x0 < -eps || r.y0 < -eps || r.x1 > length_x + eps || r.y1 > length_y + eps) {
            throw std::invalid_argument("region extends outside the plate");
        }
        area += (r.x1 - r.x0) * (r.y1 - r.y0);
        for (std::size_t j = i + 1; j < regions.size(); ++j) {
            const Region& o = regions[j];
            if (overlap_1d(r.x0, r.x1, o.x0, o.x1) * overlap_1d(r.y0, r.y1, o.y0, o.y1) > tol) {
                throw std::invalid_argument("plate regions overlap");
            }
        }
    }
    if (std::abs(area - length_x * length_y) > tol) throw std::invalid_argument("plate regions do not tile the plate");
}

std::size_t PlateSpec::region_of_element(int row, int col) const {
    const double xc = (col + 0.5) * hx();
    const double yc = (row + 0.5) * hy();
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const Region& r = regions[i];
        if (xc >= r.x0 && xc < r.x1 && yc >= r.y0 && yc < r.y1) return i;
    }
    throw std::invalid_argument("element center not covered by any plate region");
}

PlateSpec uniform_plate(double length_x, double length_y, int grid_nx, int grid_ny, double thickness_mm,
                        Material material) {
    PlateSpec spec;
    spec.length_x = length_x;
    spec.length_y = length_y;
    spec.grid_nx = grid_nx;
    spec.grid_ny = grid_ny;
    spec.material = material;
    spec.regions = {Region{0.0, length_x, 0.0, length_y, thickness_mm}};
    return spec;
}

double gaussian_pressure(const GaussianLoad& load, double x, double y) {
    require_finite(load.q0, "load amplitude");
    require_finite(load.x0, "load x0");
    require_finite(load.y0, "load y0");
    require_finite(x, "x");
    require_finite(y, "y");
    if (!(load.s > 0.0) || !std::isfinite(load.s)) throw std::invalid_argument("load shape parameter must be positive");
    const double u = (x - load.x0) / load.s;
    const double v = (y - load.y0) / load.s;
    return load.q0 * std::exp(-0.5 * u * u) * std::exp(-0.5 * v * v);
}

double fill_pressure(const FillLoad& load) {
    if (!(load.fill_rate >= 0.0 && load.fill_rate <= 1.0)) throw std::invalid_argument("fill rate must lie in [0, 1]");
    require_finite(load.p_nominal, "nominal pressure");
    return load.p_nominal * load.fill_rate;
}

double flexural_rigidity(double youngs_modulus, double poisson_ratio, double thickness_m) {
    if (!(youngs_modulus > 0.0)) throw std::invalid_argument("flexural_rigidity: E must be positive");
    if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5)) throw std::invalid_argument("flexural_rigidity: nu must lie in (0, 0.5)");
    if (!(thickness_m > 0.0)) throw std::invalid_argument("flexural_rigidity: thickness must be positive");
    return youngs_modulus * thickness_m * thickness_m * thickness_m / (12.0 * (1.0 - poisson_ratio * poisson_ratio));
}

GridField nodal_load(const PlateSpec& spec, const std::function<double(double, double)>& pressure) {
    GridField q(spec.grid_ny + 1, spec.grid_nx + 1);
    for (int r = 0; r <= spec.grid_ny; ++r) {
        const double y = r * spec.hy() - 0.5 * spec.length_y;
        for (int c = 0; c <= spec.grid_nx; ++c) {
            const double x = c * spec.hx() - 0.5 * spec.length_x;
            q.at(r, c) = pressure(x, y);
        }
    }
    return q;
}

std::vector<double> element_thickness_m(const PlateSpec& spec, std::span<const double> thickness_mm) {
    if (thickness_mm.size() != spec.regions.size()) {
        throw std::invalid_argument("thickness map size does not match the number of plate regions");
    }
    for (double t : thickness_mm) {
        if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("thickness must be positive");
    }
    std::vector<double> t(static_cast<std::size_t>(spec.grid_nx) * spec.grid_ny);
    for (int r = 0; r < spec.grid_ny; ++r) {
        for (int c = 0; c < spec.grid_nx; ++c) {
            t[static_cast<std::size_t>(r) * spec.grid_nx + c] = 1e-3 * thickness_mm[spec.region_of_element(r, c)];
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Plate solver

struct PlateSolver::Impl {
    int nx = 0, ny = 0;
    std::vector<int> unknown_of_node;  // -1 on the boundary
    std::size_t n_unknowns = 0;
    double area = 0.0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor;

    int node(int r, int c) const { return r * (nx + 1) + c; }
};

PlateSolver::PlateSolver(const PlateSpec& spec, std::span<const double> thickness_mm) : impl_(std::make_unique<Impl>()) {
    spec.validate();
    const std::vector<double> t_elem = element_thickness_m(spec, thickness_mm);
    const Material& mat = spec.material;
    const double nu = mat.poisson_ratio;
    Impl& m = *impl_;
    m.nx = spec.grid_nx;
    m.ny = spec.grid_ny;
    const int nx = m.nx, ny = m.ny;
    const double hx = spec.hx(), hy = spec.hy();
    m.area = hx * hy;

    m.unknown_of_node.assign(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
    int next = 0;
    for (int r = 1; r < ny; ++r)
        for (int c = 1; c < nx; ++c) m.unknown_of_node[m.node(r, c)] = next++;
    m.n_unknowns = static_cast<std::size_t>(next);

    std::vector<double> d_elem(t_elem.size());
    for (std::size_t e = 0; e < t_elem.size(); ++e) d_elem[e] = flexural_rigidity(mat.youngs_modulus, nu, t_elem[e]);

    using Triplet = Eigen::Triplet<double>;
    const std::size_t n_nodes = static_cast<std::size_t>(nx + 1) * (ny + 1);
    const std::size_t n_cells = static_cast<std::size_t>(nx) * ny;
    std::vector<Triplet> txx, tyy, txy;
    txx.reserve(3 * n_nodes);
    tyy.reserve(3 * n_nodes);
    txy.reserve(4 * n_cells);

    auto add = [&](std::vector<Triplet>& list, int row, int r, int c, double coeff) {
        const int u = m.unknown_of_node[m.node(r, c)];
        if (u >= 0) list.emplace_back(row, u, coeff);
    };

    // Nodal curvature rows; clamped edges use the mirror ghost w(-1) = w(1).
    std::vector<double> node_weight(n_nodes), node_rigidity(n_nodes);
    for (int r = 0; r <= ny; ++r) {
        for (int c = 0; c <= nx; ++c) {
            const int row = m.node(r, c);
            const double ix2 = 1.0 / (hx * hx), iy2 = 1.0 / (hy * hy);
            const int cl = c == 0 ? 1 : c - 1;
            const int cr = c == nx ? nx - 1 : c + 1;
            add(txx, row, r, cl, ix2);
            add(txx, row, r, c, -2.0 * ix2);
            add(txx, row, r, cr, ix2);
            const int rd = r == 0 ? 1 : r - 1;
            const int ru = r == ny ? ny - 1 : r + 1;
            add(tyy, row, rd, c, iy2);
            add(tyy, row, r, c, -2.0 * iy2);
            add(tyy, row, ru, c, iy2);

            const double wx = (c == 0 || c == nx) ? 0.5 : 1.0;
            const double wy = (r == 0 || r == ny) ? 0.5 : 1.0;
            node_weight[row] = wx * wy;

            double dsum = 0.0;
            int count = 0;
            for (int er = r - 1; er <= r; ++er) {
                for (int ec = c - 1; ec <= c; ++ec) {
                    if (er < 0 || ec < 0 || er >= ny || ec >= nx) continue;
                    dsum += d_elem[static_cast<std::size_t>(er) * nx + ec];
                    ++count;
                }
            }
            node_rigidity[row] = dsum / count;
        }
    }
    for (int r = 0; r < ny; ++r) {
        for (int c = 0; c < nx; ++c) {
            const int row = r * nx + c;
            const double s = 1.0 / (hx * hy);
            add(txy, row, r + 1, c + 1, s);
            add(txy, row, r + 1, c, -s);
            add(txy, row, r, c + 1, -s);
            add(txy, row, r, c, s);
        }
    }

    const auto n = static_cast<Eigen::Index>(m.n_unknowns);
    Eigen::SparseMatrix<double> cxx(static_cast<Eigen::Index>(n_nodes), n), cyy(static_cast<Eigen::Index>(n_nodes), n),
        cxy(static_cast<Eigen::Index>(n_cells), n);
    cxx.setFromTriplets(txx.begin(), txx.end());
    cyy.setFromTriplets(tyy.begin(), tyy.end());
    cxy.setFromTriplets(txy.begin(), txy.end());

    Eigen::VectorXd wn(static_cast<Eigen::Index>(n_nodes)), wc(static_cast<Eigen::Index>(n_cells));
    for (std::size_t i = 0; i < n_nodes; ++i) wn[static_cast<Eigen::Index>(i)] = node_weight[i] * node_rigidity[i];
    for (std::size_t i = 0; i < n_cells; ++i) wc[static_cast<Eigen::Index>(i)] = 2.0 * (1.0 - nu) * d_elem[i];

    // Energy form: K = C_xx' D (C_xx + nu C_yy) + C_yy' D (C_yy + nu C_xx) + 2(1-nu) C_xy' D C_xy.
    const auto dn = wn.asDiagonal();
    Eigen::SparseMatrix<double> bend_x = dn * (cxx + nu * cyy);
    Eigen::SparseMatrix<double> bend_y = dn * (cyy + nu * cxx);
    Eigen::SparseMatrix<double> twist = wc.asDiagonal() * cxy;
    Eigen::SparseMatrix<double> k = Eigen::SparseMatrix<double>(cxx.transpose()) * bend_x;
    k += Eigen::SparseMatrix<double>(cyy.transpose()) * bend_y;
    k += Eigen::SparseMatrix<double>(cxy.transpose()) * twist;
    // Load vector is q * hx * hy; divide through so solve() takes q directly.

    m.factor.compute(k);
    if (m.factor.info() != Eigen::Success) throw std::runtime_error("plate stiffness factorization failed (singular system)");
}

PlateSolver::~PlateSolver() = default;
PlateSolver::PlateSolver(PlateSolver&&) noexcept = default;
PlateSolver& PlateSolver::operator=(PlateSolver&&) noexcept = default;

std::size_t PlateSolver::unknowns() const { return impl_->n_unknowns; }

GridField PlateSolver::solve(const GridField& load) const {
    const Impl& m = *impl_;
    if (load.rows != m.ny + 1 || load.cols != m.nx + 1) throw std::invalid_argument("load field shape does not match plate nodes");
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m.n_unknowns));
    for (int r = 0; r <= m.ny; ++r) {
        for (int c = 0; c <= m.nx; ++c) {
            const int u = m.unknown_of_node[m.node(r, c)];
            if (u < 0) continue;
            const double q = load.at(r, c);
            if (!std::isfinite(q)) throw std::invalid_argument("load field contains non-finite values");
            rhs[u] = q;
        }
    }
    Eigen::VectorXd w = m.factor.solve(rhs);
    if (m.factor.info() != Eigen::Success) throw std::runtime_error("plate solve failed");
    GridField out(m.ny + 1, m.nx + 1);
    for (int r = 0; r <= m.ny; ++r)
        for (int c = 0; c <= m.nx; ++c) {
            const int u = m.unknown_of_node[m.node(r, c)];
            if (u >= 0) out.at(r, c) = w[u];
        }
    return out;
}

GridField solve_plate(const PlateSpec& spec, std::span<const double> thickness_mm, const GridField& load) {
    return PlateSolver(spec, thickness_mm).solve(load);
}

// ---------------------------------------------------------------------------
// Strain recovery

namespace {

// Second difference along a line of n nodes at index i; one-sided four-point
// stencils at the ends (exact for cubics).
double second_difference(const std::function<double(int)>& f, int i, int n, double h) {
    const double ih2 = 1.0 / (h * h);
    if (i == 0) return (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) * ih2;
    if (i == n - 1) return (2.0 * f(n - 1) - 5.0 * f(n - 2) + 4.0 * f(n - 3) - f(n - 4)) * ih2;
    return (f(i - 1) - 2.0 * f(i) + f(i + 1)) * ih2;
}

}  // namespace

StrainTriplet strain_fields(const GridField& w, std::span<const double> thickness_mm, const PlateSpec& spec) {
    const int nx = spec.grid_nx, ny = spec.grid_ny;
    if (w.rows != ny + 1 || w.cols != nx + 1) throw std::invalid_argument("deflection field shape does not match plate nodes");
    const std::vector<double> t = element_thickness_m(spec, thickness_mm);
    const double hx = spec.hx(), hy = spec.hy();

    GridField kxx(ny + 1, nx + 1), kyy(ny + 1, nx + 1);
    for (int r = 0; r <= ny; ++r) {
        for (int c = 0; c <= nx; ++c) {
            kxx.at(r, c) = second_difference([&](int i) { return w.at(r, i); }, c, nx + 1, hx);
            kyy.at(r, c) = second_difference([&](int i) { return w.at(i, c); }, r, ny + 1, hy);
        }
    }

    StrainTriplet out{StrainField{StrainComponent::xx, GridField(ny, nx)}, StrainField{StrainComponent::yy, GridField(ny, nx)},
                      StrainField{StrainComponent::xy, GridField(ny, nx)}};
    for (int r = 0; r < ny; ++r) {
        for (int c = 0; c < nx; ++c) {
            const double half_t = 0.5 * t[static_cast<std::size_t>(r) * nx + c];
            const double cxx = 0.25 * (kxx.at(r, c) + kxx.at(r, c + 1) + kxx.at(r + 1, c) + kxx.at(r + 1, c + 1));
            const double cyy = 0.25 * (kyy.at(r, c) + kyy.at(r, c + 1) + kyy.at(r + 1, c) + kyy.at(r + 1, c + 1));
            const double cxy = (w.at(r + 1, c + 1) - w.at(r + 1, c) - w.at(r, c + 1) + w.at(r, c)) / (hx * hy);
            out[0].field.at(r, c) = -half_t * cxx;
            out[1].field.at(r, c) = -half_t * cyy;
            out[2].field.at(r, c) = -half_t * cxy;
        }
    }
    return out;
}

double yield_strain_normal(const Material& m) { return m.yield_stress / m.youngs_modulus; }

double yield_strain_shear(const Material& m) {
    const double shear_modulus = m.youngs_modulus / (2.0 * (1.0 + m.poisson_ratio));
    return m.yield_stress / (std::sqrt(3.0) * shear_modulus);
}

StrainField normalize_by_yield(const StrainField& field, const Material& m) {
    if (!(m.yield_stress > 0.0)) throw std::invalid_argument("yield stress must be positive");
    const double ref = field.component == StrainComponent::xy ? yield_strain_shear(m) : yield_strain_normal(m);
    StrainField out = field;
    for (double& v : out.field.values) v /= ref;
    return out;
}

void write_field_csv(const std::string& path, const std::string& component, const GridField& field) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "component,nx,ny\n" << component << ',' << field.cols << ',' << field.rows << '\n';
    out.precision(17);
    for (int r = 0; r < field.rows; ++r) {
        for (int c = 0; c < field.cols; ++c) {
            if (c) out << ',';
            out << field.at(r, c);
        }
        out << '\n';
    }
}

}  // namespace cvs
