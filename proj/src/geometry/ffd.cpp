#include "rh/diagnostics.hpp"
#include "rh/errors.hpp"
#include "rh/geometry.hpp"

#include <cmath>
#include <sstream>

namespace rh::geometry {

namespace {

double binomial(int n, int k)
{
    double c = 1.0;
    for (int j = 1; j <= k; ++j) {
        c = c * static_cast<double>(n - k + j) / static_cast<double>(j);
    }
    return c;
}

// Reference coordinates may miss the closed unit interval by rounding when a
// point sits exactly on the lattice boundary.
constexpr double kBoxTolerance = 1e-12;

bool inside_unit_box(const Vec3& s)
{
    for (int a = 0; a < 3; ++a) {
        if (!(s[a] >= -kBoxTolerance && s[a] <= 1.0 + kBoxTolerance)) {
            return false;
        }
    }
    return true;
}

void check_mu(const ControlLattice& lattice, std::span<const double> mu)
{
    if (mu.size() != lattice.parameter_count()) {
        std::ostringstream msg;
        msg << "parameter vector has length " << mu.size() << ", lattice expects "
            << lattice.parameter_count();
        throw ArgumentError(msg.str());
    }
    const auto& box = lattice.param_box();
    for (std::size_t p = 0; p < mu.size(); ++p) {
        if (mu[p] < box[p].lower || mu[p] > box[p].upper) {
            std::ostringstream msg;
            msg << "parameter " << p << " = " << mu[p] << " outside [" << box[p].lower << ", "
                << box[p].upper << "]";
            warn(msg.str());
        }
    }
}

} // namespace

double bernstein_basis(int i, int n, double u)
{
    if (n < 0 || i < 0 || i > n) {
        throw ArgumentError("bernstein_basis: index " + std::to_string(i) + " outside 0.." +
                            std::to_string(n));
    }
    return binomial(n, i) * std::pow(u, i) * std::pow(1.0 - u, n - i);
}

ControlLattice::ControlLattice(Vec3 origin, const Eigen::Matrix3d& edges, std::array<int, 3> counts,
                               std::vector<Binding> bindings, std::size_t parameter_count,
                               std::vector<Interval> param_box)
    : origin_(std::move(origin)), edges_(edges), counts_(counts), bindings_(std::move(bindings)),
      parameter_count_(parameter_count), param_box_(std::move(param_box))
{
    Eigen::FullPivLU<Eigen::Matrix3d> lu(edges_);
    const double scale = edges_.colwise().norm().prod();
    if (!lu.isInvertible() || std::abs(edges_.determinant()) <= 1e-12 * scale) {
        throw ArgumentError("lattice edge vectors are linearly dependent");
    }
    inverse_edges_ = lu.inverse();
    for (int c : counts_) {
        if (c < 2) {
            throw ArgumentError("lattice needs at least 2 control points per axis");
        }
    }
    std::vector<bool> bound(parameter_count_, false);
    for (const auto& b : bindings_) {
        const auto& p = b.point;
        if (p.i < 0 || p.i >= counts_[0] || p.j < 0 || p.j >= counts_[1] || p.k < 0 ||
            p.k >= counts_[2]) {
            std::ostringstream msg;
            msg << "binding control point (" << p.i << "," << p.j << "," << p.k
                << ") outside lattice counts";
            throw ArgumentError(msg.str());
        }
        if (b.slot >= parameter_count_) {
            throw ArgumentError("binding slot " + std::to_string(b.slot) + " >= parameter count " +
                                std::to_string(parameter_count_));
        }
        bound[b.slot] = true;
    }
    for (std::size_t p = 0; p < parameter_count_; ++p) {
        if (!bound[p]) {
            throw ArgumentError("parameter slot " + std::to_string(p) + " is not bound");
        }
    }
    if (param_box_.empty()) {
        param_box_.assign(parameter_count_, Interval{});
    }
    if (param_box_.size() != parameter_count_) {
        throw ArgumentError("param_box size does not match parameter count");
    }
    for (const auto& iv : param_box_) {
        if (!(iv.lower <= iv.upper)) {
            throw ArgumentError("param_box interval with lower > upper");
        }
    }
}

ControlLattice ControlLattice::unit_cube(std::vector<Binding> bindings, std::size_t parameter_count)
{
    return ControlLattice(Vec3::Zero(), Eigen::Matrix3d::Identity(), {2, 2, 2}, std::move(bindings),
                          parameter_count);
}

Vec3 ControlLattice::to_reference(const Vec3& x) const
{
    return inverse_edges_ * (x - origin_);
}

Vec3 ControlLattice::to_physical(const Vec3& s) const
{
    return origin_ + edges_ * s;
}

std::vector<Vec3> ControlLattice::control_displacements(std::span<const double> mu) const
{
    std::vector<Vec3> d(static_cast<std::size_t>(counts_[0] * counts_[1] * counts_[2]),
                        Vec3::Zero());
    for (const auto& b : bindings_) {
        const auto idx = static_cast<std::size_t>((b.point.i * counts_[1] + b.point.j) * counts_[2] +
                                                  b.point.k);
        d[idx][static_cast<int>(b.axis)] += mu[b.slot];
    }
    return d;
}

std::vector<Vec3> ffd_deform_points(const ControlLattice& lattice, std::span<const double> mu,
                                    std::span<const Vec3> points)
{
    check_mu(lattice, mu);
    const auto displacement = lattice.control_displacements(mu);
    const auto [cx, cy, cz] = lattice.counts();

    std::vector<double> bx(static_cast<std::size_t>(cx));
    std::vector<double> by(static_cast<std::size_t>(cy));
    std::vector<double> bz(static_cast<std::size_t>(cz));

    std::vector<Vec3> out(points.begin(), points.end());
    for (auto& x : out) {
        Vec3 s = lattice.to_reference(x);
        if (!inside_unit_box(s)) {
            continue;
        }
        s = s.cwiseMax(0.0).cwiseMin(1.0);
        for (int i = 0; i < cx; ++i) bx[i] = bernstein_basis(i, cx - 1, s[0]);
        for (int j = 0; j < cy; ++j) by[j] = bernstein_basis(j, cy - 1, s[1]);
        for (int k = 0; k < cz; ++k) bz[k] = bernstein_basis(k, cz - 1, s[2]);

        // The undisplaced lattice reproduces s exactly (linear precision of
        // the Bernstein basis), so only the displacement sum is evaluated.
        Vec3 shift = Vec3::Zero();
        std::size_t idx = 0;
        for (int i = 0; i < cx; ++i) {
            for (int j = 0; j < cy; ++j) {
                const double wij = bx[i] * by[j];
                for (int k = 0; k < cz; ++k, ++idx) {
                    if (displacement[idx].isZero(0.0)) {
                        continue;
                    }
                    shift += (wij * bz[k]) * displacement[idx];
                }
            }
        }
        if (!shift.isZero(0.0)) {
            x += lattice.edges() * shift;
        }
    }
    return out;
}

SurfaceMesh deform_mesh(const ControlLattice& lattice, std::span<const double> mu,
                        const SurfaceMesh& mesh)
{
    SurfaceMesh out;
    out.vertices = ffd_deform_points(lattice, mu, mesh.vertices);
    out.faces = mesh.faces;
    out.face_field = mesh.face_field;
    return out;
}

} // namespace rh::geometry
