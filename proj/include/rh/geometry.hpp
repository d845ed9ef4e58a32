#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace rh::geometry {

using Vec3 = Eigen::Vector3d;

enum class Axis : int { X = 0, Y = 1, Z = 2 };

struct LatticeIndex {
    int i = 0;
    int j = 0;
    int k = 0;
    bool operator==(const LatticeIndex&) const = default;
};

// One design parameter drives one scalar displacement of one control point
// along one lattice axis. Displacements are expressed in lattice-normalized
// units: a value of 1 moves the control point by one full edge vector.
struct Binding {
    LatticeIndex point;
    Axis axis = Axis::Z;
    std::size_t slot = 0;
};

struct Interval {
    double lower = -0.6;
    double upper = 0.5;
};

// FFD control lattice. The physical box is origin + E*s for s in [0,1]^3,
// where the columns of E are the three edge vectors.
class ControlLattice {
public:
    ControlLattice(Vec3 origin, const Eigen::Matrix3d& edges, std::array<int, 3> counts,
                   std::vector<Binding> bindings, std::size_t parameter_count,
                   std::vector<Interval> param_box = {});

    const Vec3& origin() const { return origin_; }
    const Eigen::Matrix3d& edges() const { return edges_; }
    const std::array<int, 3>& counts() const { return counts_; }
    const std::vector<Binding>& bindings() const { return bindings_; }
    const std::vector<Interval>& param_box() const { return param_box_; }
    std::size_t parameter_count() const { return parameter_count_; }

    // psi: physical -> reference coordinates.
    Vec3 to_reference(const Vec3& x) const;
    // psi^-1: reference -> physical coordinates.
    Vec3 to_physical(const Vec3& s) const;

    // Reference-space displacement of every control point for parameters mu,
    // flattened as (i * cy + j) * cz + k.
    std::vector<Vec3> control_displacements(std::span<const double> mu) const;

    // Unit cube [0,1]^3 with counts (2,2,2) and no bindings; tests start here.
    static ControlLattice unit_cube(std::vector<Binding> bindings, std::size_t parameter_count);

private:
    Vec3 origin_;
    Eigen::Matrix3d edges_;
    Eigen::Matrix3d inverse_edges_;
    std::array<int, 3> counts_;
    std::vector<Binding> bindings_;
    std::size_t parameter_count_;
    std::vector<Interval> param_box_;
};

using Face = std::array<std::size_t, 3>;

struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    // Optional per-face scalar (pressure for drag integration).
    std::optional<std::vector<double>> face_field;

    double bounding_box_diagonal() const;
    // Twice-area normal (b-a)x(c-a) of face f, oriented by the stored winding.
    Vec3 area_normal(std::size_t f) const;
    Vec3 centroid(std::size_t f) const;

    // Throws GeometryError on out-of-range indices or a field of wrong length.
    void validate() const;
};

// Bernstein polynomial C(n,i) u^i (1-u)^(n-i).
double bernstein_basis(int i, int n, double u);

// T = psi^-1 o T_hat o psi. Points with any reference coordinate outside
// [0,1] are returned unchanged.
std::vector<Vec3> ffd_deform_points(const ControlLattice& lattice, std::span<const double> mu,
                                    std::span<const Vec3> points);

SurfaceMesh deform_mesh(const ControlLattice& lattice, std::span<const double> mu,
                        const SurfaceMesh& mesh);

// Volume of the closed mesh below the plane z = z_cut. Faces are clipped at
// the plane and the opening is closed by a cap fanned from its centroid.
// Throws GeometryError if the clipped surface has a hole.
double volume_below_plane(const SurfaceMesh& mesh, double z_cut);

// Integral of p n . direction over the surface, with n the outward normal
// implied by counter-clockwise winding. A closed body under p = z (depth
// increasing upward) gives +volume along e_z.
double drag_from_pressure(const SurfaceMesh& mesh, const Vec3& direction);

// Primitive meshes, outward (counter-clockwise) winding.
SurfaceMesh make_box(const Vec3& lower, const Vec3& upper);
SurfaceMesh make_unit_cube();
// Icosahedron refined `levels` times and projected onto the sphere.
SurfaceMesh make_icosphere(int levels, double radius = 1.0, const Vec3& center = Vec3::Zero());

} // namespace rh::geometry
