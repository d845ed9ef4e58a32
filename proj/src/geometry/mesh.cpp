#include "rh/diagnostics.hpp"
#include "rh/errors.hpp"
#include "rh/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace rh::geometry {

double SurfaceMesh::bounding_box_diagonal() const
{
    if (vertices.empty()) {
        return 0.0;
    }
    Vec3 lo = vertices.front();
    Vec3 hi = vertices.front();
    for (const auto& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

Vec3 SurfaceMesh::area_normal(std::size_t f) const
{
    const auto& [a, b, c] = faces[f];
    return (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]);
}

Vec3 SurfaceMesh::centroid(std::size_t f) const
{
    const auto& [a, b, c] = faces[f];
    return (vertices[a] + vertices[b] + vertices[c]) / 3.0;
}

void SurfaceMesh::validate() const
{
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (auto v : faces[f]) {
            if (v >= vertices.size()) {
                throw GeometryError("face " + std::to_string(f) + " references vertex " +
                                    std::to_string(v) + " of " + std::to_string(vertices.size()));
            }
        }
    }
    if (face_field && face_field->size() != faces.size()) {
        throw GeometryError("face field has " + std::to_string(face_field->size()) +
                            " values for " + std::to_string(faces.size()) + " faces");
    }
}

namespace {

// A vertex of the clipped surface: an original vertex (second == npos) or the
// crossing point on edge (first, second) with first < second.
using ClipKey = std::pair<std::size_t, std::size_t>;
constexpr std::size_t kNoEdge = std::numeric_limits<std::size_t>::max();

struct Clipper {
    const SurfaceMesh& mesh;
    double z_cut;

    bool inside(std::size_t v) const { return mesh.vertices[v].z() <= z_cut; }

    bool on_plane(const ClipKey& key) const
    {
        return key.second != kNoEdge || mesh.vertices[key.first].z() == z_cut;
    }

    Vec3 position(const ClipKey& key) const
    {
        if (key.second == kNoEdge) {
            return mesh.vertices[key.first];
        }
        const Vec3& lo = mesh.vertices[key.first];
        const Vec3& hi = mesh.vertices[key.second];
        const double t = (z_cut - lo.z()) / (hi.z() - lo.z());
        Vec3 p = lo + t * (hi - lo);
        p.z() = z_cut;
        return p;
    }
};

// Six times the signed tetrahedron volume. The division is deferred to the
// end so that dyadic geometry sums exactly.
double signed_tet6(const Vec3& o, const Vec3& a, const Vec3& b, const Vec3& c)
{
    return (a - o).dot((b - o).cross(c - o));
}

} // namespace

double volume_below_plane(const SurfaceMesh& mesh, double z_cut)
{
    mesh.validate();
    if (mesh.vertices.empty()) {
        return 0.0;
    }
    const Clipper clip{mesh, z_cut};
    const double diag = mesh.bounding_box_diagonal();
    const double gap_tolerance = 1e-9 * diag;

    Vec3 origin = mesh.vertices.front();
    for (const auto& v : mesh.vertices) {
        origin = origin.cwiseMin(v);
    }

    double volume = 0.0;
    // Net count of each undirected edge: +1 per a->b, -1 per b->a (a < b).
    std::map<std::pair<ClipKey, ClipKey>, int> edge_balance;
    std::vector<ClipKey> polygon;
    polygon.reserve(4);

    for (const auto& face : mesh.faces) {
        polygon.clear();
        for (int e = 0; e < 3; ++e) {
            const std::size_t p = face[e];
            const std::size_t q = face[(e + 1) % 3];
            const double zp = mesh.vertices[p].z();
            const double zq = mesh.vertices[q].z();
            if (clip.inside(p)) {
                polygon.emplace_back(p, kNoEdge);
            }
            if ((zp < z_cut && zq > z_cut) || (zp > z_cut && zq < z_cut)) {
                polygon.emplace_back(std::min(p, q), std::max(p, q));
            }
        }
        if (polygon.size() < 3) {
            continue;
        }
        std::vector<Vec3> pts;
        pts.reserve(polygon.size());
        for (const auto& key : polygon) {
            pts.push_back(clip.position(key));
        }
        for (std::size_t t = 1; t + 1 < pts.size(); ++t) {
            volume += signed_tet6(origin, pts[0], pts[t], pts[t + 1]);
        }
        for (std::size_t e = 0; e < polygon.size(); ++e) {
            const auto& a = polygon[e];
            const auto& b = polygon[(e + 1) % polygon.size()];
            if (a < b) {
                ++edge_balance[{a, b}];
            } else {
                --edge_balance[{b, a}];
            }
        }
    }

    // Unmatched edges off the plane are holes. Unmatched edges on the plane
    // bound the cap.
    std::vector<std::pair<ClipKey, ClipKey>> cap_edges;
    double worst_gap = 0.0;
    for (const auto& [edge, count] : edge_balance) {
        if (count == 0) {
            continue;
        }
        const auto& [a, b] = edge;
        if (clip.on_plane(a) && clip.on_plane(b)) {
            for (int n = 0; n < std::abs(count); ++n) {
                if (count > 0) {
                    cap_edges.emplace_back(a, b);
                } else {
                    cap_edges.emplace_back(b, a);
                }
            }
            continue;
        }
        const double len = (clip.position(a) - clip.position(b)).norm();
        if (len > gap_tolerance) {
            worst_gap = std::max(worst_gap, len);
        }
    }
    if (worst_gap > 0.0) {
        std::ostringstream msg;
        msg << "mesh is open below z = " << z_cut << ": boundary edge of length " << worst_gap;
        throw GeometryError(msg.str(), worst_gap);
    }

    // Cap boundary must form closed loops: in-degree equals out-degree.
    std::map<ClipKey, int> degree;
    for (const auto& [a, b] : cap_edges) {
        ++degree[a];
        --degree[b];
    }
    std::vector<Vec3> dangling;
    for (const auto& [key, d] : degree) {
        if (d != 0) {
            dangling.push_back(clip.position(key));
        }
    }
    if (!dangling.empty()) {
        double gap = 0.0;
        for (std::size_t i = 0; i < dangling.size(); ++i) {
            double nearest = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < dangling.size(); ++j) {
                if (i != j) {
                    nearest = std::min(nearest, (dangling[i] - dangling[j]).norm());
                }
            }
            gap = std::max(gap, std::isfinite(nearest) ? nearest : diag);
        }
        if (gap > gap_tolerance) {
            std::ostringstream msg;
            msg << "cut at z = " << z_cut << " leaves an open cap boundary, gap " << gap;
            throw GeometryError(msg.str(), gap);
        }
    }

    if (!cap_edges.empty()) {
        Vec3 centroid = Vec3::Zero();
        for (const auto& [a, b] : cap_edges) {
            centroid += clip.position(a) + clip.position(b);
        }
        centroid /= static_cast<double>(2 * cap_edges.size());
        centroid.z() = z_cut;
        // The surface boundary runs a->b, so the cap closes it with b->a.
        for (const auto& [a, b] : cap_edges) {
            volume += signed_tet6(origin, centroid, clip.position(b), clip.position(a));
        }
    }

    volume /= 6.0;
    if (volume < 0.0) {
        warn("volume_below_plane: negative signed volume, mesh winding appears inward");
        volume = -volume;
    }
    return volume;
}

double drag_from_pressure(const SurfaceMesh& mesh, const Vec3& direction)
{
    mesh.validate();
    if (!mesh.face_field) {
        throw ArgumentError("drag_from_pressure: mesh has no per-face pressure field");
    }
    if (std::abs(direction.norm() - 1.0) > 1e-9) {
        throw ArgumentError("drag_from_pressure: direction is not a unit vector");
    }
    const auto& p = *mesh.face_field;
    double force = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        force += p[f] * 0.5 * mesh.area_normal(f).dot(direction);
    }
    return force;
}

SurfaceMesh make_box(const Vec3& lower, const Vec3& upper)
{
    SurfaceMesh m;
    for (int c = 0; c < 8; ++c) {
        m.vertices.emplace_back((c & 1) ? upper.x() : lower.x(), (c & 2) ? upper.y() : lower.y(),
                                (c & 4) ? upper.z() : lower.z());
    }
    // Quads listed counter-clockwise seen from outside.
    const int quads[6][4] = {
        {0, 2, 3, 1}, // z-
        {4, 5, 7, 6}, // z+
        {0, 1, 5, 4}, // y-
        {2, 6, 7, 3}, // y+
        {0, 4, 6, 2}, // x-
        {1, 3, 7, 5}, // x+
    };
    for (const auto& q : quads) {
        m.faces.push_back({std::size_t(q[0]), std::size_t(q[1]), std::size_t(q[2])});
        m.faces.push_back({std::size_t(q[0]), std::size_t(q[2]), std::size_t(q[3])});
    }
    return m;
}

SurfaceMesh make_unit_cube()
{
    return make_box(Vec3::Zero(), Vec3::Ones());
}

SurfaceMesh make_icosphere(int levels, double radius, const Vec3& center)
{
    if (levels < 0) {
        throw ArgumentError("make_icosphere: negative subdivision level");
    }
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& p : v) {
        p.normalize();
    }
    std::vector<Face> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int level = 0; level < levels; ++level) {
        std::map<std::pair<std::size_t, std::size_t>, std::size_t> midpoint;
        auto mid = [&](std::size_t a, std::size_t b) {
            const auto key = std::minmax(a, b);
            if (auto it = midpoint.find(key); it != midpoint.end()) {
                return it->second;
            }
            v.push_back((v[a] + v[b]).normalized());
            midpoint.emplace(key, v.size() - 1);
            return v.size() - 1;
        };
        std::vector<Face> refined;
        refined.reserve(f.size() * 4);
        for (const auto& [a, b, c] : f) {
            const auto ab = mid(a, b);
            const auto bc = mid(b, c);
            const auto ca = mid(c, a);
            refined.push_back({a, ab, ca});
            refined.push_back({b, bc, ab});
            refined.push_back({c, ca, bc});
            refined.push_back({ab, bc, ca});
        }
        f = std::move(refined);
    }
    SurfaceMesh m;
    m.vertices.reserve(v.size());
    for (const auto& p : v) {
        m.vertices.push_back(center + radius * p);
    }
    m.faces = std::move(f);
    return m;
}

} // namespace rh::geometry
