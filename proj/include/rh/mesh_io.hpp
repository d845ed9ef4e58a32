#pragma once

#include "rh/geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace rh::geometry {

enum class MeshFormat { Stl, Indexed };

struct MeshDiagnostics {
    std::size_t non_manifold_edges = 0; // shared by more than two faces
    std::size_t boundary_edges = 0;     // used by exactly one face
    std::size_t degenerate_faces_removed = 0;
    std::size_t quads_split = 0;
};

struct LoadedMesh {
    SurfaceMesh mesh;
    MeshDiagnostics diagnostics;
};

MeshDiagnostics analyze_topology(const SurfaceMesh& mesh);

// ".stl" selects ASCII STL, anything else the indexed text format.
MeshFormat format_from_path(const std::filesystem::path& path);

// Indexed text format, one record per line, '#' starts a comment:
//   v x y z        vertex
//   f i j k [l]    face, 1-based; a quad is split along its shorter diagonal
//   s value        optional face scalar, one per f line, in the same order
LoadedMesh read_indexed(std::istream& in, const std::string& source = "<indexed>");
LoadedMesh read_stl(std::istream& in, const std::string& source = "<stl>");
void write_indexed(std::ostream& out, const SurfaceMesh& mesh);
void write_stl(std::ostream& out, const SurfaceMesh& mesh, const std::string& name = "rh");

LoadedMesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format = {});
void save_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path,
               std::optional<MeshFormat> format = {});

} // namespace rh::geometry
