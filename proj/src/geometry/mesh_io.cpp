#include "rh/errors.hpp"
#include "rh/mesh_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

namespace rh::geometry {

namespace {

std::string trim_comment(const std::string& line)
{
    const auto hash = line.find('#');
    return hash == std::string::npos ? line : line.substr(0, hash);
}

double parse_double(std::istringstream& tokens, const std::string& source, std::size_t line,
                    const char* what)
{
    std::string token;
    if (!(tokens >> token)) {
        throw ParseError(source, line, std::string("missing ") + what);
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) {
            throw std::invalid_argument(token);
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError(source, line, std::string("bad ") + what + " '" + token + "'");
    }
}

// Drops faces with area below 1e-12 * diag^2 and returns how many went.
std::size_t remove_degenerate(SurfaceMesh& mesh)
{
    const double diag = mesh.bounding_box_diagonal();
    const double min_area = 1e-12 * diag * diag;
    std::vector<Face> kept;
    std::vector<double> kept_field;
    kept.reserve(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        if (0.5 * mesh.area_normal(f).norm() <= min_area) {
            continue;
        }
        kept.push_back(mesh.faces[f]);
        if (mesh.face_field) {
            kept_field.push_back((*mesh.face_field)[f]);
        }
    }
    const std::size_t removed = mesh.faces.size() - kept.size();
    mesh.faces = std::move(kept);
    if (mesh.face_field) {
        mesh.face_field = std::move(kept_field);
    }
    return removed;
}

LoadedMesh finish(SurfaceMesh mesh, std::size_t quads_split, const std::string& source)
{
    if (mesh.faces.empty()) {
        throw ParseError(source, 0, "no faces");
    }
    LoadedMesh loaded;
    loaded.diagnostics.degenerate_faces_removed = remove_degenerate(mesh);
    const auto topo = analyze_topology(mesh);
    loaded.diagnostics.non_manifold_edges = topo.non_manifold_edges;
    loaded.diagnostics.boundary_edges = topo.boundary_edges;
    loaded.diagnostics.quads_split = quads_split;
    loaded.mesh = std::move(mesh);
    return loaded;
}

} // namespace

MeshDiagnostics analyze_topology(const SurfaceMesh& mesh)
{
    std::map<std::pair<std::size_t, std::size_t>, int> uses;
    for (const auto& face : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            ++uses[std::minmax(face[e], face[(e + 1) % 3])];
        }
    }
    MeshDiagnostics d;
    for (const auto& [edge, n] : uses) {
        if (n == 1) {
            ++d.boundary_edges;
        } else if (n > 2) {
            ++d.non_manifold_edges;
        }
    }
    return d;
}

MeshFormat format_from_path(const std::filesystem::path& path)
{
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".stl" ? MeshFormat::Stl : MeshFormat::Indexed;
}

LoadedMesh read_indexed(std::istream& in, const std::string& source)
{
    SurfaceMesh mesh;
    std::vector<double> scalars;
    std::vector<int> face_pieces; // triangles produced by each input face
    std::size_t quads = 0;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::istringstream tokens(trim_comment(raw));
        std::string tag;
        if (!(tokens >> tag)) {
            continue;
        }
        if (tag == "v") {
            Vec3 p;
            p.x() = parse_double(tokens, source, line_no, "x coordinate");
            p.y() = parse_double(tokens, source, line_no, "y coordinate");
            p.z() = parse_double(tokens, source, line_no, "z coordinate");
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<std::size_t> idx;
            std::string token;
            while (tokens >> token) {
                long long v = 0;
                try {
                    std::size_t used = 0;
                    v = std::stoll(token, &used);
                    if (used != token.size()) {
                        throw std::invalid_argument(token);
                    }
                } catch (const std::exception&) {
                    throw ParseError(source, line_no, "bad vertex index '" + token + "'");
                }
                if (v < 1 || static_cast<std::size_t>(v) > mesh.vertices.size()) {
                    throw ParseError(source, line_no,
                                     "vertex index " + token + " out of range (1.." +
                                         std::to_string(mesh.vertices.size()) + ")");
                }
                idx.push_back(static_cast<std::size_t>(v - 1));
            }
            if (idx.size() == 3) {
                mesh.faces.push_back({idx[0], idx[1], idx[2]});
                face_pieces.push_back(1);
            } else if (idx.size() == 4) {
                const auto& V = mesh.vertices;
                const double d02 = (V[idx[0]] - V[idx[2]]).squaredNorm();
                const double d13 = (V[idx[1]] - V[idx[3]]).squaredNorm();
                if (d02 <= d13) {
                    mesh.faces.push_back({idx[0], idx[1], idx[2]});
                    mesh.faces.push_back({idx[0], idx[2], idx[3]});
                } else {
                    mesh.faces.push_back({idx[0], idx[1], idx[3]});
                    mesh.faces.push_back({idx[1], idx[2], idx[3]});
                }
                face_pieces.push_back(2);
                ++quads;
            } else {
                throw ParseError(source, line_no,
                                 "face needs 3 or 4 vertex indices, got " + std::to_string(idx.size()));
            }
        } else if (tag == "s") {
            scalars.push_back(parse_double(tokens, source, line_no, "face scalar"));
        } else {
            throw ParseError(source, line_no, "unknown record '" + tag + "'");
        }
    }
    if (!scalars.empty()) {
        if (scalars.size() != face_pieces.size()) {
            throw ParseError(source, line_no,
                             std::to_string(scalars.size()) + " face scalars for " +
                                 std::to_string(face_pieces.size()) + " faces");
        }
        std::vector<double> field;
        for (std::size_t f = 0; f < scalars.size(); ++f) {
            field.insert(field.end(), static_cast<std::size_t>(face_pieces[f]), scalars[f]);
        }
        mesh.face_field = std::move(field);
    }
    return finish(std::move(mesh), quads, source);
}

LoadedMesh read_stl(std::istream& in, const std::string& source)
{
    SurfaceMesh mesh;
    std::map<std::tuple<double, double, double>, std::size_t> welded;
    std::size_t line_no = 0;
    std::string raw;

    enum class State { Start, Solid, Facet, Loop, EndLoop, Done };
    State state = State::Start;
    std::vector<std::size_t> corner;

    auto expect = [&](bool ok, const std::string& msg) {
        if (!ok) {
            throw ParseError(source, line_no, msg);
        }
    };

    while (std::getline(in, raw)) {
        ++line_no;
        std::istringstream tokens(raw);
        std::string word;
        if (!(tokens >> word)) {
            continue;
        }
        switch (state) {
        case State::Start:
            expect(word == "solid", "expected 'solid'");
            state = State::Solid;
            break;
        case State::Solid:
            if (word == "endsolid") {
                state = State::Done;
                break;
            }
            expect(word == "facet", "expected 'facet' or 'endsolid', got '" + word + "'");
            {
                std::string normal;
                expect(static_cast<bool>(tokens >> normal) && normal == "normal",
                       "expected 'facet normal'");
                for (const char* c : {"normal x", "normal y", "normal z"}) {
                    parse_double(tokens, source, line_no, c);
                }
            }
            state = State::Facet;
            break;
        case State::Facet: {
            std::string loop;
            expect(word == "outer" && (tokens >> loop) && loop == "loop", "expected 'outer loop'");
            corner.clear();
            state = State::Loop;
            break;
        }
        case State::Loop:
            if (word == "endloop") {
                expect(corner.size() == 3,
                       "facet has " + std::to_string(corner.size()) + " vertices, expected 3");
                mesh.faces.push_back({corner[0], corner[1], corner[2]});
                state = State::EndLoop;
                break;
            }
            expect(word == "vertex", "expected 'vertex' or 'endloop', got '" + word + "'");
            {
                const double x = parse_double(tokens, source, line_no, "vertex x");
                const double y = parse_double(tokens, source, line_no, "vertex y");
                const double z = parse_double(tokens, source, line_no, "vertex z");
                auto [it, inserted] = welded.try_emplace({x, y, z}, mesh.vertices.size());
                if (inserted) {
                    mesh.vertices.emplace_back(x, y, z);
                }
                corner.push_back(it->second);
            }
            break;
        case State::EndLoop:
            expect(word == "endfacet", "expected 'endfacet'");
            state = State::Solid;
            break;
        case State::Done:
            throw ParseError(source, line_no, "content after 'endsolid'");
        }
    }
    if (state == State::Start) {
        throw ParseError(source, line_no, "empty file");
    }
    if (state != State::Done) {
        throw ParseError(source, line_no, "unexpected end of file");
    }
    return finish(std::move(mesh), 0, source);
}

void write_indexed(std::ostream& out, const SurfaceMesh& mesh)
{
    mesh.validate();
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) {
        out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const auto& [a, b, c] : mesh.faces) {
        out << "f " << a + 1 << ' ' << b + 1 << ' ' << c + 1 << '\n';
    }
    if (mesh.face_field) {
        for (double s : *mesh.face_field) {
            out << "s " << s << '\n';
        }
    }
}

void write_stl(std::ostream& out, const SurfaceMesh& mesh, const std::string& name)
{
    mesh.validate();
    out << std::setprecision(17);
    out << "solid " << name << '\n';
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        Vec3 n = mesh.area_normal(f);
        if (n.norm() > 0.0) {
            n.normalize();
        }
        out << "  facet normal " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
        out << "    outer loop\n";
        for (auto v : mesh.faces[f]) {
            const auto& p = mesh.vertices[v];
            out << "      vertex " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
        }
        out << "    endloop\n  endfacet\n";
    }
    out << "endsolid " << name << '\n';
}

LoadedMesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open mesh file " + path.string());
    }
    const auto fmt = format.value_or(format_from_path(path));
    return fmt == MeshFormat::Stl ? read_stl(in, path.string()) : read_indexed(in, path.string());
}

void save_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path,
               std::optional<MeshFormat> format)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write mesh file " + path.string());
    }
    if (format.value_or(format_from_path(path)) == MeshFormat::Stl) {
        write_stl(out, mesh);
    } else {
        write_indexed(out, mesh);
    }
    if (!out) {
        throw IoError("error while writing " + path.string());
    }
}

} // namespace rh::geometry
