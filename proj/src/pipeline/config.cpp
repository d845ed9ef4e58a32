#include "rh/errors.hpp"
#include "rh/pipeline.hpp"

#include "../json_util.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

namespace rh::pipeline {

using nlohmann::json;
using geometry::Axis;
using geometry::Binding;

LatticeSpec LatticeSpec::placeholder()
{
    LatticeSpec s;
    s.origin = geometry::Vec3(-2.95, -0.45, -0.30);
    s.edges = geometry::Vec3(1.5, 0.9, 0.35).asDiagonal();
    s.counts = {5, 4, 4};
    // Interior control points only, so the deformation vanishes on the box
    // faces and the hull stays continuous.
    const int z_points[7][3] = {{1, 1, 1}, {2, 1, 1}, {3, 1, 1}, {1, 2, 1}, {2, 2, 1}, {3, 2, 1}, {2, 1, 2}};
    std::size_t slot = 0;
    for (const auto& p : z_points) {
        s.bindings.push_back({{p[0], p[1], p[2]}, Axis::Z, slot++});
    }
    const int y_points[3][3] = {{1, 1, 2}, {2, 2, 2}, {3, 1, 2}};
    for (const auto& p : y_points) {
        s.bindings.push_back({{p[0], p[1], p[2]}, Axis::Y, slot++});
    }
    return s;
}

std::size_t CampaignConfig::parameter_count() const
{
    std::size_t count = 0;
    for (const auto& b : lattice.bindings) {
        count = std::max(count, b.slot + 1);
    }
    return count;
}

subspaces::InputScaler CampaignConfig::scaler() const
{
    return subspaces::InputScaler::uniform(static_cast<Eigen::Index>(parameter_count()), param_lower,
                                           param_upper);
}

geometry::ControlLattice CampaignConfig::make_lattice() const
{
    const std::vector<geometry::Interval> box(parameter_count(), geometry::Interval{param_lower, param_upper});
    return geometry::ControlLattice(lattice.origin, lattice.edges, lattice.counts, lattice.bindings,
                                    parameter_count(), box);
}

dmd::RankPolicy CampaignConfig::rank_policy() const
{
    return dmd::RankPolicy::parse(dmd_rank);
}

void CampaignConfig::validate() const
{
    if (samples < 1) {
        throw ArgumentError("samples must be at least 1");
    }
    if (!(param_lower < param_upper)) {
        throw ArgumentError("param_lower must be below param_upper");
    }
    if (!(dt > 0.0) || !(t_start < t_end)) {
        throw ArgumentError("snapshot window needs dt > 0 and t_start < t_end");
    }
    const double steps = (t_end - t_start) / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
        throw ArgumentError("window length is not a multiple of dt");
    }
    if (lattice.bindings.empty()) {
        throw ArgumentError("lattice has no bindings");
    }
    make_lattice(); // checks counts, edges and binding coverage
    rank_policy();
    if (!(steady_tol > 0.0) || !(horizon >= 0.0)) {
        throw ArgumentError("steady_tol must be positive and horizon non-negative");
    }
    if (band_mode != "percentile" && band_mode != "absolute" && band_mode != "none") {
        throw ArgumentError("band_mode must be percentile, absolute or none");
    }
    if (!(band_lower <= band_upper)) {
        throw ArgumentError("band_lower must not exceed band_upper");
    }
    if (band_mode == "percentile" && (band_lower < 0.0 || band_upper > 100.0)) {
        throw ArgumentError("percentile band must lie in [0, 100]");
    }
    if (active_dim < 0 || active_dim > static_cast<int>(parameter_count())) {
        throw ArgumentError("active_dim must lie in 0.." + std::to_string(parameter_count()));
    }
    if (rs_degree != 1 && rs_degree != 2) {
        throw ArgumentError("rs_degree must be 1 or 2");
    }
    subspaces::GradientOptions::parse_method(gradient_method);
    if (neighbors < 0) {
        throw ArgumentError("neighbors must be non-negative");
    }
    if (surrogate != "analytic-ridge" && surrogate != "file") {
        throw ArgumentError("unknown surrogate '" + surrogate + "'");
    }
    if (volume_mode != "mesh" && volume_mode != "ridge") {
        throw ArgumentError("volume_mode must be mesh or ridge");
    }
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
        throw ArgumentError("max_failure_fraction must lie in [0, 1]");
    }
    if (threads < 0) {
        throw ArgumentError("threads must be non-negative");
    }
    if (!(drag_direction.norm() > 0.0)) {
        throw ArgumentError("drag_direction must be nonzero");
    }
}

namespace {

const char* axis_name(Axis a)
{
    return a == Axis::X ? "x" : a == Axis::Y ? "y" : "z";
}

Axis parse_axis(const std::string& s, const std::string& source)
{
    if (s == "x" || s == "X") {
        return Axis::X;
    }
    if (s == "y" || s == "Y") {
        return Axis::Y;
    }
    if (s == "z" || s == "Z") {
        return Axis::Z;
    }
    throw ParseError(source, 0, "binding axis must be x, y or z, got '" + s + "'");
}

json vec3_json(const geometry::Vec3& v)
{
    return json::array({v.x(), v.y(), v.z()});
}

geometry::Vec3 vec3_from(const json& doc, const char* key, const std::string& source)
{
    const auto v = detail::field<std::vector<double>>(doc, key, source);
    if (v.size() != 3) {
        throw ParseError(source, 0, std::string("field '") + key + "' needs 3 numbers");
    }
    return {v[0], v[1], v[2]};
}

json lattice_json(const LatticeSpec& s)
{
    json bindings = json::array();
    for (const auto& b : s.bindings) {
        bindings.push_back({{"point", {b.point.i, b.point.j, b.point.k}},
                            {"axis", axis_name(b.axis)},
                            {"slot", b.slot}});
    }
    return json{{"origin", vec3_json(s.origin)},
                {"edges", {vec3_json(s.edges.col(0)), vec3_json(s.edges.col(1)), vec3_json(s.edges.col(2))}},
                {"counts", s.counts},
                {"bindings", bindings}};
}

LatticeSpec lattice_from(const json& doc, const std::string& source)
{
    LatticeSpec s;
    s.origin = vec3_from(doc, "origin", source);
    const auto edges = detail::field<std::vector<std::vector<double>>>(doc, "edges", source);
    if (edges.size() != 3) {
        throw ParseError(source, 0, "lattice edges must list three vectors");
    }
    for (int c = 0; c < 3; ++c) {
        if (edges[c].size() != 3) {
            throw ParseError(source, 0, "lattice edge vectors need 3 numbers");
        }
        s.edges.col(c) = geometry::Vec3(edges[c][0], edges[c][1], edges[c][2]);
    }
    s.counts = detail::field<std::array<int, 3>>(doc, "counts", source);
    const auto bindings = detail::field<json>(doc, "bindings", source);
    if (!bindings.is_array()) {
        throw ParseError(source, 0, "lattice bindings must be an array");
    }
    for (const auto& b : bindings) {
        const auto p = detail::field<std::array<int, 3>>(b, "point", source);
        s.bindings.push_back({{p[0], p[1], p[2]},
                              parse_axis(detail::field<std::string>(b, "axis", source), source),
                              detail::field<std::size_t>(b, "slot", source)});
    }
    return s;
}

} // namespace

json to_json(const CampaignConfig& c)
{
    return json{{"param_lower", c.param_lower},
                {"param_upper", c.param_upper},
                {"samples", c.samples},
                {"seed", c.seed},
                {"mesh", c.mesh},
                {"lattice", lattice_json(c.lattice)},
                {"t_start", c.t_start},
                {"t_end", c.t_end},
                {"dt", c.dt},
                {"dmd_rank", c.dmd_rank},
                {"steady_tol", c.steady_tol},
                {"horizon", c.horizon},
                {"z_cut", c.z_cut},
                {"froude", c.froude},
                {"band_mode", c.band_mode},
                {"band_lower", c.band_lower},
                {"band_upper", c.band_upper},
                {"active_dim", c.active_dim},
                {"rs_degree", c.rs_degree},
                {"gradient_method", c.gradient_method},
                {"neighbors", c.neighbors},
                {"shared_volume", c.shared_volume},
                {"surrogate", c.surrogate},
                {"volume_mode", c.volume_mode},
                {"snapshot_pattern", c.snapshot_pattern},
                {"drag_direction", vec3_json(c.drag_direction)},
                {"density", c.density},
                {"speed", c.speed},
                {"wetted_surface", c.wetted_surface},
                {"reynolds", c.reynolds},
                {"max_failure_fraction", c.max_failure_fraction},
                {"threads", c.threads}};
}

CampaignConfig config_from_json(const json& doc, const std::string& source)
{
    if (!doc.is_object()) {
        throw ParseError(source, 0, "config must be a JSON object");
    }
    CampaignConfig c;
    const json defaults = to_json(c);
    for (const auto& item : doc.items()) {
        if (!defaults.contains(item.key())) {
            throw ParseError(source, 0, "unknown config field '" + item.key() + "'");
        }
    }
    const auto get = [&](const char* key, auto& target) {
        if (doc.contains(key)) {
            target = detail::field<std::decay_t<decltype(target)>>(doc, key, source);
        }
    };
    get("param_lower", c.param_lower);
    get("param_upper", c.param_upper);
    get("samples", c.samples);
    get("seed", c.seed);
    get("mesh", c.mesh);
    if (doc.contains("lattice")) {
        c.lattice = lattice_from(doc["lattice"], source);
    }
    get("t_start", c.t_start);
    get("t_end", c.t_end);
    get("dt", c.dt);
    get("dmd_rank", c.dmd_rank);
    get("steady_tol", c.steady_tol);
    get("horizon", c.horizon);
    get("z_cut", c.z_cut);
    get("froude", c.froude);
    get("band_mode", c.band_mode);
    get("band_lower", c.band_lower);
    get("band_upper", c.band_upper);
    get("active_dim", c.active_dim);
    get("rs_degree", c.rs_degree);
    get("gradient_method", c.gradient_method);
    get("neighbors", c.neighbors);
    get("shared_volume", c.shared_volume);
    get("surrogate", c.surrogate);
    get("volume_mode", c.volume_mode);
    get("snapshot_pattern", c.snapshot_pattern);
    if (doc.contains("drag_direction")) {
        c.drag_direction = vec3_from(doc, "drag_direction", source);
    }
    get("density", c.density);
    get("speed", c.speed);
    get("wetted_surface", c.wetted_surface);
    get("reynolds", c.reynolds);
    get("max_failure_fraction", c.max_failure_fraction);
    get("threads", c.threads);
    return c;
}

CampaignConfig load_config(const std::filesystem::path& path)
{
    return config_from_json(detail::read_json_file(path), path.string());
}

void save_config(const CampaignConfig& config, const std::filesystem::path& path)
{
    detail::write_json_file(to_json(config), path);
}

std::uint64_t seed_from_environment(std::uint64_t fallback)
{
    const char* text = std::getenv("RH_SEED");
    if (text == nullptr || *text == '\0') {
        return fallback;
    }
    try {
        std::size_t used = 0;
        const auto value = std::stoull(text, &used);
        if (used == std::string(text).size()) {
            return value;
        }
    } catch (const std::exception&) {
    }
    throw ArgumentError(std::string("RH_SEED is not an unsigned integer: '") + text + "'");
}

} // namespace rh::pipeline
