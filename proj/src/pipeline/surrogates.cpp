#include "rh/errors.hpp"
#include "rh/mesh_io.hpp"
#include "rh/pipeline.hpp"

#include <cmath>
#include <random>

namespace rh::pipeline {

Eigen::MatrixXd sample_parameters(int N, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                  std::uint64_t seed)
{
    if (N < 1) {
        throw ArgumentError("sample count must be at least 1");
    }
    if (lower.size() != upper.size() || !(lower.array() <= upper.array()).all()) {
        throw ArgumentError("sampling box bounds are inconsistent");
    }
    // Raw engine bits mapped by hand: distribution objects differ between
    // standard libraries, and campaigns must reproduce everywhere.
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd mu(N, lower.size());
    for (int i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < lower.size(); ++j) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            mu(i, j) = lower(j) + u * (upper(j) - lower(j));
        }
    }
    return mu;
}

double ittc57_cf(double reynolds)
{
    if (!(reynolds > 100.0) || !std::isfinite(reynolds)) {
        throw DomainError("ITTC-57 needs Re > 100, got " + std::to_string(reynolds));
    }
    const double d = std::log10(reynolds) - 2.0;
    return 0.075 / (d * d);
}

geometry::SurfaceMesh builtin_hull()
{
    // Ellipsoid with model-scale length, beam and depth; keel at z = -0.25.
    auto mesh = geometry::make_icosphere(3);
    const geometry::Vec3 semi(2.86, 0.38, 0.40);
    for (auto& v : mesh.vertices) {
        v = v.cwiseProduct(semi) + geometry::Vec3(0.0, 0.0, 0.15);
    }
    return mesh;
}

geometry::SurfaceMesh load_reference_mesh(const CampaignConfig& config, const std::filesystem::path& base_dir)
{
    if (config.mesh == "builtin:hull") {
        return builtin_hull();
    }
    std::filesystem::path path = config.mesh;
    if (path.is_relative() && !base_dir.empty()) {
        path = base_dir / path;
    }
    return geometry::load_mesh(path).mesh;
}

namespace {

Eigen::VectorXd scaled_jacobian(const CampaignConfig& config, std::size_t m)
{
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 0.5 * (config.param_upper - config.param_lower));
}

} // namespace

AnalyticRidgeSurrogate::AnalyticRidgeSurrogate(const CampaignConfig& config)
    : config_(config), scaler_(config.scaler())
{
}

namespace {

// Orthonormal directions built by Gram-Schmidt from fixed patterns:
// [0] ones, [1] ramp, [2] ones tilted by a sine pattern, [3] and [4] spare.
std::vector<Eigen::VectorXd> ridge_directions(std::size_t m)
{
    const auto n = static_cast<Eigen::Index>(m);
    std::vector<Eigen::VectorXd> raw(5, Eigen::VectorXd(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        const double t = static_cast<double>(j);
        raw[0](j) = 1.0;
        raw[1](j) = 1.0 - t / static_cast<double>(m);
        raw[2](j) = std::sin(1.3 * (t + 1.0));
        raw[3](j) = std::cos(0.7 * t + 0.5);
        raw[4](j) = std::sin(2.1 * t + 1.0);
    }
    std::vector<Eigen::VectorXd> basis;
    for (auto v : raw) {
        for (const auto& b : basis) {
            v -= b.dot(v) * b;
        }
        basis.push_back(v.normalized());
    }
    // a2 leans on the ones direction so the minimum of R sits off-centre.
    // The spare directions stay orthogonal to it.
    basis[2] = (basis[0] + 0.5 * basis[2]).normalized();
    return basis;
}

// Angle between the volume and resistance ridges. Small enough to keep the
// shared coordinates close to the resistance ones, large enough that
// sampling noise in the two eigenbases does not swamp it.
constexpr double kTilt = 0.3;

} // namespace

Eigen::VectorXd AnalyticRidgeSurrogate::a1(std::size_t m)
{
    return 6.0 * ridge_directions(m)[1];
}

Eigen::VectorXd AnalyticRidgeSurrogate::a2(std::size_t m)
{
    return 4.0 * ridge_directions(m)[2];
}

Eigen::VectorXd AnalyticRidgeSurrogate::b1(std::size_t m)
{
    const auto d = ridge_directions(m);
    return 0.02 * (std::cos(kTilt) * d[1] + std::sin(kTilt) * d[3]);
}

Eigen::VectorXd AnalyticRidgeSurrogate::b2(std::size_t m)
{
    const auto d = ridge_directions(m);
    return 0.03 * (std::cos(kTilt) * d[2] + std::sin(kTilt) * d[4]);
}

double AnalyticRidgeSurrogate::exact_resistance(const Eigen::VectorXd& mu) const
{
    const double p = a1(static_cast<std::size_t>(mu.size())).dot(mu);
    const double q = a2(static_cast<std::size_t>(mu.size())).dot(mu);
    return r0 + p * p + 0.5 * q * q;
}

double AnalyticRidgeSurrogate::exact_volume(const Eigen::VectorXd& mu) const
{
    const double q = b2(static_cast<std::size_t>(mu.size())).dot(mu);
    return v0 + b1(static_cast<std::size_t>(mu.size())).dot(mu) + 0.5 * q * q;
}

dmd::SnapshotSet AnalyticRidgeSurrogate::snapshots(std::size_t, const Eigen::VectorXd& mu_raw,
                                                   const geometry::SurfaceMesh&) const
{
    const double R = exact_resistance(mu_raw);
    // Limit state carries R in its first component. A decaying real mode and
    // a decaying oscillation sit on top, sized like R so that an energy-based
    // rank keeps all four modes.
    Eigen::VectorXd limit(6);
    limit << R, 1.0, 0.5, -0.25, 0.8, 0.3;
    Eigen::VectorXd decay(6), cosine(6), sine(6);
    decay << 1.0, 0.4, -0.3, 0.2, 0.1, -0.5;
    cosine << 0.3, -0.6, 0.2, 0.5, -0.1, 0.2;
    sine << -0.2, 0.1, 0.7, -0.3, 0.4, 0.1;
    const double amplitude = 0.5 * std::max(1.0, std::abs(R));
    const double tau_real = 4.0;
    const double tau_osc = 3.0;
    const double omega = 2.0 * M_PI / 4.0;

    const auto count = static_cast<Eigen::Index>(std::llround((config_.t_end - config_.t_start) / config_.dt)) + 1;
    dmd::SnapshotSet set;
    set.dt = config_.dt;
    set.t0 = config_.t_start;
    set.data.resize(6, count);
    for (Eigen::Index k = 0; k < count; ++k) {
        const double s = static_cast<double>(k) * config_.dt;
        set.data.col(k) = limit + amplitude * std::exp(-s / tau_real) * decay +
                          amplitude * std::exp(-s / tau_osc) * (std::cos(omega * s) * cosine + std::sin(omega * s) * sine);
    }
    return set;
}

double AnalyticRidgeSurrogate::resistance(const Eigen::VectorXd& state, const geometry::SurfaceMesh&) const
{
    if (state.size() < 1) {
        throw ArgumentError("analytic-ridge state is empty");
    }
    return state(0);
}

std::optional<double> AnalyticRidgeSurrogate::volume(const Eigen::VectorXd& mu_raw) const
{
    if (config_.volume_mode != "ridge") {
        return std::nullopt;
    }
    return exact_volume(mu_raw);
}

std::optional<Eigen::VectorXd> AnalyticRidgeSurrogate::resistance_gradient(const Eigen::VectorXd& mu_scaled) const
{
    const auto m = static_cast<std::size_t>(mu_scaled.size());
    const Eigen::VectorXd mu = scaler_.unscale(mu_scaled);
    const Eigen::VectorXd g = 2.0 * a1(m).dot(mu) * a1(m) + a2(m).dot(mu) * a2(m);
    return g.cwiseProduct(scaled_jacobian(config_, m));
}

std::optional<Eigen::VectorXd> AnalyticRidgeSurrogate::volume_gradient(const Eigen::VectorXd& mu_scaled) const
{
    if (config_.volume_mode != "ridge") {
        return std::nullopt;
    }
    const auto m = static_cast<std::size_t>(mu_scaled.size());
    const Eigen::VectorXd mu = scaler_.unscale(mu_scaled);
    const Eigen::VectorXd g = b1(m) + b2(m).dot(mu) * b2(m);
    return g.cwiseProduct(scaled_jacobian(config_, m));
}

FileSurrogate::FileSurrogate(const CampaignConfig& config, std::filesystem::path base_dir)
    : config_(config), base_dir_(std::move(base_dir))
{
}

std::filesystem::path FileSurrogate::snapshot_path(std::size_t index) const
{
    std::string pattern = config_.snapshot_pattern;
    const std::string token = "{index}";
    const auto at = pattern.find(token);
    if (at == std::string::npos) {
        throw ArgumentError("snapshot_pattern must contain {index}");
    }
    pattern.replace(at, token.size(), std::to_string(index));
    std::filesystem::path path = pattern;
    if (path.is_relative() && !base_dir_.empty()) {
        path = base_dir_ / path;
    }
    return path;
}

dmd::SnapshotSet FileSurrogate::snapshots(std::size_t index, const Eigen::VectorXd&,
                                          const geometry::SurfaceMesh&) const
{
    return dmd::load_snapshots(snapshot_path(index));
}

double FileSurrogate::resistance(const Eigen::VectorXd& state, const geometry::SurfaceMesh& deformed) const
{
    if (static_cast<std::size_t>(state.size()) != deformed.faces.size()) {
        throw ArgumentError("snapshot state has " + std::to_string(state.size()) + " entries but the mesh has " +
                            std::to_string(deformed.faces.size()) + " faces");
    }
    geometry::SurfaceMesh mesh = deformed;
    mesh.face_field = std::vector<double>(state.data(), state.data() + state.size());
    const double wave = geometry::drag_from_pressure(mesh, config_.drag_direction.normalized());
    const double viscous =
        0.5 * config_.density * config_.speed * config_.speed * config_.wetted_surface * ittc57_cf(config_.reynolds);
    return wave + viscous;
}

std::unique_ptr<SurrogateModel> make_surrogate(const CampaignConfig& config, const std::filesystem::path& base_dir)
{
    if (config.surrogate == "analytic-ridge") {
        return std::make_unique<AnalyticRidgeSurrogate>(config);
    }
    if (config.surrogate == "file") {
        return std::make_unique<FileSurrogate>(config, base_dir);
    }
    throw ArgumentError("unknown surrogate '" + config.surrogate + "'");
}

} // namespace rh::pipeline
