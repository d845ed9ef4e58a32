#pragma once

#include "rh/dmd.hpp"
#include "rh/geometry.hpp"
#include "rh/response.hpp"
#include "rh/subspaces.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rh::pipeline {

// Lattice definition as it appears in the config file.
struct LatticeSpec {
    geometry::Vec3 origin;
    Eigen::Matrix3d edges; // columns are edge vectors
    std::array<int, 3> counts{};
    std::vector<geometry::Binding> bindings;

    // Stern-bottom box around the built-in hull; a placeholder to be replaced
    // for real geometries.
    static LatticeSpec placeholder();
};

struct CampaignConfig {
    double param_lower = -0.6;
    double param_upper = 0.5;
    int samples = 200;
    std::uint64_t seed = 1;

    std::string mesh = "builtin:hull"; // or a mesh file path
    LatticeSpec lattice = LatticeSpec::placeholder();

    double t_start = 7.0;
    double t_end = 15.0;
    double dt = 0.1;
    std::string dmd_rank = "energy:0.9999";
    double steady_tol = 1e-3;
    // 0 completes with the steady state; otherwise forecast at t_end + horizon.
    double horizon = 0.0;

    double z_cut = 0.0;
    double froude = 0.28; // informational

    std::string band_mode = "percentile"; // or "absolute"
    double band_lower = 40.0;
    double band_upper = 60.0;

    int active_dim = 2; // 0 selects the largest eigenvalue gap
    int rs_degree = 2;
    std::string gradient_method = "local-linear";
    int neighbors = 0;
    // false optimizes resistance alone in its own active subspace.
    bool shared_volume = true;

    std::string surrogate = "analytic-ridge"; // or "file"
    std::string volume_mode = "mesh";         // analytic-ridge only: "mesh" or "ridge"
    std::string snapshot_pattern = "snapshots/sample_{index}.txt";

    // Resistance composition for the file surrogate.
    geometry::Vec3 drag_direction{1.0, 0.0, 0.0};
    double density = 1000.0;
    double speed = 2.097;
    double wetted_surface = 4.86;
    double reynolds = 1.09e7;

    double max_failure_fraction = 0.2;
    int threads = 0; // 0 uses the hardware concurrency

    std::size_t parameter_count() const;
    subspaces::InputScaler scaler() const;
    geometry::ControlLattice make_lattice() const;
    dmd::RankPolicy rank_policy() const;
    void validate() const;
};

nlohmann::json to_json(const CampaignConfig& config);
// Missing keys keep their defaults; unknown keys are an error.
CampaignConfig config_from_json(const nlohmann::json& doc, const std::string& source = "<config>");
CampaignConfig load_config(const std::filesystem::path& path);
void save_config(const CampaignConfig& config, const std::filesystem::path& path);

// Seed from RH_SEED when set, else the fallback.
std::uint64_t seed_from_environment(std::uint64_t fallback);

// N x m uniform samples in [lower, upper]; rows in sample order.
Eigen::MatrixXd sample_parameters(int N, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                  std::uint64_t seed);

// 0.075 / (log10 Re - 2)^2
double ittc57_cf(double reynolds);

geometry::SurfaceMesh builtin_hull();
geometry::SurfaceMesh load_reference_mesh(const CampaignConfig& config,
                                          const std::filesystem::path& base_dir = {});

// Per-sample generator standing in for the flow solver.
class SurrogateModel {
public:
    virtual ~SurrogateModel() = default;
    virtual std::string name() const = 0;
    virtual dmd::SnapshotSet snapshots(std::size_t index, const Eigen::VectorXd& mu_raw,
                                       const geometry::SurfaceMesh& deformed) const = 0;
    // Resistance from the completed (steady or forecast) state.
    virtual double resistance(const Eigen::VectorXd& state, const geometry::SurfaceMesh& deformed) const = 0;
    // Closed-form volume when the surrogate replaces the mesh integral.
    virtual std::optional<double> volume(const Eigen::VectorXd& /*mu_raw*/) const { return std::nullopt; }
    // Exact gradients in scaled coordinates, when known.
    virtual std::optional<Eigen::VectorXd> resistance_gradient(const Eigen::VectorXd& /*mu_scaled*/) const
    {
        return std::nullopt;
    }
    virtual std::optional<Eigen::VectorXd> volume_gradient(const Eigen::VectorXd& /*mu_scaled*/) const
    {
        return std::nullopt;
    }
};

// R(mu) = r0 + (a1^T mu)^2 + 0.5 (a2^T mu)^2 on raw parameters, delivered as
// the limit of a synthetic converging series. Optional ridge volume
// V(mu) = v0 + b1^T mu + 0.5 (b2^T mu)^2.
class AnalyticRidgeSurrogate : public SurrogateModel {
public:
    explicit AnalyticRidgeSurrogate(const CampaignConfig& config);

    std::string name() const override { return "analytic-ridge"; }
    dmd::SnapshotSet snapshots(std::size_t index, const Eigen::VectorXd& mu_raw,
                               const geometry::SurfaceMesh& deformed) const override;
    double resistance(const Eigen::VectorXd& state, const geometry::SurfaceMesh& deformed) const override;
    std::optional<double> volume(const Eigen::VectorXd& mu_raw) const override;
    std::optional<Eigen::VectorXd> resistance_gradient(const Eigen::VectorXd& mu_scaled) const override;
    std::optional<Eigen::VectorXd> volume_gradient(const Eigen::VectorXd& mu_scaled) const override;

    double exact_resistance(const Eigen::VectorXd& mu_raw) const;
    double exact_volume(const Eigen::VectorXd& mu_raw) const;

    static constexpr double r0 = 40.0;
    static constexpr double v0 = 0.25;
    static Eigen::VectorXd a1(std::size_t m);
    static Eigen::VectorXd a2(std::size_t m);
    static Eigen::VectorXd b1(std::size_t m);
    static Eigen::VectorXd b2(std::size_t m);

private:
    CampaignConfig config_;
    subspaces::InputScaler scaler_;
};

// Reads one snapshot file per sample; the completed state is the per-face
// pressure on the deformed mesh.
class FileSurrogate : public SurrogateModel {
public:
    FileSurrogate(const CampaignConfig& config, std::filesystem::path base_dir);

    std::string name() const override { return "file"; }
    dmd::SnapshotSet snapshots(std::size_t index, const Eigen::VectorXd& mu_raw,
                               const geometry::SurfaceMesh& deformed) const override;
    double resistance(const Eigen::VectorXd& state, const geometry::SurfaceMesh& deformed) const override;

    std::filesystem::path snapshot_path(std::size_t index) const;

private:
    CampaignConfig config_;
    std::filesystem::path base_dir_;
};

std::unique_ptr<SurrogateModel> make_surrogate(const CampaignConfig& config,
                                               const std::filesystem::path& base_dir = {});

struct RunRecord {
    std::size_t index = 0;
    bool ok = true;
    std::string failure; // reason when !ok
    Eigen::VectorXd mu_raw;
    Eigen::VectorXd mu_scaled;
    double resistance = 0.0;
    double volume = 0.0;
    int dmd_rank = 0;
    double spectral_radius = 0.0;
    double seconds = 0.0; // wall time, kept out of the records file
};

struct CampaignResult {
    std::vector<RunRecord> records;
    std::size_t failures = 0;
};

CampaignResult run_campaign(const CampaignConfig& config, const SurrogateModel& surrogate,
                            const geometry::SurfaceMesh& reference);
// Convenience overload: surrogate and mesh from the config.
CampaignResult run_campaign(const CampaignConfig& config, const std::filesystem::path& base_dir = {});

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_csv(std::istream& in, const std::string& source = "<records>");
void save_records(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> load_records(const std::filesystem::path& path);
void write_timing_csv(std::ostream& out, const std::vector<RunRecord>& records);

struct OptimizationReport {
    std::vector<std::size_t> used;      // record indices, in row order
    std::vector<std::size_t> feasible;  // record indices inside the band
    double band_lower = 0.0;
    double band_upper = 0.0;
    bool shared_volume = true;

    subspaces::ActiveSubspace resistance_as;
    std::optional<subspaces::ActiveSubspace> volume_as;
    Eigen::MatrixXd Q;
    double shared_residual = 0.0;
    double shared_condition = 1.0;

    Eigen::MatrixXd reduced; // rows follow `used`
    response::PolynomialSurface resistance_surface;
    std::optional<response::PolynomialSurface> volume_surface;
    response::Box region;

    Eigen::VectorXd minimizer_reduced;
    Eigen::VectorXd minimizer_scaled;
    Eigen::VectorXd minimizer_raw;
    Eigen::VectorXd preimage_residual;
    double predicted_resistance = 0.0;
    std::optional<double> predicted_volume;
    std::optional<bool> volume_within_band; // band widened by the volume surface rmse
};

OptimizationReport optimize_reduced(const std::vector<RunRecord>& records, const CampaignConfig& config,
                                    const SurrogateModel* surrogate = nullptr);

// Absolute band from the config, resolving percentiles against `volumes`.
response::FeasibleBand resolve_band(const CampaignConfig& config, const Eigen::VectorXd& volumes);

nlohmann::json to_json(const OptimizationReport& report);
OptimizationReport report_from_json(const nlohmann::json& doc, const std::string& source = "<report>");
void save_report(const OptimizationReport& report, const std::filesystem::path& path);
OptimizationReport load_report(const std::filesystem::path& path);

// Every index the report references exists among the successful records.
void check_references(const OptimizationReport& report, const std::vector<RunRecord>& records);

void write_summary_files(const OptimizationReport& report, const std::vector<RunRecord>& records,
                         const std::filesystem::path& directory);

} // namespace rh::pipeline
