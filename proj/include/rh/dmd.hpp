#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <complex>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rh::dmd {

using Complex = std::complex<double>;

// Equispaced state snapshots; column k is the state at t0 + k*dt.
struct SnapshotSet {
    Eigen::MatrixXd data;
    double dt = 1.0;
    double t0 = 0.0;

    Eigen::Index state_dim() const { return data.rows(); }
    Eigen::Index count() const { return data.cols(); }
    double time(Eigen::Index k) const { return t0 + static_cast<double>(k) * dt; }
    double t_end() const { return time(count() - 1); }

    // Throws ArgumentError unless m >= 2, n >= 1, dt > 0 and entries finite.
    void validate() const;
};

// Columns with time in [t_start, t_end] (inclusive, 1e-9*dt slack).
SnapshotSet time_window(const SnapshotSet& snapshots, double t_start, double t_end);

// Either a fixed rank or the smallest rank whose squared singular values
// reach the given fraction of the total.
struct RankPolicy {
    enum class Kind { Fixed, Energy };
    Kind kind = Kind::Energy;
    int rank = 0;
    double energy = 0.9999;

    static RankPolicy fixed(int r) { return {Kind::Fixed, r, 0.0}; }
    static RankPolicy energy_fraction(double e) { return {Kind::Energy, 0, e}; }

    // "8" or "energy:0.9999".
    static RankPolicy parse(const std::string& text);
    std::string to_string() const;
};

struct DmdModel {
    Eigen::MatrixXcd modes;       // n x r
    Eigen::VectorXcd eigenvalues; // r
    Eigen::VectorXcd amplitudes;  // r
    Eigen::VectorXd singular_values; // all singular values of the first snapshot block
    int rank = 0;
    double dt = 1.0;
    double t0 = 0.0;
    double reference_norm = 0.0; // |x_1|, scale for amplitude thresholds

    double spectral_radius() const;
};

// Exact DMD. Modes are ordered by decreasing |lambda|, conjugate pairs with
// the positive imaginary part first.
DmdModel fit(const SnapshotSet& snapshots, RankPolicy policy = {});

// Re(Theta diag(lambda^k) b).
Eigen::VectorXd reconstruct(const DmdModel& model, long k);
Eigen::VectorXcd reconstruct_complex(const DmdModel& model, long k);

// State at time t >= t0, using the principal branch for fractional steps.
Eigen::VectorXd forecast(const DmdModel& model, double t);

struct SteadyState {
    Eigen::VectorXd state;
    std::vector<Complex> steady_eigenvalues;      // |lambda - 1| < tol, summed
    std::vector<Complex> divergent_eigenvalues;   // |lambda| > 1 + tol, negligible amplitude
    std::vector<Complex> persistent_eigenvalues;  // on the unit circle away from 1
};

// Limit of the expansion as k -> infinity. Throws UnstableModelError when a
// divergent mode carries amplitude above 1e-6 |x_1|.
SteadyState steady_state(const DmdModel& model, double tol = 1e-3);

// Snapshot files. Text: one state component per row, one snapshot per
// column, optional "# dt <value>" and "# t0 <value>" header comments
// (defaults 1 and 0). Binary: little-endian uint64 n, uint64 m, double dt,
// double t0, then n*m doubles column-major.
SnapshotSet read_snapshot_text(std::istream& in, const std::string& source = "<snapshots>");
void write_snapshot_text(std::ostream& out, const SnapshotSet& snapshots);
SnapshotSet read_snapshot_binary(std::istream& in, const std::string& source = "<snapshots>");
void write_snapshot_binary(std::ostream& out, const SnapshotSet& snapshots);
// ".bin" selects the binary layout.
SnapshotSet load_snapshots(const std::filesystem::path& path);
void save_snapshots(const SnapshotSet& snapshots, const std::filesystem::path& path);

nlohmann::json to_json(const DmdModel& model);
DmdModel model_from_json(const nlohmann::json& doc, const std::string& source = "<model>");
void save_model(const DmdModel& model, const std::filesystem::path& path);
DmdModel load_model(const std::filesystem::path& path);

} // namespace rh::dmd
