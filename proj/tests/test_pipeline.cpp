#include "rh/diagnostics.hpp"
#include "rh/errors.hpp"
#include "rh/pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rh::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("rh_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string records_text(const std::vector<RunRecord>& records)
{
    std::ostringstream out;
    write_records_csv(out, records);
    return out.str();
}

CampaignConfig small_config(int samples = 40)
{
    CampaignConfig c;
    c.samples = samples;
    c.threads = 1;
    return c;
}

// Convex quadratic in scaled coordinates with its minimum at x_star, served
// as the limit of a decaying series. Lets the single-QoI optimizer be checked
// against the closed-form stationary point.
class QuadraticSurrogate : public SurrogateModel {
public:
    QuadraticSurrogate(const CampaignConfig& config, Eigen::MatrixXd H, Eigen::VectorXd x_star)
        : config_(config), scaler_(config.scaler()), H_(std::move(H)), x_star_(std::move(x_star))
    {
    }

    std::string name() const override { return "quadratic"; }

    double value(const Eigen::VectorXd& mu_raw) const
    {
        const Eigen::VectorXd d = scaler_.scale(mu_raw) - x_star_;
        return 3.0 + 0.5 * d.dot(H_ * d);
    }

    rh::dmd::SnapshotSet snapshots(std::size_t, const Eigen::VectorXd& mu_raw,
                                   const rh::geometry::SurfaceMesh&) const override
    {
        const auto count = static_cast<Eigen::Index>(std::llround((config_.t_end - config_.t_start) / config_.dt)) + 1;
        rh::dmd::SnapshotSet set;
        set.dt = config_.dt;
        set.t0 = config_.t_start;
        set.data.resize(2, count);
        for (Eigen::Index k = 0; k < count; ++k) {
            const double decay = std::exp(-static_cast<double>(k) * config_.dt / 2.0);
            set.data(0, k) = value(mu_raw) + decay;
            set.data(1, k) = 1.0 - 0.5 * decay;
        }
        return set;
    }

    double resistance(const Eigen::VectorXd& state, const rh::geometry::SurfaceMesh&) const override
    {
        return state(0);
    }

    std::optional<double> volume(const Eigen::VectorXd&) const override { return 1.0; }

private:
    CampaignConfig config_;
    rh::subspaces::InputScaler scaler_;
    Eigen::MatrixXd H_;
    Eigen::VectorXd x_star_;
};

} // namespace

TEST_CASE("samples stay in the box and reproduce from the seed")
{
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(10, -0.6);
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(10, 0.5);
    const auto a = sample_parameters(200, lo, hi, 7);
    const auto b = sample_parameters(200, lo, hi, 7);
    const auto c = sample_parameters(200, lo, hi, 8);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a.minCoeff() >= -0.6);
    CHECK(a.maxCoeff() <= 0.5);
    // Mean of 200 uniforms lies within three standard errors of the centre.
    const double bound = 3.0 * 1.1 / std::sqrt(12.0 * 200.0);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        CHECK(std::abs(a.col(j).mean() + 0.05) < bound);
    }
    CHECK_THROWS_AS(sample_parameters(0, lo, hi, 1), rh::ArgumentError);
    CHECK_THROWS_AS(sample_parameters(5, hi, lo, 1), rh::ArgumentError);
}

TEST_CASE("ITTC-57 friction line")
{
    CHECK(std::abs(ittc57_cf(1e7) - 0.003) < 1e-12);
    CHECK(std::abs(ittc57_cf(1e12) - 7.5e-4) < 1e-12);
    CHECK_THROWS_AS(ittc57_cf(100.0), rh::DomainError);
    CHECK_THROWS_AS(ittc57_cf(-5.0), rh::DomainError);
}

TEST_CASE("analytic-ridge campaign records the exact resistance")
{
    auto config = small_config(30);
    config.volume_mode = "ridge";
    AnalyticRidgeSurrogate surrogate(config);
    const auto result = run_campaign(config, surrogate, builtin_hull());
    REQUIRE(result.records.size() == 30);
    CHECK(result.failures == 0);
    for (const auto& r : result.records) {
        CHECK(r.ok);
        CHECK(std::abs(r.resistance - surrogate.exact_resistance(r.mu_raw)) < 1e-6);
        CHECK(std::abs(r.volume - surrogate.exact_volume(r.mu_raw)) < 1e-15);
        CHECK(r.dmd_rank >= 1);
    }
}

TEST_CASE("mesh volumes follow the deformed hull")
{
    auto config = small_config(6);
    const auto hull = builtin_hull();
    const auto lattice = config.make_lattice();
    const std::vector<double> zero(config.parameter_count(), 0.0);
    const double reference = rh::geometry::volume_below_plane(hull, config.z_cut);
    CHECK(std::abs(rh::geometry::volume_below_plane(rh::geometry::deform_mesh(lattice, zero, hull), config.z_cut) -
                   reference) < 1e-12);

    const auto result = run_campaign(config);
    for (const auto& r : result.records) {
        REQUIRE(r.ok);
        const std::vector<double> mu(r.mu_raw.data(), r.mu_raw.data() + r.mu_raw.size());
        const double expected =
            rh::geometry::volume_below_plane(rh::geometry::deform_mesh(lattice, mu, hull), config.z_cut);
        CHECK(std::abs(r.volume - expected) < 1e-12);
        // Lattice displacements are a fraction of the hull, so volumes stay close.
        CHECK(std::abs(r.volume - reference) < 0.5 * reference);
    }
}

TEST_CASE("campaign output is independent of thread count and repeat runs")
{
    auto config = small_config(24);
    const auto one = records_text(run_campaign(config).records);
    CHECK(one == records_text(run_campaign(config).records));
    config.threads = 4;
    CHECK(one == records_text(run_campaign(config).records));
    config.seed = 2;
    CHECK(one != records_text(run_campaign(config).records));
}

TEST_CASE("file surrogate tolerates a bounded number of failures")
{
    const auto dir = scratch_dir("files");
    auto config = small_config(10);
    config.surrogate = "file";
    const auto faces = static_cast<Eigen::Index>(builtin_hull().faces.size());
    rh::dmd::SnapshotSet set;
    set.dt = config.dt;
    set.t0 = config.t_start;
    set.data.resize(faces, 81);
    for (Eigen::Index k = 0; k < 81; ++k) {
        set.data.col(k) = Eigen::VectorXd::Constant(faces, 100.0 * (1.0 + std::exp(-0.5 * k)));
    }
    fs::create_directories(dir / "snapshots");
    for (int i = 0; i < 10; ++i) {
        if (i != 3) {
            rh::dmd::save_snapshots(set, dir / "snapshots" / ("sample_" + std::to_string(i) + ".txt"));
        }
    }
    const auto result = run_campaign(config, dir);
    CHECK(result.failures == 1);
    CHECK_FALSE(result.records[3].ok);
    CHECK(result.records[3].failure.find("sample_3") != std::string::npos);
    for (const auto& r : result.records) {
        if (r.ok) {
            CHECK(std::isfinite(r.resistance));
            // A uniform pressure field integrates to zero drag on a closed hull.
            const double viscous = 0.5 * config.density * config.speed * config.speed * config.wetted_surface *
                                   ittc57_cf(config.reynolds);
            CHECK(std::abs(r.resistance - viscous) < 1e-6 * viscous);
        }
    }
    // A failed row round-trips with its reason and empty quantity cells.
    const auto text = records_text(result.records);
    std::istringstream in(text);
    const auto back = read_records_csv(in);
    CHECK_FALSE(back[3].ok);
    CHECK(back[3].failure == result.records[3].failure);

    fs::remove(dir / "snapshots" / "sample_5.txt");
    fs::remove(dir / "snapshots" / "sample_7.txt");
    CHECK_THROWS_AS(run_campaign(config, dir), rh::NumericError);
    fs::remove_all(dir);
}

TEST_CASE("single-quantity optimization finds a quadratic minimum")
{
    auto config = small_config(60);
    config.lattice.bindings.resize(3);
    config.shared_volume = false;
    config.band_mode = "none";
    config.active_dim = 3;
    Eigen::Matrix3d H;
    H << 4.0, 1.0, 0.5, 1.0, 3.0, -0.4, 0.5, -0.4, 2.0;
    const Eigen::Vector3d x_star(0.2, -0.3, 0.1);
    QuadraticSurrogate surrogate(config, H, x_star);
    const auto result = run_campaign(config, surrogate, builtin_hull());
    const auto report = optimize_reduced(result.records, config, &surrogate);
    CHECK(report.feasible.size() == 60);
    CHECK((report.minimizer_scaled - x_star).norm() < 1e-6);
    CHECK(std::abs(report.predicted_resistance - 3.0) < 1e-6);
    CHECK(report.preimage_residual.norm() < 1e-6);
    // The reduced basis is orthonormal and square here.
    CHECK((report.Q.transpose() * report.Q - Eigen::Matrix3d::Identity()).norm() < 1e-10);
}

TEST_CASE("shared-volume optimization report is consistent")
{
    auto config = small_config(200);
    config.volume_mode = "ridge";
    config.gradient_method = "exact-callback";
    AnalyticRidgeSurrogate surrogate(config);
    const auto result = run_campaign(config, surrogate, builtin_hull());
    const auto report = optimize_reduced(result.records, config, &surrogate);
    check_references(report, result.records);
    CHECK(report.used.size() == 200);
    CHECK(report.volume_as.has_value());
    CHECK(report.Q.cols() == 2);
    // Q reproduces both active bases: W1_i^T Q = I.
    CHECK((report.resistance_as.W1().transpose() * report.Q - Eigen::Matrix2d::Identity()).norm() < 1e-8);
    CHECK((report.volume_as->W1().transpose() * report.Q - Eigen::Matrix2d::Identity()).norm() < 1e-8);
    CHECK(report.region.contains(report.minimizer_reduced, 1e-12));
    CHECK(report.minimizer_scaled.cwiseAbs().maxCoeff() <= 1.0);
    for (auto i : report.feasible) {
        const double v = result.records[i].volume;
        CHECK(v >= report.band_lower);
        CHECK(v <= report.band_upper);
    }
    REQUIRE(report.volume_within_band.has_value());
    CHECK(*report.volume_within_band);

    // Summary files carry one row per used record.
    const auto dir = scratch_dir("summary");
    write_summary_files(report, result.records, dir);
    for (const char* name : {"summary_resistance.csv", "summary_volume.csv", "summary_resistance_active.csv",
                             "summary_volume_active.csv"}) {
        std::ifstream in(dir / name);
        REQUIRE(in);
        int lines = 0;
        for (std::string line; std::getline(in, line);) {
            ++lines;
        }
        CHECK(lines == 201);
    }
    fs::remove_all(dir);

    // Report survives a JSON round trip and references stay valid.
    const auto back = report_from_json(to_json(report));
    CHECK(back.used == report.used);
    CHECK(back.feasible == report.feasible);
    CHECK((back.minimizer_scaled - report.minimizer_scaled).norm() == 0.0);
    CHECK(to_json(back).dump() == to_json(report).dump());

    auto broken = report;
    broken.feasible.push_back(9999);
    CHECK_THROWS_AS(check_references(broken, result.records), rh::ArgumentError);
}

TEST_CASE("empty feasible band is an error")
{
    auto config = small_config(40);
    config.volume_mode = "ridge";
    config.band_mode = "absolute";
    config.band_lower = 50.0;
    config.band_upper = 60.0;
    AnalyticRidgeSurrogate surrogate(config);
    const auto result = run_campaign(config, surrogate, builtin_hull());
    CHECK_THROWS_AS(optimize_reduced(result.records, config, &surrogate), rh::EmptyFeasibleSetError);
}

TEST_CASE("percentile bands interpolate order statistics")
{
    CampaignConfig c;
    Eigen::VectorXd v(5);
    v << 5, 1, 4, 2, 3;
    c.band_lower = 25.0;
    c.band_upper = 60.0;
    const auto band = resolve_band(c, v);
    CHECK(std::abs(band.lower - 2.0) < 1e-15);
    CHECK(std::abs(band.upper - 3.4) < 1e-12);
    c.band_mode = "none";
    CHECK(std::isinf(resolve_band(c, v).lower));
    c.band_mode = "absolute";
    CHECK(resolve_band(c, v).upper == 60.0);
}

TEST_CASE("records round trip and report malformed lines")
{
    auto config = small_config(8);
    const auto records = run_campaign(config).records;
    std::istringstream in(records_text(records));
    const auto back = read_records_csv(in);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].index == records[i].index);
        CHECK((back[i].mu_raw - records[i].mu_raw).norm() < 1e-12);
        CHECK((back[i].mu_scaled - records[i].mu_scaled).norm() < 1e-12);
        CHECK(std::abs(back[i].resistance - records[i].resistance) < 1e-12);
        CHECK(std::abs(back[i].volume - records[i].volume) < 1e-12);
        CHECK(back[i].dmd_rank == records[i].dmd_rank);
    }

    std::string text = records_text(records);
    text = text.substr(0, text.size() - 20); // cut the last row short
    std::istringstream truncated(text);
    try {
        read_records_csv(truncated, "cut.csv");
        FAIL("expected a parse error");
    } catch (const rh::ParseError& e) {
        CHECK(e.line() == 9);
        CHECK(std::string(e.what()).find("cut.csv:9") != std::string::npos);
    }

    std::istringstream bad_status("index,status,mu1,x1,resistance,volume,dmd_rank,spectral_radius,failure\n"
                                  "0,maybe,0,0,1,1,1,1,\n");
    CHECK_THROWS_AS(read_records_csv(bad_status), rh::ParseError);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_records_csv(empty), rh::ParseError);
}

TEST_CASE("config JSON round trip and validation")
{
    CampaignConfig c;
    c.samples = 17;
    c.band_mode = "absolute";
    c.lattice.bindings.resize(4);
    const auto back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.parameter_count() == 4);

    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"sample", 3}}), rh::ParseError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"samples", "many"}}), rh::ParseError);
    CHECK(config_from_json(nlohmann::json::object()).samples == 200);

    auto bad = c;
    bad.t_end = 15.05;
    CHECK_THROWS_AS(bad.validate(), rh::ArgumentError);
    bad = c;
    bad.band_mode = "loose";
    CHECK_THROWS_AS(bad.validate(), rh::ArgumentError);
    bad = c;
    bad.active_dim = 11;
    CHECK_THROWS_AS(bad.validate(), rh::ArgumentError);
    bad = c;
    bad.dmd_rank = "sometimes";
    CHECK_THROWS(bad.validate());

    const auto dir = scratch_dir("config");
    save_config(c, dir / "c.json");
    CHECK(to_json(load_config(dir / "c.json")) == to_json(c));
    CHECK_THROWS_AS(load_config(dir / "missing.json"), rh::IoError);
    fs::remove_all(dir);
}

TEST_CASE("seed from the environment")
{
    ::unsetenv("RH_SEED");
    CHECK(seed_from_environment(5) == 5);
    ::setenv("RH_SEED", "1234", 1);
    CHECK(seed_from_environment(5) == 1234);
    ::setenv("RH_SEED", "12x", 1);
    CHECK_THROWS_AS(seed_from_environment(5), rh::ArgumentError);
    ::unsetenv("RH_SEED");
}

TEST_CASE("dt mismatch and bad snapshot windows fail the sample")
{
    auto config = small_config(3);
    config.volume_mode = "ridge";
    auto other = config;
    other.dt = 0.2;
    other.max_failure_fraction = 1.0;
    const auto result = run_campaign(other, AnalyticRidgeSurrogate(config), builtin_hull());
    CHECK(result.failures == 3);
    CHECK(result.records[0].failure.find("dt") != std::string::npos);
}
