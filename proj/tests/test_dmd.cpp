#include "rh/diagnostics.hpp"
#include "rh/dmd.hpp"
#include "rh/errors.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace rh::dmd;
using rh::test::eigenvalue_set_distance;
using rh::test::to_vector;
using rh::test::trajectory;

namespace {

SnapshotSet make_set(const Eigen::MatrixXd& X, double dt = 1.0, double t0 = 0.0)
{
    return SnapshotSet{X, dt, t0};
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

} // namespace

TEST_CASE("diagonal system eigenvalues")
{
    Eigen::MatrixXd A = Eigen::Vector2d(0.9, 0.5).asDiagonal();
    const auto X = trajectory(A, Eigen::Vector2d(1, 1), 10);
    const auto model = fit(make_set(X), RankPolicy::fixed(2));
    REQUIRE(model.rank == 2);
    CHECK(eigenvalue_set_distance(to_vector(model.eigenvalues), {0.9, 0.5}) < 1e-10);
    // Sorted by modulus.
    CHECK(model.eigenvalues(0).real() == doctest::Approx(0.9));
}

TEST_CASE("constant snapshots give a single unit mode")
{
    Eigen::MatrixXd X = Eigen::Vector3d(2.0, -1.0, 0.5).replicate(1, 6);
    const auto model = fit(make_set(X));
    REQUIRE(model.rank == 1);
    CHECK(std::abs(model.eigenvalues(0) - Complex(1.0, 0.0)) < 1e-12);

    rh::ScopedWarningCapture capture;
    const auto forced = fit(make_set(X), RankPolicy::fixed(3));
    CHECK(forced.rank == 1);
    CHECK(capture.contains("rank reduced"));
}

TEST_CASE("rotation eigenvalues on the unit circle")
{
    const double theta = 0.1;
    Eigen::Matrix2d R;
    R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    const auto X = trajectory(R, Eigen::Vector2d(1.0, 0.3), 12);
    const auto model = fit(make_set(X), RankPolicy::fixed(2));
    const std::vector<Complex> oracle = {std::polar(1.0, theta), std::polar(1.0, -theta)};
    CHECK(eigenvalue_set_distance(to_vector(model.eigenvalues), oracle) < 1e-10);
    CHECK(model.eigenvalues(0).imag() > 0.0);
}

TEST_CASE("fit argument errors")
{
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 5);
    CHECK_THROWS_AS(fit(make_set(X), RankPolicy::fixed(4)), rh::ArgumentError);
    CHECK_THROWS_AS(fit(make_set(X), RankPolicy::fixed(0)), rh::ArgumentError);
    CHECK_THROWS_AS(fit(make_set(X), RankPolicy::energy_fraction(1.5)), rh::ArgumentError);
    CHECK_THROWS_AS(fit(make_set(X.leftCols(1))), rh::ArgumentError);
    CHECK_THROWS_AS(fit(make_set(X, 0.0)), rh::ArgumentError);
    CHECK_THROWS_AS(fit(make_set(Eigen::MatrixXd::Zero(3, 5))), rh::NumericError);
}

TEST_CASE("rank policy parsing")
{
    CHECK(RankPolicy::parse("4").kind == RankPolicy::Kind::Fixed);
    CHECK(RankPolicy::parse("4").rank == 4);
    CHECK(RankPolicy::parse("energy:0.99").energy == doctest::Approx(0.99));
    CHECK(RankPolicy::parse(RankPolicy::energy_fraction(0.9999).to_string()).energy == 0.9999);
    CHECK_THROWS_AS(RankPolicy::parse("four"), rh::ArgumentError);
}

TEST_CASE("reconstruction of exact low-rank linear data")
{
    // Rank-2 dynamics embedded in 6 dimensions.
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd basis = rh::test::random_matrix(6, 2, rng);
    Eigen::Matrix2d core;
    core << 0.8, 0.3, -0.2, 0.7;
    Eigen::MatrixXd X(6, 15);
    Eigen::Vector2d z(1.0, -0.5);
    for (int k = 0; k < 15; ++k) {
        X.col(k) = basis * z;
        z = core * z;
    }
    const auto model = fit(make_set(X));
    REQUIRE(model.rank == 2);
    CHECK(relative_error(reconstruct(model, 0), X.col(0)) < 1e-12);
    for (int k = 0; k < 15; ++k) {
        CHECK(relative_error(reconstruct(model, k), X.col(k)) < 1e-8);
        const auto full = reconstruct_complex(model, k);
        CHECK(full.imag().norm() < 1e-10 * full.real().norm());
    }
}

TEST_CASE("random stable systems: spectral containment and exactness")
{
    for (unsigned seed = 1; seed <= 10; ++seed) {
        const auto A = rh::test::random_stable_system(seed);
        std::mt19937_64 rng(seed + 100);
        const Eigen::VectorXd x0 = rh::test::random_matrix(5, 1, rng);
        const auto X = trajectory(A, x0, 30);
        const auto model = fit(make_set(X, 0.1, 2.0), RankPolicy::fixed(5));
        REQUIRE(model.rank == 5);
        Eigen::EigenSolver<Eigen::MatrixXd> oracle(A);
        CHECK(eigenvalue_set_distance(to_vector(model.eigenvalues), to_vector(oracle.eigenvalues())) <
              1e-8);
        for (int k = 0; k < 30; ++k) {
            CHECK(relative_error(reconstruct(model, k), X.col(k)) < 1e-8);
        }
        // One step of the expansion multiplies each term by its eigenvalue.
        for (long k : {0L, 3L, 11L}) {
            Eigen::VectorXcd stepped = Eigen::VectorXcd::Zero(5);
            for (int j = 0; j < model.rank; ++j) {
                stepped += model.modes.col(j) * model.amplitudes(j) *
                           std::pow(model.eigenvalues(j), static_cast<int>(k)) * model.eigenvalues(j);
            }
            CHECK((reconstruct_complex(model, k + 1) - stepped).norm() <= 1e-10 * stepped.norm());
        }
    }
}

TEST_CASE("forecast")
{
    const Eigen::Vector3d v(1.0, -2.0, 0.5);
    Eigen::MatrixXd X(3, 8);
    for (int k = 0; k < 8; ++k) {
        X.col(k) = std::pow(0.5, k) * v;
    }
    const auto model = fit(make_set(X, 0.1, 7.0));
    CHECK(relative_error(forecast(model, 7.0), v) < 1e-12);
    CHECK(relative_error(forecast(model, 7.0 + 10 * 0.1), std::pow(0.5, 10) * v) < 1e-8);
    CHECK_THROWS_AS(forecast(model, 6.9), rh::ArgumentError);

    Eigen::MatrixXd C = v.replicate(1, 5);
    const auto unit = fit(make_set(C, 0.1, 7.0));
    CHECK(relative_error(forecast(unit, 7.05), v) < 1e-12);
    for (long k : {0L, 1L, 50L, 1000L}) {
        CHECK(relative_error(reconstruct(unit, k), v) < 1e-12);
    }
}

TEST_CASE("steady state extraction")
{
    const Eigen::Vector3d u(1.0, 2.0, 3.0);
    const Eigen::Vector3d w(0.5, -1.0, 2.0);
    Eigen::MatrixXd X(3, 12);
    for (int k = 0; k < 12; ++k) {
        X.col(k) = u + std::pow(0.5, k) * w;
    }
    const auto model = fit(make_set(X), RankPolicy::fixed(2));
    const auto steady = steady_state(model);
    // lim_k (u + 0.5^k w) = u.
    CHECK((steady.state - u).norm() < 1e-8);
    CHECK(steady.steady_eigenvalues.size() == 1);

    Eigen::MatrixXd decay(3, 10);
    for (int k = 0; k < 10; ++k) {
        decay.col(k) = std::pow(0.6, k) * u + std::pow(0.3, k) * w;
    }
    const auto zero = steady_state(fit(make_set(decay), RankPolicy::fixed(2)));
    CHECK(zero.state.norm() < 1e-12);
    CHECK(zero.steady_eigenvalues.empty());

    Eigen::MatrixXd grow(3, 10);
    for (int k = 0; k < 10; ++k) {
        grow.col(k) = u + std::pow(1.2, k) * w;
    }
    const auto unstable = fit(make_set(grow), RankPolicy::fixed(2));
    CHECK_THROWS_AS(steady_state(unstable), rh::UnstableModelError);
    try {
        steady_state(unstable);
    } catch (const rh::UnstableModelError& e) {
        CHECK(std::string(e.what()).find("1.2") != std::string::npos);
    }
    CHECK_THROWS_AS(steady_state(model, 0.0), rh::ArgumentError);
}

TEST_CASE("time window selection")
{
    SnapshotSet set{Eigen::MatrixXd::Random(2, 151), 0.1, 0.0};
    const auto w = time_window(set, 7.0, 15.0);
    CHECK(w.count() == 81);
    CHECK(w.t0 == doctest::Approx(7.0));
    CHECK(w.t_end() == doctest::Approx(15.0));
    CHECK(w.data.col(0) == set.data.col(70));
    CHECK_THROWS_AS(time_window(set, 20.0, 30.0), rh::ArgumentError);
}

TEST_CASE("snapshot and model files")
{
    SnapshotSet set{Eigen::MatrixXd::Random(4, 9), 0.1, 7.0};
    std::stringstream text;
    write_snapshot_text(text, set);
    const auto back = read_snapshot_text(text);
    CHECK(back.data == set.data);
    CHECK(back.dt == set.dt);
    CHECK(back.t0 == set.t0);

    std::stringstream bin;
    write_snapshot_binary(bin, set);
    const auto back_bin = read_snapshot_binary(bin);
    CHECK(back_bin.data == set.data);
    CHECK(back_bin.t0 == 7.0);

    std::istringstream ragged("1 2 3\n4 5\n");
    try {
        read_snapshot_text(ragged, "ragged.txt");
        FAIL("expected parse error");
    } catch (const rh::ParseError& e) {
        CHECK(e.line() == 2);
    }
    std::istringstream short_bin(std::string(10, '\0'));
    CHECK_THROWS_AS(read_snapshot_binary(short_bin), rh::ParseError);

    const auto model = fit(set, RankPolicy::fixed(3));
    const auto path = std::filesystem::temp_directory_path() / "rh_test_model.json";
    save_model(model, path);
    const auto loaded = load_model(path);
    CHECK(loaded.rank == model.rank);
    CHECK(loaded.modes == model.modes);
    CHECK(loaded.eigenvalues == model.eigenvalues);
    CHECK(loaded.amplitudes == model.amplitudes);
    CHECK(reconstruct(loaded, 4) == reconstruct(model, 4));
    std::filesystem::remove(path);

    CHECK_THROWS_AS(model_from_json(nlohmann::json{{"rank", 2}}), rh::ParseError);
}
