#include "rh/diagnostics.hpp"
#include "rh/errors.hpp"
#include "rh/response.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

using namespace rh::response;

namespace {

PolynomialSurface make_surface(int dim, int degree, Eigen::VectorXd coefficients)
{
    PolynomialSurface s;
    s.dim = dim;
    s.degree = degree;
    s.coefficients = std::move(coefficients);
    return s;
}

// Brute-force minimum of a 2D surface over an n-per-axis grid.
Minimum grid_minimum(const PolynomialSurface& s, const Box& box, int n)
{
    Minimum best{Eigen::Vector2d::Zero(), std::numeric_limits<double>::infinity()};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Eigen::Vector2d y(box.lower(0) + (box.upper(0) - box.lower(0)) * i / (n - 1),
                                    box.lower(1) + (box.upper(1) - box.lower(1)) * j / (n - 1));
            // Explicit quadratic, independent of the library's monomial code.
            const auto& c = s.coefficients;
            const double v = c(0) + c(1) * y(0) + c(2) * y(1) + c(3) * y(0) * y(0) + c(4) * y(0) * y(1) +
                             c(5) * y(1) * y(1);
            if (v < best.value) {
                best = {y, v};
            }
        }
    }
    return best;
}

Box unit_box(int M, double lo = -1.0, double hi = 1.0)
{
    return Box{Eigen::VectorXd::Constant(M, lo), Eigen::VectorXd::Constant(M, hi)};
}

} // namespace

TEST_CASE("fit reproduces simple polynomials")
{
    Eigen::VectorXd x(5);
    x << -2, -1, 0, 1, 2.5;
    const auto affine = fit_polynomial(x, (3.0 + 2.0 * x.array()).matrix(), 1);
    CHECK(std::abs(affine.coefficients(0) - 3.0) < 1e-12);
    CHECK(std::abs(affine.coefficients(1) - 2.0) < 1e-12);

    const auto square = fit_polynomial(x, x.array().square().matrix(), 2);
    REQUIRE(square.coefficients.size() == 3);
    CHECK((square.coefficients - Eigen::Vector3d(0, 0, 1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(square.rmse < 1e-12);
}

TEST_CASE("coefficient layout and counts")
{
    CHECK(PolynomialSurface::coefficient_count(1, 1) == 2);
    CHECK(PolynomialSurface::coefficient_count(2, 2) == 6);
    CHECK(PolynomialSurface::coefficient_count(10, 2) == 66);
    CHECK_THROWS_AS(PolynomialSurface::coefficient_count(2, 3), rh::ArgumentError);
    const auto m = monomials(2, 2, Eigen::Vector2d(2.0, 3.0));
    Eigen::VectorXd expected(6);
    expected << 1, 2, 3, 4, 6, 9;
    CHECK(m == expected);
}

TEST_CASE("exact reproduction of random polynomial data")
{
    std::mt19937_64 rng(31);
    for (int M = 1; M <= 4; ++M) {
        for (int degree : {1, 2}) {
            const auto P = PolynomialSurface::coefficient_count(M, degree);
            const Eigen::VectorXd truth = rh::test::random_matrix(P, 1, rng);
            const Eigen::MatrixXd X = rh::test::random_matrix(P + 12, M, rng);
            Eigen::VectorXd f(X.rows());
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                // Independent expansion of the generating polynomial.
                const Eigen::VectorXd y = X.row(i).transpose();
                double v = truth(0) + truth.segment(1, M).dot(y);
                if (degree == 2) {
                    Eigen::Index k = 1 + M;
                    for (int a = 0; a < M; ++a) {
                        for (int b = a; b < M; ++b) {
                            v += truth(k++) * y(a) * y(b);
                        }
                    }
                }
                f(i) = v;
            }
            const auto s = fit_polynomial(X, f, degree);
            CHECK((s.coefficients - truth).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, truth.cwiseAbs().maxCoeff()));
            CHECK(s.rmse < 1e-10);
            CHECK(rmse_against(s, X, f) < 1e-10);
            CHECK(std::isfinite(s.condition));
        }
    }
}

TEST_CASE("fit errors and rank deficiency")
{
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 2);
    CHECK_THROWS_AS(fit_polynomial(X, Eigen::VectorXd::Zero(5), 2), rh::ArgumentError);
    CHECK_THROWS_AS(fit_polynomial(X, Eigen::VectorXd::Zero(4), 1), rh::ArgumentError);

    // Every point on the line y2 = y1: the design cannot separate y1 from y2.
    Eigen::MatrixXd line(8, 2);
    line.col(0) = Eigen::VectorXd::LinSpaced(8, -1, 1);
    line.col(1) = line.col(0);
    rh::ScopedWarningCapture capture;
    const auto s = fit_polynomial(line, (2.0 * line.col(0)).eval(), 1);
    CHECK(capture.contains("rank-deficient"));
    CHECK(std::abs(s.coefficients(1) - 1.0) < 1e-10);
    CHECK(std::abs(s.coefficients(2) - 1.0) < 1e-10);
}

TEST_CASE("evaluate and rmse")
{
    const auto c = make_surface(3, 2, (Eigen::VectorXd(10) << 4.5, 0, 0, 0, 0, 0, 0, 0, 0, 0).finished());
    CHECK(evaluate(c, Eigen::Vector3d(7, -2, 1e3)) == 4.5);
    const auto zero = make_surface(1, 1, Eigen::Vector2d::Zero());
    CHECK(rmse_against(zero, Eigen::Vector2d(0, 1), Eigen::Vector2d(3, 4)) == doctest::Approx(std::sqrt(12.5)));
    CHECK_THROWS_AS(evaluate(c, Eigen::Vector2d(1, 1)), rh::ArgumentError);
}

TEST_CASE("feasible band filtering")
{
    const Eigen::Vector3d v(1, 2, 3);
    CHECK(filter_feasible(v, {1.5, 2.5}) == std::vector<std::size_t>{1});
    CHECK(filter_feasible(v, {}) == std::vector<std::size_t>{0, 1, 2});
    CHECK(filter_feasible(v, {1.0, 3.0}).size() == 3);
    CHECK_THROWS_AS(filter_feasible(v, {10, 20}), rh::EmptyFeasibleSetError);
    CHECK_THROWS_AS(filter_feasible(v, {3, 1}), rh::ArgumentError);
}

TEST_CASE("one-dimensional minima")
{
    // (y - 1)^2 = 1 - 2y + y^2
    const auto bowl = make_surface(1, 2, Eigen::Vector3d(1, -2, 1));
    const auto m1 = minimize_surface(bowl, unit_box(1, -3, 3));
    CHECK(std::abs(m1.point(0) - 1.0) < 1e-12);
    CHECK(std::abs(m1.value) < 1e-12);

    const auto cap = make_surface(1, 2, Eigen::Vector3d(0, 0, -1));
    const auto m2 = minimize_surface(cap, unit_box(1, -1, 2));
    CHECK(m2.point(0) == 2.0);
    CHECK(m2.value == -4.0);

    const auto line = make_surface(2, 1, Eigen::Vector3d(1, 2, -3));
    const auto m3 = minimize_surface(line, unit_box(2));
    CHECK(m3.point == Eigen::Vector2d(-1, 1));
    CHECK(m3.value == -4.0);

    Box open = unit_box(1);
    open.upper(0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(minimize_surface(bowl, open), rh::ArgumentError);
}

TEST_CASE("constrained 2D minimum matches a 1001x1001 grid")
{
    // Hessian [[2, 0.5], [0.5, 1]], stationary point (0.3, -0.2).
    const Eigen::Matrix2d H{{2.0, 0.5}, {0.5, 1.0}};
    const Eigen::Vector2d ys(0.3, -0.2);
    const Eigen::Vector2d g = -H * ys;
    Eigen::VectorXd c(6);
    c << 0.7, g(0), g(1), 0.5 * H(0, 0), H(0, 1), 0.5 * H(1, 1);
    const auto s = make_surface(2, 2, c);

    const Box inside{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)};
    const auto free = minimize_surface(s, inside);
    CHECK((free.point - ys).norm() < 1e-12);
    CHECK(free.value == doctest::Approx(0.7 - 0.5 * ys.dot(H * ys)));

    const Box excluded{Eigen::Vector2d(0.5, -1), Eigen::Vector2d(1, 1)};
    const auto constrained = minimize_surface(s, excluded);
    const auto oracle = grid_minimum(s, excluded, 1001);
    CHECK((constrained.point - oracle.point).norm() < 1e-6);
    CHECK(std::abs(constrained.value - oracle.value) < 1e-6);
    CHECK(constrained.value <= oracle.value + 1e-9);
    CHECK(excluded.contains(constrained.point));
}

TEST_CASE("minimizer never loses to a test grid")
{
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        // Mix of convex, concave and indefinite quadratics.
        const Eigen::VectorXd c = rh::test::random_matrix(6, 1, rng);
        const auto s = make_surface(2, 2, c);
        Eigen::Vector2d lo(u(rng), u(rng));
        const Eigen::Vector2d hi = lo + Eigen::Vector2d(0.1 + std::abs(u(rng)), 0.1 + std::abs(u(rng)));
        const Box box{lo, hi};
        const auto m = minimize_surface(s, box);
        CHECK(box.contains(m.point));
        CHECK(m.value == doctest::Approx(evaluate(s, m.point)).epsilon(1e-15));
        CHECK(m.value <= grid_minimum(s, box, 301).value + 1e-9);
    }
    for (int M : {3, 5}) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto P = PolynomialSurface::coefficient_count(M, 2);
            const auto s = make_surface(M, 2, rh::test::random_matrix(P, 1, rng));
            const Box box = unit_box(M);
            const auto m = minimize_surface(s, box);
            CHECK(box.contains(m.point));
            double sampled = std::numeric_limits<double>::infinity();
            for (int k = 0; k < 20000; ++k) {
                Eigen::VectorXd y(M);
                for (int i = 0; i < M; ++i) {
                    y(i) = u(rng);
                }
                sampled = std::min(sampled, evaluate(s, y));
            }
            CHECK(m.value <= sampled + 1e-9);
        }
    }
}

TEST_CASE("preimage")
{
    std::mt19937_64 rng(12);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(rh::test::random_matrix(6, 6, rng));
    const Eigen::MatrixXd W = qr.householderQ() * Eigen::MatrixXd::Identity(6, 6);
    const Eigen::MatrixXd W1 = W.leftCols(2);
    const Box box = unit_box(6);

    const Eigen::VectorXd mu = W1 * Eigen::Vector2d(0.2, -0.3);
    const auto p = preimage(W1.transpose() * mu, W1, box);
    CHECK((p.point - mu).norm() < 1e-12);
    CHECK(p.residual.norm() < 1e-12);

    CHECK(preimage(Eigen::Vector2d::Zero(), W1, box).point.norm() == 0.0);

    const auto q = preimage(Eigen::VectorXd::Constant(1, 1.0), Eigen::Vector2d(1, 1), unit_box(2));
    CHECK((q.point - Eigen::Vector2d(0.5, 0.5)).norm() < 1e-15);

    // Far outside the box: clipped, with the residual reported.
    const auto far = preimage(Eigen::VectorXd::Constant(1, 10.0), Eigen::Vector2d(1, 1), unit_box(2));
    CHECK(far.point == Eigen::Vector2d(1, 1));
    CHECK(far.residual(0) == doctest::Approx(-8.0));

    Eigen::MatrixXd deficient(3, 2);
    deficient << 1, 2, 0, 0, 0, 0;
    CHECK_THROWS_AS(preimage(Eigen::Vector2d::Zero(), deficient, unit_box(3)), rh::ArgumentError);
}

TEST_CASE("surface files and summary table")
{
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd X = rh::test::random_matrix(20, 2, rng);
    const auto s = fit_polynomial(X, X.rowwise().squaredNorm(), 2);
    const auto path = std::filesystem::temp_directory_path() / "rh_test_surface.json";
    save_surface(s, path);
    const auto back = load_surface(path);
    CHECK(back.coefficients == s.coefficients);
    CHECK(back.rmse == s.rmse);
    CHECK(back.dim == 2);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(surface_from_json(nlohmann::json{{"dim", 2}, {"degree", 2}, {"coefficients", {1, 2}}, {"rmse", 0}}),
                    rh::ParseError);

    std::ostringstream csv;
    write_summary_csv(csv, X.topRows(2), Eigen::Vector2d(1.5, 2.5), {true, false});
    std::istringstream lines(csv.str());
    std::string header, first, second;
    std::getline(lines, header);
    std::getline(lines, first);
    std::getline(lines, second);
    CHECK(header == "y1,y2,value,feasible");
    CHECK(first.substr(first.size() - 6) == ",1.5,1");
    CHECK(second.substr(second.size() - 6) == ",2.5,0");
}
