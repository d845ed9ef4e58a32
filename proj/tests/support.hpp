#pragma once

// Test-only generators and oracles. Nothing here calls into the code under
// test except to build inputs.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <random>
#include <vector>

namespace rh::test {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = g(rng);
        }
    }
    return m;
}

// Real 5x5 operator V D V^-1 with one complex pair and three real
// eigenvalues, all of modulus in [0.5, 0.95] and mutually separated.
inline Eigen::MatrixXd random_stable_system(unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(5, 5);
    const double rho = 0.75 + 0.2 * u(rng);
    const double theta = 0.3 + 0.5 * u(rng);
    D(0, 0) = rho * std::cos(theta);
    D(0, 1) = -rho * std::sin(theta);
    D(1, 0) = rho * std::sin(theta);
    D(1, 1) = rho * std::cos(theta);
    const double base = 0.5 + 0.05 * u(rng);
    D(2, 2) = base;
    D(3, 3) = -(base + 0.12 + 0.05 * u(rng));
    D(4, 4) = base + 0.3 + 0.05 * u(rng);
    const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(5, 5) + 0.3 * random_matrix(5, 5, rng);
    return V * D * V.inverse();
}

// Trajectory x_{k+1} = A x_k, stored column-wise.
inline Eigen::MatrixXd trajectory(const Eigen::MatrixXd& A, const Eigen::VectorXd& x0, int count)
{
    Eigen::MatrixXd X(A.rows(), count);
    X.col(0) = x0;
    for (int k = 1; k < count; ++k) {
        X.col(k) = A * X.col(k - 1);
    }
    return X;
}

// Largest distance from a value in `found` to its nearest value in
// `expected`, after a one-to-one greedy matching.
inline double eigenvalue_set_distance(std::vector<std::complex<double>> found,
                                      std::vector<std::complex<double>> expected)
{
    if (found.size() != expected.size()) {
        return 1e300;
    }
    double worst = 0.0;
    for (const auto& f : found) {
        auto best = std::min_element(expected.begin(), expected.end(), [&](auto a, auto b) {
            return std::abs(a - f) < std::abs(b - f);
        });
        worst = std::max(worst, std::abs(*best - f));
        expected.erase(best);
    }
    return worst;
}

inline std::vector<std::complex<double>> to_vector(const Eigen::VectorXcd& v)
{
    return {v.data(), v.data() + v.size()};
}

inline double principal_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    const double d = a.normalized().dot(b.normalized());
    const double s = (a.normalized() - d * b.normalized()).norm();
    return std::atan2(s, std::abs(d));
}

} // namespace rh::test
