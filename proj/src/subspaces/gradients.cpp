#include "rh/diagnostics.hpp"
#include "rh/errors.hpp"
#include "rh/subspaces.hpp"

#include <algorithm>
#include <numeric>

namespace rh::subspaces {

namespace {

// Slope of the least-squares affine model y ~ c + g^T (x - center). Returns
// false when the design is rank deficient (the slope is then minimal-norm).
bool affine_slope(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& center,
                  Eigen::VectorXd& slope)
{
    const Eigen::Index k = X.rows();
    const Eigen::Index m = X.cols();
    Eigen::MatrixXd design(k, m + 1);
    design.col(0).setOnes();
    design.rightCols(m) = X.rowwise() - center.transpose();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    slope = cod.solve(y).tail(m);
    return cod.rank() == m + 1;
}

} // namespace

GradientMethod GradientOptions::parse_method(const std::string& name)
{
    if (name == "exact" || name == "exact-callback") {
        return GradientMethod::ExactCallback;
    }
    if (name == "local-linear") {
        return GradientMethod::LocalLinear;
    }
    if (name == "global-linear") {
        return GradientMethod::GlobalLinear;
    }
    throw ArgumentError("unknown gradient method '" + name +
                        "' (expected exact, local-linear or global-linear)");
}

std::string to_string(GradientMethod method)
{
    switch (method) {
    case GradientMethod::ExactCallback:
        return "exact";
    case GradientMethod::LocalLinear:
        return "local-linear";
    case GradientMethod::GlobalLinear:
        return "global-linear";
    }
    return "unknown";
}

Eigen::MatrixXd estimate_gradients(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& values,
                                   const GradientOptions& options)
{
    const Eigen::Index N = inputs.rows();
    const Eigen::Index m = inputs.cols();
    if (N < 1 || m < 1) {
        throw ArgumentError("estimate_gradients: no samples");
    }
    if (values.size() != N) {
        throw ArgumentError("estimate_gradients: values and inputs disagree in length");
    }
    Eigen::MatrixXd gradients(N, m);

    switch (options.method) {
    case GradientMethod::ExactCallback: {
        if (!options.callback) {
            throw ArgumentError("exact gradient method needs a gradient callback");
        }
        for (Eigen::Index i = 0; i < N; ++i) {
            const Eigen::VectorXd g = options.callback(inputs.row(i).transpose());
            if (g.size() != m) {
                throw ArgumentError("gradient callback returned a vector of wrong length");
            }
            gradients.row(i) = g.transpose();
        }
        break;
    }
    case GradientMethod::GlobalLinear: {
        Eigen::VectorXd slope;
        if (!affine_slope(inputs, values, Eigen::VectorXd::Zero(m), slope)) {
            warn("global-linear gradient: rank-deficient design, using minimal-norm slope");
        }
        gradients = slope.transpose().replicate(N, 1);
        break;
    }
    case GradientMethod::LocalLinear: {
        const int k = options.neighbors > 0 ? options.neighbors : static_cast<int>(2 * m + 1);
        if (k < m + 1) {
            throw ArgumentError("local-linear gradients need at least m+1 = " + std::to_string(m + 1) +
                                " neighbours, got " + std::to_string(k));
        }
        if (k > N) {
            throw ArgumentError("local-linear gradients need " + std::to_string(k) +
                                " neighbours but only " + std::to_string(N) + " samples exist");
        }
        std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
        std::vector<double> dist(static_cast<std::size_t>(N));
        Eigen::MatrixXd X(k, m);
        Eigen::VectorXd y(k);
        std::size_t deficient = 0;
        for (Eigen::Index i = 0; i < N; ++i) {
            for (Eigen::Index j = 0; j < N; ++j) {
                dist[static_cast<std::size_t>(j)] = (inputs.row(j) - inputs.row(i)).squaredNorm();
            }
            std::iota(order.begin(), order.end(), Eigen::Index{0});
            std::partial_sort(order.begin(), order.begin() + k, order.end(),
                              [&](Eigen::Index a, Eigen::Index b) {
                                  const auto da = dist[static_cast<std::size_t>(a)];
                                  const auto db = dist[static_cast<std::size_t>(b)];
                                  return da != db ? da < db : a < b;
                              });
            for (int r = 0; r < k; ++r) {
                X.row(r) = inputs.row(order[static_cast<std::size_t>(r)]);
                y(r) = values(order[static_cast<std::size_t>(r)]);
            }
            Eigen::VectorXd slope;
            if (!affine_slope(X, y, inputs.row(i).transpose(), slope)) {
                ++deficient;
            }
            gradients.row(i) = slope.transpose();
        }
        if (deficient > 0) {
            warn("local-linear gradient: " + std::to_string(deficient) +
                 " rank-deficient neighbourhoods, using minimal-norm slopes");
        }
        break;
    }
    }
    return gradients;
}

} // namespace rh::subspaces
