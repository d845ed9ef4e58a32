#include "rh/diagnostics.hpp"
#include "rh/errors.hpp"
#include "rh/subspaces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace rh::subspaces {

InputScaler::InputScaler(Eigen::VectorXd lower, Eigen::VectorXd upper)
    : lower_(std::move(lower)), upper_(std::move(upper))
{
    if (lower_.size() != upper_.size() || lower_.size() == 0) {
        throw ArgumentError("scaler bounds must be non-empty and of equal length");
    }
    if (!(lower_.array() < upper_.array()).all()) {
        throw ArgumentError("scaler requires lower < upper in every coordinate");
    }
}

InputScaler InputScaler::uniform(Eigen::Index m, double lower, double upper)
{
    return InputScaler(Eigen::VectorXd::Constant(m, lower), Eigen::VectorXd::Constant(m, upper));
}

Eigen::VectorXd InputScaler::scale(const Eigen::VectorXd& mu) const
{
    if (mu.size() != dim()) {
        throw ArgumentError("scale: vector length " + std::to_string(mu.size()) + ", expected " +
                            std::to_string(dim()));
    }
    Eigen::VectorXd x = mu;
    for (Eigen::Index j = 0; j < dim(); ++j) {
        const double slack = 1e-9 * (upper_(j) - lower_(j));
        if (x(j) < lower_(j) - slack || x(j) > upper_(j) + slack) {
            std::ostringstream msg;
            msg << "scale: coordinate " << j << " = " << x(j) << " clipped to [" << lower_(j) << ", "
                << upper_(j) << "]";
            warn(msg.str());
        }
        x(j) = std::clamp(x(j), lower_(j), upper_(j));
    }
    return (2.0 * (x - lower_).array() / (upper_ - lower_).array() - 1.0).matrix();
}

Eigen::VectorXd InputScaler::unscale(const Eigen::VectorXd& scaled) const
{
    if (scaled.size() != dim()) {
        throw ArgumentError("unscale: vector length mismatch");
    }
    return (lower_.array() + (scaled.array() + 1.0) * 0.5 * (upper_ - lower_).array()).matrix();
}

Eigen::MatrixXd InputScaler::scale_rows(const Eigen::MatrixXd& mu) const
{
    Eigen::MatrixXd out(mu.rows(), mu.cols());
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
        out.row(i) = scale(mu.row(i).transpose()).transpose();
    }
    return out;
}

Eigen::MatrixXd InputScaler::unscale_rows(const Eigen::MatrixXd& scaled) const
{
    Eigen::MatrixXd out(scaled.rows(), scaled.cols());
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
        out.row(i) = unscale(scaled.row(i).transpose()).transpose();
    }
    return out;
}

void GradientSampleSet::validate() const
{
    if (inputs.rows() != gradients.rows() || inputs.rows() != values.size() ||
        inputs.cols() != gradients.cols()) {
        throw ArgumentError("gradient sample set has inconsistent shapes");
    }
    if (inputs.rows() < 1 || inputs.cols() < 1) {
        throw ArgumentError("gradient sample set is empty");
    }
    if (!inputs.allFinite() || !gradients.allFinite() || !values.allFinite()) {
        throw ArgumentError("gradient sample set contains non-finite values");
    }
}

Eigen::MatrixXd gradient_covariance(const Eigen::MatrixXd& gradients)
{
    const Eigen::Index m = gradients.cols();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < gradients.rows(); ++i) {
        const Eigen::VectorXd g = gradients.row(i).transpose();
        C.noalias() += g * g.transpose();
    }
    return C / static_cast<double>(gradients.rows());
}

ActiveSubspace decompose_covariance(const Eigen::MatrixXd& covariance, DimensionRule rule)
{
    const Eigen::Index m = covariance.rows();
    if (covariance.cols() != m || m == 0) {
        throw ArgumentError("covariance must be square and non-empty");
    }
    if (rule.dimension && (*rule.dimension < 1 || *rule.dimension > m)) {
        throw ArgumentError("active dimension " + std::to_string(*rule.dimension) + " outside 1.." +
                            std::to_string(m));
    }
    const Eigen::MatrixXd C = 0.5 * (covariance + covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.info() != Eigen::Success) {
        throw NumericError("symmetric eigendecomposition failed");
    }

    ActiveSubspace as;
    as.lambdas = eig.eigenvalues().reverse();
    as.W = eig.eigenvectors().rowwise().reverse();
    const double top = as.lambdas(0);
    if (!(top > 0.0)) {
        throw DegenerateFunctionError("gradient covariance is zero: the function is constant on the samples");
    }
    if (as.lambdas(m - 1) < -1e-12 * top) {
        std::ostringstream msg;
        msg << "gradient covariance has eigenvalue " << as.lambdas(m - 1)
            << " below -1e-12 * lambda_1; clipped to zero";
        warn(msg.str());
    }
    as.lambdas = as.lambdas.cwiseMax(0.0);

    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::abs(as.W(i, j)) > 1e-12) {
                if (as.W(i, j) < 0.0) {
                    as.W.col(j) = -as.W.col(j);
                }
                break;
            }
        }
    }

    if (rule.dimension) {
        as.M = *rule.dimension;
    } else {
        if (m < 2) {
            throw ArgumentError("gap rule needs at least two parameters");
        }
        const double floor = 1e-12 * top;
        double best = 1.0;
        int split = 0;
        for (Eigen::Index j = 0; j + 1 < m; ++j) {
            const double hi = as.lambdas(j) > floor ? as.lambdas(j) : 0.0;
            const double lo = as.lambdas(j + 1) > floor ? as.lambdas(j + 1) : 0.0;
            if (hi == 0.0) {
                break;
            }
            const double ratio = lo == 0.0 ? std::numeric_limits<double>::infinity() : hi / lo;
            if (ratio > best) {
                best = ratio;
                split = static_cast<int>(j + 1);
            }
            if (lo == 0.0) {
                break;
            }
        }
        if (split == 0) {
            throw ArgumentError("eigenvalues have no positive gap; choose the active dimension explicitly");
        }
        as.M = split;
    }
    return as;
}

ActiveSubspace estimate_active_subspace(const GradientSampleSet& samples, DimensionRule rule)
{
    samples.validate();
    return decompose_covariance(gradient_covariance(samples.gradients), rule);
}

Eigen::VectorXd project_active(const ActiveSubspace& as, const Eigen::VectorXd& mu)
{
    if (mu.size() != as.dim()) {
        throw ArgumentError("project_active: dimension mismatch");
    }
    return as.W1().transpose() * mu;
}

Eigen::VectorXd project_inactive(const ActiveSubspace& as, const Eigen::VectorXd& mu)
{
    if (mu.size() != as.dim()) {
        throw ArgumentError("project_inactive: dimension mismatch");
    }
    return as.W2().transpose() * mu;
}

Eigen::VectorXd lift_to_full(const ActiveSubspace& as, const Eigen::VectorXd& mu_active,
                             const std::optional<Eigen::VectorXd>& eta)
{
    if (mu_active.size() != as.M) {
        throw ArgumentError("lift_to_full: active vector has length " +
                            std::to_string(mu_active.size()) + ", expected " + std::to_string(as.M));
    }
    Eigen::VectorXd mu = as.W1() * mu_active;
    if (eta) {
        if (eta->size() != as.dim() - as.M) {
            throw ArgumentError("lift_to_full: inactive vector length mismatch");
        }
        mu += as.W2() * *eta;
    }
    return mu;
}

double subspace_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B)
{
    if (A.rows() != B.rows()) {
        throw ArgumentError("subspace_distance: ambient dimensions differ");
    }
    const Eigen::MatrixXd D = A * A.transpose() - B * B.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace rh::subspaces
