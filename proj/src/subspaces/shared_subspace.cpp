#include "rh/errors.hpp"
#include "rh/subspaces.hpp"

#include <limits>
#include <sstream>

namespace rh::subspaces {

SharedSubspace compute_shared_subspace(std::span<const ActiveSubspace> sources)
{
    if (sources.empty()) {
        throw ArgumentError("shared subspace needs at least one source");
    }
    const Eigen::Index m = sources.front().dim();
    const int M = sources.front().M;
    for (const auto& s : sources) {
        if (s.dim() != m || s.M != M) {
            throw ArgumentError("shared subspace sources must agree on m and M");
        }
    }

    SharedSubspace shared;
    shared.sources.assign(sources.begin(), sources.end());
    const auto k = static_cast<Eigen::Index>(sources.size());

    if (k == 1) {
        shared.Q = sources.front().W1();
        shared.residual = 0.0;
        shared.condition = 1.0;
        return shared;
    }

    // Q = B_all * coeffs; every W1_i^T Q = I stacks to (B_all^T B_all) coeffs = [I; ...; I].
    Eigen::MatrixXd basis(m, k * M);
    for (Eigen::Index i = 0; i < k; ++i) {
        basis.middleCols(i * M, M) = sources[static_cast<std::size_t>(i)].W1();
    }
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    const Eigen::MatrixXd rhs = Eigen::MatrixXd::Identity(M, M).replicate(k, 1);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
    const Eigen::MatrixXd coeffs = cod.solve(rhs);
    shared.Q = basis * coeffs;

    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(gram).singularValues();
    shared.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                               : std::numeric_limits<double>::infinity();
    shared.residual = 0.0;
    for (const auto& s : sources) {
        const Eigen::MatrixXd err = s.W1().transpose() * shared.Q - Eigen::MatrixXd::Identity(M, M);
        shared.residual = std::max(shared.residual, err.cwiseAbs().maxCoeff());
    }
    if (!(shared.residual <= 1e-8)) {
        std::ostringstream msg;
        msg << "no shared subspace: residual " << shared.residual << ", condition number "
            << shared.condition;
        throw NoSharedSubspaceError(msg.str(), shared.residual, shared.condition);
    }
    return shared;
}

} // namespace rh::subspaces
