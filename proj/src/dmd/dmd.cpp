#include "rh/diagnostics.hpp"
#include "rh/dmd.hpp"
#include "rh/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rh::dmd {

namespace {

Complex integer_power(Complex base, long k)
{
    Complex result(1.0, 0.0);
    while (k > 0) {
        if (k & 1) {
            result *= base;
        }
        base *= base;
        k >>= 1;
    }
    return result;
}

Complex fractional_power(Complex base, double s)
{
    if (base == Complex(0.0, 0.0)) {
        return s == 0.0 ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
    }
    return std::exp(s * std::log(base));
}

Eigen::VectorXcd expand(const DmdModel& model, const Eigen::VectorXcd& powers)
{
    return model.modes * powers.cwiseProduct(model.amplitudes);
}

std::string format_eigenvalues(const std::vector<Complex>& values)
{
    std::ostringstream out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << (i ? ", " : "") << values[i].real() << (values[i].imag() < 0 ? "-" : "+")
            << std::abs(values[i].imag()) << "i";
    }
    return out.str();
}

} // namespace

void SnapshotSet::validate() const
{
    if (data.rows() < 1) {
        throw ArgumentError("snapshot set has no state components");
    }
    if (data.cols() < 2) {
        throw ArgumentError("snapshot set needs at least 2 snapshots, got " +
                            std::to_string(data.cols()));
    }
    if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(t0)) {
        throw ArgumentError("snapshot time step must be positive and finite");
    }
    if (!data.allFinite()) {
        throw ArgumentError("snapshot data contains non-finite values");
    }
}

SnapshotSet time_window(const SnapshotSet& snapshots, double t_start, double t_end)
{
    const double slack = 1e-9 * snapshots.dt;
    Eigen::Index first = -1;
    Eigen::Index last = -1;
    for (Eigen::Index k = 0; k < snapshots.count(); ++k) {
        const double t = snapshots.time(k);
        if (t >= t_start - slack && t <= t_end + slack) {
            if (first < 0) {
                first = k;
            }
            last = k;
        }
    }
    if (first < 0) {
        std::ostringstream msg;
        msg << "no snapshots inside window [" << t_start << ", " << t_end << "]";
        throw ArgumentError(msg.str());
    }
    SnapshotSet out;
    out.data = snapshots.data.middleCols(first, last - first + 1);
    out.dt = snapshots.dt;
    out.t0 = snapshots.time(first);
    return out;
}

RankPolicy RankPolicy::parse(const std::string& text)
{
    const std::string prefix = "energy:";
    try {
        if (text.rfind(prefix, 0) == 0) {
            return energy_fraction(std::stod(text.substr(prefix.size())));
        }
        std::size_t used = 0;
        const int r = std::stoi(text, &used);
        if (used == text.size()) {
            return fixed(r);
        }
    } catch (const std::exception&) {
    }
    throw ArgumentError("bad rank policy '" + text + "' (expected an integer or energy:<fraction>)");
}

std::string RankPolicy::to_string() const
{
    if (kind == Kind::Fixed) {
        return std::to_string(rank);
    }
    std::ostringstream out;
    out.precision(17);
    out << "energy:" << energy;
    return out.str();
}

double DmdModel::spectral_radius() const
{
    return eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
}

DmdModel fit(const SnapshotSet& snapshots, RankPolicy policy)
{
    snapshots.validate();
    const Eigen::Index n = snapshots.state_dim();
    const Eigen::Index m = snapshots.count();
    const Eigen::MatrixXd S = snapshots.data.leftCols(m - 1);
    const Eigen::MatrixXd S_next = snapshots.data.rightCols(m - 1);
    const int max_rank = static_cast<int>(std::min(n, m - 1));

    Eigen::BDCSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    if (!(sigma(0) > 0.0)) {
        throw NumericError("snapshot matrix is identically zero");
    }

    int r = 0;
    if (policy.kind == RankPolicy::Kind::Fixed) {
        if (policy.rank < 1 || policy.rank > max_rank) {
            throw ArgumentError("DMD rank " + std::to_string(policy.rank) + " outside 1.." +
                                std::to_string(max_rank) + " = min(n, m-1)");
        }
        r = policy.rank;
    } else {
        if (!(policy.energy > 0.0 && policy.energy <= 1.0)) {
            throw ArgumentError("DMD energy threshold must lie in (0, 1]");
        }
        const double total = sigma.squaredNorm();
        double cumulative = 0.0;
        r = max_rank;
        for (int j = 0; j < max_rank; ++j) {
            cumulative += sigma(j) * sigma(j);
            if (cumulative >= policy.energy * total) {
                r = j + 1;
                break;
            }
        }
    }

    int usable = r;
    while (usable > 1 && sigma(usable - 1) < 1e-13 * sigma(0)) {
        --usable;
    }
    if (usable < r) {
        std::ostringstream msg;
        msg << "DMD rank reduced from " << r << " to " << usable
            << ": singular values below 1e-13 * sigma_1";
        warn(msg.str());
        r = usable;
    }

    const Eigen::MatrixXd U = svd.matrixU().leftCols(r);
    const Eigen::MatrixXd V = svd.matrixV().leftCols(r);
    const Eigen::VectorXd inv_sigma = sigma.head(r).cwiseInverse();
    // S_next V Sigma^-1, shared by the reduced operator and the modes.
    const Eigen::MatrixXd projected = (S_next * V) * inv_sigma.asDiagonal();
    const Eigen::MatrixXd reduced = U.transpose() * projected;

    Eigen::EigenSolver<Eigen::MatrixXd> eig(reduced, true);
    if (eig.info() != Eigen::Success) {
        throw NumericError("eigendecomposition of the reduced DMD operator failed");
    }
    Eigen::VectorXcd lambda = eig.eigenvalues();
    Eigen::MatrixXcd W = eig.eigenvectors();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double ma = std::abs(lambda(a));
        const double mb = std::abs(lambda(b));
        if (ma != mb) {
            return ma > mb;
        }
        return lambda(a).imag() > lambda(b).imag();
    });

    DmdModel model;
    model.rank = r;
    model.dt = snapshots.dt;
    model.t0 = snapshots.t0;
    model.singular_values = sigma;
    model.eigenvalues.resize(r);
    Eigen::MatrixXcd W_sorted(r, r);
    for (int j = 0; j < r; ++j) {
        model.eigenvalues(j) = lambda(order[static_cast<std::size_t>(j)]);
        W_sorted.col(j) = W.col(order[static_cast<std::size_t>(j)]);
    }
    model.modes = projected.cast<Complex>() * W_sorted;

    const Eigen::VectorXcd x1 = snapshots.data.col(0).cast<Complex>();
    model.amplitudes = model.modes.completeOrthogonalDecomposition().solve(x1);
    model.reference_norm = snapshots.data.col(0).norm();
    return model;
}

Eigen::VectorXcd reconstruct_complex(const DmdModel& model, long k)
{
    if (k < 0) {
        throw ArgumentError("reconstruct: negative step index");
    }
    Eigen::VectorXcd powers(model.rank);
    for (int j = 0; j < model.rank; ++j) {
        powers(j) = integer_power(model.eigenvalues(j), k);
    }
    return expand(model, powers);
}

Eigen::VectorXd reconstruct(const DmdModel& model, long k)
{
    return reconstruct_complex(model, k).real();
}

Eigen::VectorXd forecast(const DmdModel& model, double t)
{
    const double s = (t - model.t0) / model.dt;
    if (s < -1e-9) {
        std::ostringstream msg;
        msg << "forecast time " << t << " precedes the first snapshot at " << model.t0;
        throw ArgumentError(msg.str());
    }
    const double nearest = std::round(s);
    if (std::abs(s - nearest) <= 1e-9) {
        return reconstruct(model, static_cast<long>(nearest));
    }
    Eigen::VectorXcd powers(model.rank);
    for (int j = 0; j < model.rank; ++j) {
        powers(j) = fractional_power(model.eigenvalues(j), s);
    }
    return expand(model, powers).real();
}

SteadyState steady_state(const DmdModel& model, double tol)
{
    if (!(tol > 0.0)) {
        throw ArgumentError("steady_state tolerance must be positive");
    }
    SteadyState result;
    Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(model.modes.rows());
    std::vector<Complex> offending;
    const double threshold = 1e-6 * model.reference_norm;
    for (int j = 0; j < model.rank; ++j) {
        const Complex lambda = model.eigenvalues(j);
        const double weight = std::abs(model.amplitudes(j)) * model.modes.col(j).norm();
        if (std::abs(lambda - 1.0) < tol) {
            sum += model.modes.col(j) * model.amplitudes(j);
            result.steady_eigenvalues.push_back(lambda);
        } else if (std::abs(lambda) > 1.0 + tol) {
            if (weight > threshold) {
                offending.push_back(lambda);
            } else {
                result.divergent_eigenvalues.push_back(lambda);
            }
        } else if (std::abs(lambda) >= 1.0 - tol) {
            result.persistent_eigenvalues.push_back(lambda);
            if (weight > threshold) {
                warn("steady_state: persistent oscillating mode " + format_eigenvalues({lambda}) +
                     " has no limit and is left out");
            }
        }
    }
    if (!offending.empty()) {
        throw UnstableModelError("DMD model is unstable: divergent eigenvalues " +
                                 format_eigenvalues(offending));
    }
    result.state = sum.real();
    return result;
}

} // namespace rh::dmd
