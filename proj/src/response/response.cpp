#include "rh/diagnostics.hpp"
#include "rh/errors.hpp"
#include "rh/response.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rh::response {

namespace {

// f(y) = c + g^T y + 0.5 y^T H y
struct Quadratic {
    double c = 0.0;
    Eigen::VectorXd g;
    Eigen::MatrixXd H;

    double operator()(const Eigen::VectorXd& y) const { return c + g.dot(y) + 0.5 * y.dot(H * y); }
};

Quadratic as_quadratic(const PolynomialSurface& s)
{
    const int M = s.dim;
    Quadratic q;
    q.c = s.coefficients(0);
    q.g = s.coefficients.segment(1, M);
    q.H = Eigen::MatrixXd::Zero(M, M);
    if (s.degree == 2) {
        Eigen::Index k = 1 + M;
        for (int i = 0; i < M; ++i) {
            for (int j = i; j < M; ++j, ++k) {
                if (i == j) {
                    q.H(i, i) = 2.0 * s.coefficients(k);
                } else {
                    q.H(i, j) = q.H(j, i) = s.coefficients(k);
                }
            }
        }
    }
    return q;
}

Eigen::VectorXd clamp(const Eigen::VectorXd& y, const Box& box)
{
    return y.cwiseMax(box.lower).cwiseMin(box.upper);
}

// Exact line minimization along each coordinate in turn.
Eigen::VectorXd coordinate_descent(const Quadratic& q, const Box& box, Eigen::VectorXd y)
{
    const Eigen::Index M = y.size();
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double largest = 0.0;
        for (Eigen::Index i = 0; i < M; ++i) {
            // Along coordinate i: 0.5 H_ii t^2 + b t + const.
            const double b = q.g(i) + q.H.row(i).dot(y) - q.H(i, i) * y(i);
            const double a = q.H(i, i);
            const double lo = box.lower(i);
            const double hi = box.upper(i);
            double t;
            if (a > 0.0) {
                t = std::clamp(-b / a, lo, hi);
            } else {
                const double f_lo = 0.5 * a * lo * lo + b * lo;
                const double f_hi = 0.5 * a * hi * hi + b * hi;
                t = f_hi < f_lo ? hi : lo;
            }
            largest = std::max(largest, std::abs(t - y(i)));
            y(i) = t;
        }
        if (largest < 1e-10) {
            break;
        }
    }
    return y;
}

// Solve the stationarity condition on the coordinates that sit strictly
// inside the box, holding the others at their bounds.
Eigen::VectorXd polish(const Quadratic& q, const Box& box, const Eigen::VectorXd& y)
{
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) > box.lower(i) && y(i) < box.upper(i)) {
            free.push_back(i);
        }
    }
    if (free.empty()) {
        return y;
    }
    const auto n = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd Hff(n, n);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index a = 0; a < n; ++a) {
        double r = q.g(free[a]);
        for (Eigen::Index j = 0; j < y.size(); ++j) {
            if (std::find(free.begin(), free.end(), j) == free.end()) {
                r += q.H(free[a], j) * y(j);
            }
        }
        rhs(a) = -r;
        for (Eigen::Index b = 0; b < n; ++b) {
            Hff(a, b) = q.H(free[a], free[b]);
        }
    }
    const Eigen::VectorXd sol = Hff.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd out = y;
    for (Eigen::Index a = 0; a < n; ++a) {
        out(free[a]) = sol(a);
    }
    if (!sol.allFinite() || !box.contains(out, 1e-12)) {
        return y;
    }
    out = clamp(out, box);
    return q(out) <= q(y) ? out : y;
}

Eigen::VectorXd descend(const Quadratic& q, const Box& box, const Eigen::VectorXd& start)
{
    return polish(q, box, coordinate_descent(q, box, clamp(start, box)));
}

// Stationary points of the restriction to every face of the box. The global
// minimum lies in the relative interior of some face, so it is among these.
void face_candidates(const Quadratic& q, const Box& box, std::vector<Eigen::VectorXd>& out)
{
    const Eigen::Index M = box.dim();
    long faces = 1;
    for (Eigen::Index i = 0; i < M; ++i) {
        faces *= 3;
    }
    for (long code = 0; code < faces; ++code) {
        Eigen::VectorXd y(M);
        std::vector<Eigen::Index> free;
        long c = code;
        for (Eigen::Index i = 0; i < M; ++i, c /= 3) {
            switch (c % 3) {
            case 0:
                y(i) = box.lower(i);
                break;
            case 1:
                y(i) = box.upper(i);
                break;
            default:
                y(i) = 0.5 * (box.lower(i) + box.upper(i));
                free.push_back(i);
            }
        }
        if (free.empty()) {
            out.push_back(y);
            continue;
        }
        const auto n = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd Hff(n, n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd fixed = y;
        for (Eigen::Index a = 0; a < n; ++a) {
            fixed(free[a]) = 0.0;
        }
        for (Eigen::Index a = 0; a < n; ++a) {
            rhs(a) = -(q.g(free[a]) + q.H.row(free[a]).dot(fixed));
            for (Eigen::Index b = 0; b < n; ++b) {
                Hff(a, b) = q.H(free[a], free[b]);
            }
        }
        const Eigen::VectorXd sol = Hff.completeOrthogonalDecomposition().solve(rhs);
        for (Eigen::Index a = 0; a < n; ++a) {
            y(free[a]) = sol(a);
        }
        if (sol.allFinite() && box.contains(y, 1e-12)) {
            out.push_back(clamp(y, box));
        }
    }
}

void grid_candidate(const Quadratic& q, const Box& box, int per_axis, std::vector<Eigen::VectorXd>& out)
{
    const Eigen::Index M = box.dim();
    std::vector<int> idx(static_cast<std::size_t>(M), 0);
    Eigen::VectorXd y(M);
    Eigen::VectorXd best;
    double best_value = std::numeric_limits<double>::infinity();
    const auto coord = [&](Eigen::Index i, int k) {
        return box.lower(i) + (box.upper(i) - box.lower(i)) * k / (per_axis - 1);
    };
    // Lexicographic order with strict improvement keeps the lowest index on ties.
    while (true) {
        for (Eigen::Index i = 0; i < M; ++i) {
            y(i) = coord(i, idx[static_cast<std::size_t>(i)]);
        }
        const double v = q(y);
        if (v < best_value) {
            best_value = v;
            best = y;
        }
        Eigen::Index i = M - 1;
        while (i >= 0 && ++idx[static_cast<std::size_t>(i)] == per_axis) {
            idx[static_cast<std::size_t>(i)] = 0;
            --i;
        }
        if (i < 0) {
            break;
        }
    }
    out.push_back(descend(q, box, best));
}

} // namespace

Eigen::Index PolynomialSurface::coefficient_count(int dim, int degree)
{
    if (dim < 1 || degree < 1 || degree > 2) {
        throw ArgumentError("response surface needs dim >= 1 and degree 1 or 2");
    }
    return degree == 1 ? 1 + dim : 1 + dim + dim * (dim + 1) / 2;
}

void PolynomialSurface::validate() const
{
    if (coefficients.size() != coefficient_count(dim, degree)) {
        throw ArgumentError("response surface has " + std::to_string(coefficients.size()) +
                            " coefficients, expected " + std::to_string(coefficient_count(dim, degree)));
    }
    if (!coefficients.allFinite()) {
        throw NumericError("response surface has non-finite coefficients");
    }
}

Eigen::VectorXd monomials(int dim, int degree, const Eigen::VectorXd& y)
{
    if (y.size() != dim) {
        throw ArgumentError("point has dimension " + std::to_string(y.size()) + ", surface expects " +
                            std::to_string(dim));
    }
    Eigen::VectorXd out(PolynomialSurface::coefficient_count(dim, degree));
    out(0) = 1.0;
    out.segment(1, dim) = y;
    if (degree == 2) {
        Eigen::Index k = 1 + dim;
        for (int i = 0; i < dim; ++i) {
            for (int j = i; j < dim; ++j) {
                out(k++) = y(i) * y(j);
            }
        }
    }
    return out;
}

PolynomialSurface fit_polynomial(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, int degree)
{
    const int M = static_cast<int>(points.cols());
    const Eigen::Index P = PolynomialSurface::coefficient_count(M, degree);
    const Eigen::Index N = points.rows();
    if (values.size() != N) {
        throw ArgumentError("response fit: point and value counts differ");
    }
    if (N < P) {
        throw ArgumentError("response fit needs at least " + std::to_string(P) + " samples, got " +
                            std::to_string(N));
    }
    if (!points.allFinite() || !values.allFinite()) {
        throw ArgumentError("response fit: non-finite data");
    }
    Eigen::MatrixXd A(N, P);
    for (Eigen::Index i = 0; i < N; ++i) {
        A.row(i) = monomials(M, degree, points.row(i).transpose()).transpose();
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();

    PolynomialSurface s;
    s.dim = M;
    s.degree = degree;
    s.condition = sigma(P - 1) > 0.0 ? sigma(0) / sigma(P - 1) : std::numeric_limits<double>::infinity();
    if (svd.rank() < P) {
        std::ostringstream msg;
        msg << "response fit: rank-deficient design (rank " << svd.rank() << " of " << P
            << "), using the minimal-norm solution";
        warn(msg.str());
    }
    s.coefficients = svd.solve(values);
    s.validate();
    s.rmse = std::sqrt((A * s.coefficients - values).squaredNorm() / static_cast<double>(N));
    return s;
}

double evaluate(const PolynomialSurface& surface, const Eigen::VectorXd& y)
{
    return surface.coefficients.dot(monomials(surface.dim, surface.degree, y));
}

Eigen::VectorXd gradient(const PolynomialSurface& surface, const Eigen::VectorXd& y)
{
    if (y.size() != surface.dim) {
        throw ArgumentError("gradient: dimension mismatch");
    }
    const auto q = as_quadratic(surface);
    return q.g + q.H * y;
}

Eigen::MatrixXd hessian(const PolynomialSurface& surface)
{
    return as_quadratic(surface).H;
}

double rmse_against(const PolynomialSurface& surface, const Eigen::MatrixXd& points, const Eigen::VectorXd& values)
{
    if (points.rows() != values.size() || points.rows() == 0) {
        throw ArgumentError("rmse_against: need matching, non-empty points and values");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double r = evaluate(surface, points.row(i).transpose()) - values(i);
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(points.rows()));
}

std::vector<std::size_t> filter_feasible(const Eigen::VectorXd& values, FeasibleBand band)
{
    if (!(band.lower <= band.upper)) {
        throw ArgumentError("feasible band requires lower <= upper");
    }
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values(i) >= band.lower && values(i) <= band.upper) {
            out.push_back(static_cast<std::size_t>(i));
        }
    }
    if (out.empty()) {
        std::ostringstream msg;
        msg << "no sample lies in the feasible band [" << band.lower << ", " << band.upper << "]";
        throw EmptyFeasibleSetError(msg.str());
    }
    return out;
}

bool Box::contains(const Eigen::VectorXd& y, double slack) const
{
    return y.size() == dim() && (y.array() >= lower.array() - slack).all() &&
           (y.array() <= upper.array() + slack).all();
}

void Box::validate() const
{
    if (lower.size() != upper.size() || lower.size() == 0) {
        throw ArgumentError("box bounds must be non-empty and of equal length");
    }
    if (!lower.allFinite() || !upper.allFinite()) {
        throw ArgumentError("box is unbounded");
    }
    if (!(lower.array() <= upper.array()).all()) {
        throw ArgumentError("box is empty: lower > upper");
    }
}

Box bounding_box(const Eigen::MatrixXd& points)
{
    if (points.rows() == 0) {
        throw ArgumentError("bounding_box of an empty point set");
    }
    return Box{points.colwise().minCoeff().transpose(), points.colwise().maxCoeff().transpose()};
}

Minimum minimize_surface(const PolynomialSurface& surface, const Box& region)
{
    surface.validate();
    region.validate();
    if (region.dim() != surface.dim) {
        throw ArgumentError("minimize_surface: region dimension differs from the surface");
    }
    const auto q = as_quadratic(surface);
    const Eigen::Index M = surface.dim;

    if (surface.degree == 1) {
        Eigen::VectorXd y(M);
        for (Eigen::Index i = 0; i < M; ++i) {
            y(i) = q.g(i) > 0.0 ? region.lower(i) : region.upper(i);
            if (q.g(i) == 0.0) {
                y(i) = region.lower(i);
            }
        }
        return {y, evaluate(surface, y)};
    }

    std::vector<Eigen::VectorXd> candidates;
    Eigen::LLT<Eigen::MatrixXd> llt(q.H);
    if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd stationary = llt.solve(-q.g);
        if (region.contains(stationary)) {
            return {stationary, evaluate(surface, stationary)};
        }
        candidates.push_back(descend(q, region, stationary));
    } else {
        const Eigen::VectorXd stationary = q.H.completeOrthogonalDecomposition().solve(-q.g);
        candidates.push_back(descend(q, region, stationary));
    }
    if (M <= 8) {
        face_candidates(q, region, candidates);
    }
    if (M <= 3) {
        grid_candidate(q, region, 101, candidates);
    } else {
        candidates.push_back(descend(q, region, 0.5 * (region.lower + region.upper)));
        if (M <= 10) {
            for (long corner = 0; corner < (1L << M); ++corner) {
                Eigen::VectorXd y(M);
                for (Eigen::Index i = 0; i < M; ++i) {
                    y(i) = (corner >> i) & 1 ? region.upper(i) : region.lower(i);
                }
                candidates.push_back(descend(q, region, y));
            }
        }
    }

    Minimum best{candidates.front(), q(candidates.front())};
    for (const auto& y : candidates) {
        const double v = q(y);
        if (v < best.value) {
            best = {y, v};
        }
    }
    best.value = evaluate(surface, best.point);
    return best;
}

Preimage preimage(const Eigen::VectorXd& reduced, const Eigen::MatrixXd& basis, const Box& box)
{
    box.validate();
    if (basis.rows() != box.dim() || basis.cols() != reduced.size()) {
        throw ArgumentError("preimage: basis is " + std::to_string(basis.rows()) + "x" +
                            std::to_string(basis.cols()) + ", incompatible with the point or box");
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(basis.transpose());
    if (cod.rank() < basis.cols()) {
        throw ArgumentError("preimage: basis does not have full column rank");
    }
    Preimage out;
    out.point = clamp(cod.solve(reduced), box);
    out.residual = basis.transpose() * out.point - reduced;
    return out;
}

} // namespace rh::response
