#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <vector>

namespace rh::response {

// Polynomial of degree 1 or 2 in M reduced variables. Coefficients follow
// graded-lex order: constant, y_1..y_M, then y_i y_j for i <= j in
// lexicographic order (y_1^2, y_1 y_2, ..., y_M^2).
struct PolynomialSurface {
    int dim = 0;
    int degree = 0;
    Eigen::VectorXd coefficients;
    double rmse = 0.0;
    double condition = 1.0; // of the training design matrix

    static Eigen::Index coefficient_count(int dim, int degree);
    void validate() const;
};

Eigen::VectorXd monomials(int dim, int degree, const Eigen::VectorXd& y);

// Rows of `points` are samples.
PolynomialSurface fit_polynomial(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, int degree);

double evaluate(const PolynomialSurface& surface, const Eigen::VectorXd& y);
Eigen::VectorXd gradient(const PolynomialSurface& surface, const Eigen::VectorXd& y);
// Constant Hessian of the surface (zero for degree 1).
Eigen::MatrixXd hessian(const PolynomialSurface& surface);
double rmse_against(const PolynomialSurface& surface, const Eigen::MatrixXd& points,
                    const Eigen::VectorXd& values);

struct FeasibleBand {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

// Indices i with lower <= values_i <= upper. Throws EmptyFeasibleSetError.
std::vector<std::size_t> filter_feasible(const Eigen::VectorXd& values, FeasibleBand band);

struct Box {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::Index dim() const { return lower.size(); }
    bool contains(const Eigen::VectorXd& y, double slack = 0.0) const;
    void validate() const;
};

Box bounding_box(const Eigen::MatrixXd& points);

struct Minimum {
    Eigen::VectorXd point;
    double value = 0.0;
};

Minimum minimize_surface(const PolynomialSurface& surface, const Box& region);

struct Preimage {
    Eigen::VectorXd point;    // clipped to the box
    Eigen::VectorXd residual; // basis^T point - reduced
};

// Minimal-norm solution of basis^T mu = reduced, clipped componentwise.
Preimage preimage(const Eigen::VectorXd& reduced, const Eigen::MatrixXd& basis, const Box& box);

nlohmann::json to_json(const PolynomialSurface& surface);
PolynomialSurface surface_from_json(const nlohmann::json& doc, const std::string& source = "<surface>");
void save_surface(const PolynomialSurface& surface, const std::filesystem::path& path);
PolynomialSurface load_surface(const std::filesystem::path& path);

// Sufficient-summary table: y1..yM, value, feasible (0/1).
void write_summary_csv(std::ostream& out, const Eigen::MatrixXd& reduced, const Eigen::VectorXd& values,
                       const std::vector<bool>& feasible);

} // namespace rh::response
