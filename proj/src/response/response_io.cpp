#include "rh/errors.hpp"
#include "rh/response.hpp"

#include "../json_util.hpp"

#include <iomanip>
#include <ostream>

namespace rh::response {

nlohmann::json to_json(const PolynomialSurface& surface)
{
    nlohmann::json doc{{"dim", surface.dim},
                       {"degree", surface.degree},
                       {"coefficients", detail::vector_to_json(surface.coefficients)},
                       {"rmse", surface.rmse}};
    // JSON has no infinity; null stands for a singular design.
    doc["condition"] = std::isfinite(surface.condition) ? nlohmann::json(surface.condition) : nlohmann::json();
    return doc;
}

PolynomialSurface surface_from_json(const nlohmann::json& doc, const std::string& source)
{
    PolynomialSurface s;
    s.dim = detail::field<int>(doc, "dim", source);
    s.degree = detail::field<int>(doc, "degree", source);
    s.coefficients = detail::vector_from_json(doc, "coefficients", source);
    s.rmse = detail::field<double>(doc, "rmse", source);
    if (doc.contains("condition")) {
        s.condition = doc["condition"].is_null() ? std::numeric_limits<double>::infinity()
                                                 : detail::field<double>(doc, "condition", source);
    }
    try {
        s.validate();
    } catch (const Error& e) {
        throw ParseError(source, 0, e.what());
    }
    return s;
}

void save_surface(const PolynomialSurface& surface, const std::filesystem::path& path)
{
    detail::write_json_file(to_json(surface), path);
}

PolynomialSurface load_surface(const std::filesystem::path& path)
{
    return surface_from_json(detail::read_json_file(path), path.string());
}

void write_summary_csv(std::ostream& out, const Eigen::MatrixXd& reduced, const Eigen::VectorXd& values,
                       const std::vector<bool>& feasible)
{
    if (reduced.rows() != values.size() || feasible.size() != static_cast<std::size_t>(values.size())) {
        throw ArgumentError("summary table: row counts differ");
    }
    for (Eigen::Index j = 0; j < reduced.cols(); ++j) {
        out << 'y' << j + 1 << ',';
    }
    out << "value,feasible\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < reduced.rows(); ++i) {
        for (Eigen::Index j = 0; j < reduced.cols(); ++j) {
            out << reduced(i, j) << ',';
        }
        out << values(i) << ',' << (feasible[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    }
}

} // namespace rh::response
