#include "rh/errors.hpp"
#include "rh/subspaces.hpp"

#include "../json_util.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace rh::subspaces {

void write_samples_csv(std::ostream& out, const GradientSampleSet& samples)
{
    samples.validate();
    const Eigen::Index m = samples.dim();
    for (Eigen::Index j = 0; j < m; ++j) {
        out << "x" << j + 1 << ',';
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        out << "g" << j + 1 << ',';
    }
    out << "f\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            out << samples.inputs(i, j) << ',';
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            out << samples.gradients(i, j) << ',';
        }
        out << samples.values(i) << '\n';
    }
}

GradientSampleSet read_samples_csv(std::istream& in, const std::string& source)
{
    std::string raw;
    std::size_t line_no = 0;
    std::vector<std::vector<double>> rows;
    std::size_t columns = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.empty() || raw[0] == '#') {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(raw);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (columns == 0) {
            // header
            columns = cells.size();
            if (columns < 3 || columns % 2 == 0) {
                throw ParseError(source, line_no,
                                 "header must have 2m+1 columns, got " + std::to_string(columns));
            }
            continue;
        }
        if (cells.size() != columns) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(columns) + " columns, got " +
                                 std::to_string(cells.size()));
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size()) {
                    throw std::invalid_argument(c);
                }
            } catch (const std::exception&) {
                throw ParseError(source, line_no, "bad number '" + c + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw ParseError(source, line_no, "no samples");
    }
    const auto m = static_cast<Eigen::Index>((columns - 1) / 2);
    const auto N = static_cast<Eigen::Index>(rows.size());
    GradientSampleSet s{Eigen::MatrixXd(N, m), Eigen::MatrixXd(N, m), Eigen::VectorXd(N)};
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m; ++j) {
            s.inputs(i, j) = r[static_cast<std::size_t>(j)];
            s.gradients(i, j) = r[static_cast<std::size_t>(m + j)];
        }
        s.values(i) = r.back();
    }
    return s;
}

GradientSampleSet load_samples(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_samples_csv(in, path.string());
}

void save_samples(const GradientSampleSet& samples, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    write_samples_csv(out, samples);
}

nlohmann::json to_json(const ActiveSubspace& as)
{
    return nlohmann::json{
        {"kind", "active_subspace"},
        {"m", as.dim()},
        {"M", as.M},
        {"lambdas", detail::vector_to_json(as.lambdas)},
        {"W", detail::matrix_to_json(as.W)},
    };
}

ActiveSubspace active_subspace_from_json(const nlohmann::json& doc, const std::string& source)
{
    ActiveSubspace as;
    const auto m = detail::field<Eigen::Index>(doc, "m", source);
    as.M = detail::field<int>(doc, "M", source);
    as.lambdas = detail::vector_from_json(doc, "lambdas", source);
    as.W = detail::matrix_from_json(doc, "W", source);
    if (as.W.rows() != m || as.W.cols() != m || as.lambdas.size() != m || as.M < 1 || as.M > m) {
        throw ParseError(source, 0, "active subspace fields disagree with m and M");
    }
    return as;
}

nlohmann::json to_json(const SharedSubspace& shared)
{
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& s : shared.sources) {
        sources.push_back(to_json(s));
    }
    return nlohmann::json{
        {"kind", "shared_subspace"},
        {"Q", detail::matrix_to_json(shared.Q)},
        {"residual", shared.residual},
        {"condition", shared.condition},
        {"sources", sources},
    };
}

SharedSubspace shared_subspace_from_json(const nlohmann::json& doc, const std::string& source)
{
    SharedSubspace shared;
    shared.Q = detail::matrix_from_json(doc, "Q", source);
    shared.residual = detail::field<double>(doc, "residual", source);
    // JSON has no infinity; a singular Gram matrix serializes its condition as null.
    const auto& cond = detail::field<nlohmann::json>(doc, "condition", source);
    shared.condition = cond.is_number() ? cond.get<double>() : std::numeric_limits<double>::infinity();
    for (const auto& s : detail::field<nlohmann::json>(doc, "sources", source)) {
        shared.sources.push_back(active_subspace_from_json(s, source));
    }
    return shared;
}

} // namespace rh::subspaces
