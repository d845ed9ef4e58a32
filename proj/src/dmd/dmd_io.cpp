#include "rh/dmd.hpp"
#include "rh/errors.hpp"

#include "../json_util.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rh::dmd {

static_assert(std::endian::native == std::endian::little,
              "binary snapshot layout assumes a little-endian host");

SnapshotSet read_snapshot_text(std::istream& in, const std::string& source)
{
    SnapshotSet set;
    std::vector<std::vector<double>> rows;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) {
            std::istringstream header(raw.substr(hash + 1));
            std::string key;
            header >> key;
            if (key == "dt" || key == "t0") {
                std::string value;
                header >> value;
                if (value == "=") {
                    header >> value;
                }
                try {
                    (key == "dt" ? set.dt : set.t0) = std::stod(value);
                } catch (const std::exception&) {
                    throw ParseError(source, line_no, "bad " + key + " value '" + value + "'");
                }
            }
            raw.resize(hash);
        }
        std::istringstream tokens(raw);
        std::vector<double> row;
        std::string token;
        while (tokens >> token) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(token, &used));
                if (used != token.size()) {
                    throw std::invalid_argument(token);
                }
            } catch (const std::exception&) {
                throw ParseError(source, line_no, "bad number '" + token + "'");
            }
        }
        if (row.empty()) {
            continue;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(source, line_no,
                             "row has " + std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw ParseError(source, line_no, "no snapshot data");
    }
    set.data.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            set.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return set;
}

void write_snapshot_text(std::ostream& out, const SnapshotSet& snapshots)
{
    out << std::setprecision(17);
    out << "# dt " << snapshots.dt << '\n';
    out << "# t0 " << snapshots.t0 << '\n';
    for (Eigen::Index i = 0; i < snapshots.data.rows(); ++i) {
        for (Eigen::Index j = 0; j < snapshots.data.cols(); ++j) {
            out << (j ? " " : "") << snapshots.data(i, j);
        }
        out << '\n';
    }
}

SnapshotSet read_snapshot_binary(std::istream& in, const std::string& source)
{
    std::uint64_t n = 0;
    std::uint64_t m = 0;
    SnapshotSet set;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&m), sizeof m);
    in.read(reinterpret_cast<char*>(&set.dt), sizeof set.dt);
    in.read(reinterpret_cast<char*>(&set.t0), sizeof set.t0);
    if (!in) {
        throw ParseError(source, 0, "truncated binary snapshot header");
    }
    if (n == 0 || m == 0 || n > (std::uint64_t{1} << 40) / m) {
        throw ParseError(source, 0, "implausible snapshot dimensions");
    }
    set.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    in.read(reinterpret_cast<char*>(set.data.data()),
            static_cast<std::streamsize>(n * m * sizeof(double)));
    if (!in) {
        throw ParseError(source, 0, "truncated binary snapshot data");
    }
    return set;
}

void write_snapshot_binary(std::ostream& out, const SnapshotSet& snapshots)
{
    const std::uint64_t n = static_cast<std::uint64_t>(snapshots.data.rows());
    const std::uint64_t m = static_cast<std::uint64_t>(snapshots.data.cols());
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&m), sizeof m);
    out.write(reinterpret_cast<const char*>(&snapshots.dt), sizeof snapshots.dt);
    out.write(reinterpret_cast<const char*>(&snapshots.t0), sizeof snapshots.t0);
    out.write(reinterpret_cast<const char*>(snapshots.data.data()),
              static_cast<std::streamsize>(n * m * sizeof(double)));
}

SnapshotSet load_snapshots(const std::filesystem::path& path)
{
    const bool binary = path.extension() == ".bin";
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) {
        throw IoError("cannot open snapshot file " + path.string());
    }
    return binary ? read_snapshot_binary(in, path.string()) : read_snapshot_text(in, path.string());
}

void save_snapshots(const SnapshotSet& snapshots, const std::filesystem::path& path)
{
    const bool binary = path.extension() == ".bin";
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) {
        throw IoError("cannot write snapshot file " + path.string());
    }
    binary ? write_snapshot_binary(out, snapshots) : write_snapshot_text(out, snapshots);
    if (!out) {
        throw IoError("error while writing " + path.string());
    }
}

nlohmann::json to_json(const DmdModel& model)
{
    using nlohmann::json;
    json modes = json::array();
    for (Eigen::Index j = 0; j < model.modes.cols(); ++j) {
        modes.push_back(detail::complex_vector_to_json(model.modes.col(j)));
    }
    return json{
        {"kind", "dmd"},
        {"rank", model.rank},
        {"dt", model.dt},
        {"t0", model.t0},
        {"reference_norm", model.reference_norm},
        {"singular_values", detail::vector_to_json(model.singular_values)},
        {"eigenvalues", detail::complex_vector_to_json(model.eigenvalues)},
        {"amplitudes", detail::complex_vector_to_json(model.amplitudes)},
        {"modes", modes},
    };
}

DmdModel model_from_json(const nlohmann::json& doc, const std::string& source)
{
    DmdModel model;
    model.rank = detail::field<int>(doc, "rank", source);
    model.dt = detail::field<double>(doc, "dt", source);
    model.t0 = detail::field<double>(doc, "t0", source);
    model.reference_norm = detail::field<double>(doc, "reference_norm", source);
    model.singular_values = detail::vector_from_json(doc, "singular_values", source);
    model.eigenvalues = detail::complex_vector_from_json(detail::field<nlohmann::json>(doc, "eigenvalues", source), source);
    model.amplitudes = detail::complex_vector_from_json(detail::field<nlohmann::json>(doc, "amplitudes", source), source);
    const auto& modes = detail::field<nlohmann::json>(doc, "modes", source);
    if (model.rank < 1 || model.eigenvalues.size() != model.rank ||
        model.amplitudes.size() != model.rank || modes.size() != static_cast<std::size_t>(model.rank)) {
        throw ParseError(source, 0, "DMD model arrays disagree with rank");
    }
    for (int j = 0; j < model.rank; ++j) {
        const auto col = detail::complex_vector_from_json(modes[static_cast<std::size_t>(j)], source);
        if (j == 0) {
            model.modes.resize(col.size(), model.rank);
        } else if (col.size() != model.modes.rows()) {
            throw ParseError(source, 0, "DMD modes have unequal lengths");
        }
        model.modes.col(j) = col;
    }
    return model;
}

void save_model(const DmdModel& model, const std::filesystem::path& path)
{
    detail::write_json_file(to_json(model), path);
}

DmdModel load_model(const std::filesystem::path& path)
{
    return model_from_json(detail::read_json_file(path), path.string());
}

} // namespace rh::dmd
