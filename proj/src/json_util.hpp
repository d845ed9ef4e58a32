#pragma once

#include "rh/errors.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <complex>
#include <filesystem>
#include <fstream>
#include <string>

namespace rh::detail {

using nlohmann::json;

template <class T>
T field(const json& doc, const char* key, const std::string& source)
{
    if (!doc.is_object() || !doc.contains(key)) {
        throw ParseError(source, 0, std::string("missing field '") + key + "'");
    }
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(source, 0, std::string("field '") + key + "': " + e.what());
    }
}

inline json vector_to_json(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const json& doc, const char* key, const std::string& source)
{
    const auto values = field<std::vector<double>>(doc, key, source);
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// {"rows": r, "cols": c, "data": [...]} with data in column-major order.
inline json matrix_to_json(const Eigen::MatrixXd& m)
{
    return json{{"rows", m.rows()},
                {"cols", m.cols()},
                {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Eigen::MatrixXd matrix_from_json(const json& doc, const char* key, const std::string& source)
{
    const auto node = field<json>(doc, key, source);
    const auto rows = field<Eigen::Index>(node, "rows", source);
    const auto cols = field<Eigen::Index>(node, "cols", source);
    const auto data = field<std::vector<double>>(node, "data", source);
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
        throw ParseError(source, 0, std::string("matrix '") + key + "' has inconsistent shape");
    }
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

inline json complex_vector_to_json(const Eigen::VectorXcd& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back({v(i).real(), v(i).imag()});
    }
    return out;
}

inline Eigen::VectorXcd complex_vector_from_json(const json& node, const std::string& source)
{
    if (!node.is_array()) {
        throw ParseError(source, 0, "expected an array of [re, im] pairs");
    }
    Eigen::VectorXcd v(static_cast<Eigen::Index>(node.size()));
    for (std::size_t i = 0; i < node.size(); ++i) {
        const auto& pair = node[i];
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
            throw ParseError(source, 0, "complex entry " + std::to_string(i) + " is not [re, im]");
        }
        v(static_cast<Eigen::Index>(i)) = {pair[0].get<double>(), pair[1].get<double>()};
    }
    return v;
}

inline void write_json_file(const json& doc, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << doc.dump(2) << '\n';
    if (!out) {
        throw IoError("error while writing " + path.string());
    }
}

inline json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        // nlohmann reports a byte offset; translate it to a line number.
        std::ifstream again(path);
        std::size_t line = 1;
        std::size_t pos = 0;
        char c;
        while (pos < e.byte && again.get(c)) {
            if (c == '\n') {
                ++line;
            }
            ++pos;
        }
        throw ParseError(path.string(), line, e.what());
    }
}

} // namespace rh::detail
