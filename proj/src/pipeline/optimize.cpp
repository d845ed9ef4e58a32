#include "rh/errors.hpp"
#include "rh/pipeline.hpp"

#include "../json_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rh::pipeline {

using nlohmann::json;

namespace {

// Linear interpolation between order statistics.
double percentile(std::vector<double> values, double p)
{
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

subspaces::GradientOptions gradient_options(const CampaignConfig& config, const SurrogateModel* surrogate,
                                            bool volume)
{
    subspaces::GradientOptions opts;
    opts.method = subspaces::GradientOptions::parse_method(config.gradient_method);
    opts.neighbors = config.neighbors;
    if (opts.method == subspaces::GradientMethod::ExactCallback) {
        const char* what = volume ? "volume" : "resistance";
        if (surrogate == nullptr) {
            throw ArgumentError(std::string("exact gradients need a surrogate for the ") + what);
        }
        opts.callback = [surrogate, volume, what](const Eigen::VectorXd& x) {
            auto g = volume ? surrogate->volume_gradient(x) : surrogate->resistance_gradient(x);
            if (!g) {
                throw ArgumentError(std::string("surrogate '") + surrogate->name() + "' has no exact " + what +
                                    " gradient");
            }
            return *g;
        };
    }
    return opts;
}

Eigen::MatrixXd rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
    }
    return out;
}

Eigen::VectorXd entries(const Eigen::VectorXd& v, const std::vector<std::size_t>& idx)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
    }
    return out;
}

} // namespace

response::FeasibleBand resolve_band(const CampaignConfig& config, const Eigen::VectorXd& volumes)
{
    if (config.band_mode == "none") {
        return {};
    }
    if (config.band_mode == "absolute") {
        return {config.band_lower, config.band_upper};
    }
    if (volumes.size() == 0) {
        throw ArgumentError("percentile band needs at least one volume");
    }
    const std::vector<double> v(volumes.data(), volumes.data() + volumes.size());
    return {percentile(v, config.band_lower), percentile(v, config.band_upper)};
}

OptimizationReport optimize_reduced(const std::vector<RunRecord>& records, const CampaignConfig& config,
                                    const SurrogateModel* surrogate)
{
    config.validate();
    OptimizationReport report;
    for (const auto& r : records) {
        if (r.ok) {
            report.used.push_back(r.index);
        }
    }
    const auto N = static_cast<Eigen::Index>(report.used.size());
    if (N < 2) {
        throw ArgumentError("optimization needs at least two successful records");
    }
    const Eigen::Index m = records.front().mu_scaled.size();
    Eigen::MatrixXd X(N, m);
    Eigen::VectorXd R(N), V(N);
    {
        Eigen::Index row = 0;
        for (const auto& r : records) {
            if (!r.ok) {
                continue;
            }
            if (r.mu_scaled.size() != m) {
                throw ArgumentError("records have inconsistent parameter counts");
            }
            X.row(row) = r.mu_scaled.transpose();
            R(row) = r.resistance;
            V(row) = r.volume;
            ++row;
        }
    }

    const auto rule = config.active_dim > 0 ? subspaces::DimensionRule::fixed(config.active_dim)
                                            : subspaces::DimensionRule::largest_gap();
    const auto GR = subspaces::estimate_gradients(X, R, gradient_options(config, surrogate, false));
    report.resistance_as = subspaces::estimate_active_subspace({X, GR, R}, rule);
    const int M = report.resistance_as.M;

    report.shared_volume = config.shared_volume;
    if (config.shared_volume) {
        // The volume subspace takes the resistance dimension so Q is defined.
        const auto GV = subspaces::estimate_gradients(X, V, gradient_options(config, surrogate, true));
        report.volume_as = subspaces::estimate_active_subspace({X, GV, V}, subspaces::DimensionRule::fixed(M));
        const std::vector<subspaces::ActiveSubspace> sources{report.resistance_as, *report.volume_as};
        const auto shared = subspaces::compute_shared_subspace(sources);
        report.Q = shared.Q;
        report.shared_residual = shared.residual;
        report.shared_condition = shared.condition;
    } else {
        report.Q = report.resistance_as.W1();
    }
    report.reduced = X * report.Q;

    const auto band = resolve_band(config, V);
    report.band_lower = band.lower;
    report.band_upper = band.upper;
    const auto feasible_rows = response::filter_feasible(V, band);
    for (auto i : feasible_rows) {
        report.feasible.push_back(report.used[i]);
    }
    const auto P = response::PolynomialSurface::coefficient_count(M, config.rs_degree);
    const auto needed = static_cast<std::size_t>(std::max<Eigen::Index>(P, 10));
    if (feasible_rows.size() < needed) {
        throw EmptyFeasibleSetError("only " + std::to_string(feasible_rows.size()) +
                                    " samples lie in the feasible band; the surface needs " +
                                    std::to_string(needed));
    }

    const Eigen::MatrixXd Yf = rows(report.reduced, feasible_rows);
    report.resistance_surface = response::fit_polynomial(Yf, entries(R, feasible_rows), config.rs_degree);
    report.region = response::bounding_box(Yf);
    const auto best = response::minimize_surface(report.resistance_surface, report.region);
    report.minimizer_reduced = best.point;
    report.predicted_resistance = best.value;

    const response::Box scaled_box{Eigen::VectorXd::Constant(m, -1.0), Eigen::VectorXd::Constant(m, 1.0)};
    const auto back = response::preimage(best.point, report.Q, scaled_box);
    report.minimizer_scaled = back.point;
    report.preimage_residual = back.residual;
    report.minimizer_raw = config.scaler().unscale(back.point);

    const auto P_all = static_cast<Eigen::Index>(response::PolynomialSurface::coefficient_count(M, config.rs_degree));
    if (N >= P_all) {
        report.volume_surface = response::fit_polynomial(report.reduced, V, config.rs_degree);
        report.predicted_volume = response::evaluate(*report.volume_surface, best.point);
        const double slack = report.volume_surface->rmse;
        report.volume_within_band =
            *report.predicted_volume >= band.lower - slack && *report.predicted_volume <= band.upper + slack;
    }
    return report;
}

namespace {

json sizes_json(const std::vector<std::size_t>& v)
{
    return json(v);
}

json optional_number(double v)
{
    return std::isfinite(v) ? json(v) : json();
}

double number_or_inf(const json& doc, const char* key, const std::string& source, double sign = 1.0)
{
    if (!doc.contains(key)) {
        throw ParseError(source, 0, std::string("missing field '") + key + "'");
    }
    return doc[key].is_null() ? sign * std::numeric_limits<double>::infinity()
                              : detail::field<double>(doc, key, source);
}

} // namespace

json to_json(const OptimizationReport& r)
{
    json doc;
    doc["used"] = sizes_json(r.used);
    doc["feasible"] = sizes_json(r.feasible);
    doc["band_lower"] = optional_number(r.band_lower);
    doc["band_upper"] = optional_number(r.band_upper);
    doc["shared_volume"] = r.shared_volume;
    doc["resistance_subspace"] = subspaces::to_json(r.resistance_as);
    doc["volume_subspace"] = r.volume_as ? subspaces::to_json(*r.volume_as) : json();
    doc["Q"] = detail::matrix_to_json(r.Q);
    doc["shared_residual"] = r.shared_residual;
    doc["shared_condition"] = optional_number(r.shared_condition);
    doc["reduced"] = detail::matrix_to_json(r.reduced);
    doc["resistance_surface"] = response::to_json(r.resistance_surface);
    doc["volume_surface"] = r.volume_surface ? response::to_json(*r.volume_surface) : json();
    doc["region"] = {{"lower", detail::vector_to_json(r.region.lower)},
                     {"upper", detail::vector_to_json(r.region.upper)}};
    doc["minimizer_reduced"] = detail::vector_to_json(r.minimizer_reduced);
    doc["minimizer_scaled"] = detail::vector_to_json(r.minimizer_scaled);
    doc["minimizer_raw"] = detail::vector_to_json(r.minimizer_raw);
    doc["preimage_residual"] = detail::vector_to_json(r.preimage_residual);
    doc["predicted_resistance"] = r.predicted_resistance;
    doc["predicted_volume"] = r.predicted_volume ? json(*r.predicted_volume) : json();
    doc["volume_within_band"] = r.volume_within_band ? json(*r.volume_within_band) : json();
    return doc;
}

OptimizationReport report_from_json(const json& doc, const std::string& source)
{
    OptimizationReport r;
    r.used = detail::field<std::vector<std::size_t>>(doc, "used", source);
    r.feasible = detail::field<std::vector<std::size_t>>(doc, "feasible", source);
    r.band_lower = number_or_inf(doc, "band_lower", source, -1.0);
    r.band_upper = number_or_inf(doc, "band_upper", source, 1.0);
    r.shared_volume = detail::field<bool>(doc, "shared_volume", source);
    r.resistance_as = subspaces::active_subspace_from_json(detail::field<json>(doc, "resistance_subspace", source), source);
    const auto vol = detail::field<json>(doc, "volume_subspace", source);
    if (!vol.is_null()) {
        r.volume_as = subspaces::active_subspace_from_json(vol, source);
    }
    r.Q = detail::matrix_from_json(doc, "Q", source);
    r.shared_residual = detail::field<double>(doc, "shared_residual", source);
    r.shared_condition = number_or_inf(doc, "shared_condition", source);
    r.reduced = detail::matrix_from_json(doc, "reduced", source);
    r.resistance_surface = response::surface_from_json(detail::field<json>(doc, "resistance_surface", source), source);
    const auto vs = detail::field<json>(doc, "volume_surface", source);
    if (!vs.is_null()) {
        r.volume_surface = response::surface_from_json(vs, source);
    }
    const auto region = detail::field<json>(doc, "region", source);
    r.region.lower = detail::vector_from_json(region, "lower", source);
    r.region.upper = detail::vector_from_json(region, "upper", source);
    r.minimizer_reduced = detail::vector_from_json(doc, "minimizer_reduced", source);
    r.minimizer_scaled = detail::vector_from_json(doc, "minimizer_scaled", source);
    r.minimizer_raw = detail::vector_from_json(doc, "minimizer_raw", source);
    r.preimage_residual = detail::vector_from_json(doc, "preimage_residual", source);
    r.predicted_resistance = detail::field<double>(doc, "predicted_resistance", source);
    if (doc.contains("predicted_volume") && !doc["predicted_volume"].is_null()) {
        r.predicted_volume = detail::field<double>(doc, "predicted_volume", source);
    }
    if (doc.contains("volume_within_band") && !doc["volume_within_band"].is_null()) {
        r.volume_within_band = detail::field<bool>(doc, "volume_within_band", source);
    }
    return r;
}

void save_report(const OptimizationReport& report, const std::filesystem::path& path)
{
    detail::write_json_file(to_json(report), path);
}

OptimizationReport load_report(const std::filesystem::path& path)
{
    return report_from_json(detail::read_json_file(path), path.string());
}

void check_references(const OptimizationReport& report, const std::vector<RunRecord>& records)
{
    std::set<std::size_t> ok;
    for (const auto& r : records) {
        if (r.ok) {
            ok.insert(r.index);
        }
    }
    const std::set<std::size_t> used(report.used.begin(), report.used.end());
    for (auto i : report.used) {
        if (!ok.count(i)) {
            throw ArgumentError("report uses record " + std::to_string(i) + ", which is missing or failed");
        }
    }
    for (auto i : report.feasible) {
        if (!used.count(i)) {
            throw ArgumentError("report marks record " + std::to_string(i) + " feasible but never used it");
        }
    }
    if (report.reduced.rows() != static_cast<Eigen::Index>(report.used.size())) {
        throw ArgumentError("report reduced coordinates do not match its record list");
    }
}

void write_summary_files(const OptimizationReport& report, const std::vector<RunRecord>& records,
                         const std::filesystem::path& directory)
{
    check_references(report, records);
    std::map<std::size_t, const RunRecord*> by_index;
    for (const auto& r : records) {
        by_index[r.index] = &r;
    }
    const std::set<std::size_t> feasible(report.feasible.begin(), report.feasible.end());
    const auto n = static_cast<Eigen::Index>(report.used.size());
    Eigen::VectorXd R(n), V(n);
    std::vector<bool> flags;
    Eigen::MatrixXd X(n, report.Q.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto* rec = by_index.at(report.used[static_cast<std::size_t>(i)]);
        R(i) = rec->resistance;
        V(i) = rec->volume;
        X.row(i) = rec->mu_scaled.transpose();
        flags.push_back(feasible.count(rec->index) > 0);
    }
    const auto write = [&](const std::string& name, const Eigen::MatrixXd& y, const Eigen::VectorXd& v) {
        const auto path = directory / name;
        std::ofstream out(path);
        if (!out) {
            throw IoError("cannot write " + path.string());
        }
        response::write_summary_csv(out, y, v, flags);
    };
    write("summary_resistance.csv", report.reduced, R);
    write("summary_volume.csv", report.reduced, V);
    write("summary_resistance_active.csv", X * report.resistance_as.W1(), R);
    if (report.volume_as) {
        write("summary_volume_active.csv", X * report.volume_as->W1(), V);
    }
}

} // namespace rh::pipeline
