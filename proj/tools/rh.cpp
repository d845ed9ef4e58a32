// Command-line front end. Exit codes: 0 success, 2 argument error,
// 3 numeric or degeneracy error, 4 I/O error.

#include "rh/diagnostics.hpp"
#include "rh/dmd.hpp"
#include "rh/errors.hpp"
#include "rh/geometry.hpp"
#include "rh/mesh_io.hpp"
#include "rh/pipeline.hpp"
#include "rh/response.hpp"
#include "rh/subspaces.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rh;

namespace {

std::vector<double> parse_list(const std::string& text, const std::string& what)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) {
                throw std::invalid_argument(cell);
            }
        } catch (const std::exception&) {
            throw ArgumentError(what + ": '" + cell + "' is not a number");
        }
    }
    if (out.empty()) {
        throw ArgumentError(what + " is empty");
    }
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> read_numbers(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<double> out;
    std::string token;
    std::size_t line = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line;
        std::replace(raw.begin(), raw.end(), ',', ' ');
        std::istringstream ls(raw);
        while (ls >> token) {
            if (token[0] == '#') {
                break;
            }
            try {
                out.push_back(std::stod(token));
            } catch (const std::exception&) {
                throw ParseError(path.string(), line, "bad number '" + token + "'");
            }
        }
    }
    return out;
}

void write_json(const json& doc, const std::string& out)
{
    if (out.empty() || out == "-") {
        std::cout << doc.dump(2) << '\n';
        return;
    }
    std::ofstream file(out);
    if (!file) {
        throw IoError("cannot write " + out);
    }
    file << doc.dump(2) << '\n';
}

void write_vector(const Eigen::VectorXd& v, const std::string& out)
{
    std::ofstream file;
    if (!out.empty() && out != "-") {
        file.open(out);
        if (!file) {
            throw IoError("cannot write " + out);
        }
    }
    std::ostream& os = file.is_open() ? static_cast<std::ostream&>(file) : std::cout;
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        os << v(i) << '\n';
    }
}

json vector_json(const Eigen::VectorXd& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

json complex_list(const std::vector<dmd::Complex>& values)
{
    json out = json::array();
    for (const auto& z : values) {
        out.push_back({z.real(), z.imag()});
    }
    return out;
}

// Config file plus one --<field> flag per CampaignConfig field.
struct ConfigOptions {
    std::string path;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App* app)
    {
        app->add_option("--config", path, "campaign config (JSON)");
        const json defaults = pipeline::to_json(pipeline::CampaignConfig{});
        for (const auto& item : defaults.items()) {
            app->add_option("--" + item.key(), overrides[item.key()], "override config field '" + item.key() + "'");
        }
    }

    fs::path base_dir() const { return path.empty() ? fs::path{} : fs::path(path).parent_path(); }

    pipeline::CampaignConfig resolve() const
    {
        json doc = path.empty() ? json::object() : pipeline::to_json(pipeline::load_config(path));
        const json defaults = pipeline::to_json(pipeline::CampaignConfig{});
        bool seed_flag = false;
        for (const auto& [key, text] : overrides) {
            if (text.empty()) {
                continue;
            }
            seed_flag = seed_flag || key == "seed";
            if (defaults[key].is_string()) {
                doc[key] = text;
                continue;
            }
            try {
                doc[key] = json::parse(text);
            } catch (const json::exception&) {
                throw ArgumentError("--" + key + ": cannot parse '" + text + "'");
            }
        }
        pipeline::CampaignConfig config;
        try {
            config = pipeline::config_from_json(doc, path.empty() ? "<flags>" : path);
        } catch (const ParseError& e) {
            if (path.empty()) {
                throw ArgumentError(e.what());
            }
            // The file itself parsed above, so the bad value came from a flag.
            throw ArgumentError(std::string("config override: ") + e.what());
        }
        if (!seed_flag) {
            config.seed = pipeline::seed_from_environment(config.seed);
        }
        config.validate();
        return config;
    }
};

// Rows of a CSV with a header; returns the header and numeric cells. Empty
// cells become NaN.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::size_t line = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line;
        if (!raw.empty() && raw.back() == '\r') {
            raw.pop_back();
        }
        if (raw.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(raw);
        for (std::string c; std::getline(ss, c, ',');) {
            cells.push_back(c);
        }
        if (header.empty()) {
            header = cells;
            continue;
        }
        if (cells.size() != header.size()) {
            throw ParseError(path.string(), line, "expected " + std::to_string(header.size()) + " fields");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            try {
                row.push_back(c.empty() ? std::nan("") : std::stod(c));
            } catch (const std::exception&) {
                throw ParseError(path.string(), line, "bad number '" + c + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (header.empty()) {
        throw ParseError(path.string(), line, "file is empty");
    }
    return {header, rows};
}

int run(int argc, char** argv)
{
    CLI::App app{"Reduced-order hull design: FFD, DMD, active subspaces, response surfaces"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress warnings");

    // ffd apply
    auto* ffd = app.add_subcommand("ffd", "free-form deformation")->require_subcommand(1);
    auto* ffd_apply = ffd->add_subcommand("apply", "deform a mesh with the configured lattice");
    ConfigOptions ffd_cfg;
    ffd_cfg.attach(ffd_apply);
    std::string ffd_in, ffd_out, ffd_mu, ffd_mu_file;
    ffd_apply->add_option("--mesh-in", ffd_in, "input mesh (.stl or indexed); default: config mesh");
    ffd_apply->add_option("--out", ffd_out, "output mesh")->required();
    ffd_apply->add_option("--mu", ffd_mu, "comma-separated raw parameters");
    ffd_apply->add_option("--mu-file", ffd_mu_file, "file of raw parameters");

    // dmd
    auto* dmd_cmd = app.add_subcommand("dmd", "dynamic mode decomposition")->require_subcommand(1);
    auto* dmd_fit = dmd_cmd->add_subcommand("fit", "fit a model to a snapshot file");
    std::string snap_path, model_out, rank_text = "energy:0.9999";
    std::optional<double> win_start, win_end;
    dmd_fit->add_option("--snapshots", snap_path, "snapshot file (.txt or .bin)")->required();
    dmd_fit->add_option("--rank", rank_text, "fixed rank or energy:<fraction>");
    dmd_fit->add_option("--t-start", win_start, "window start time");
    dmd_fit->add_option("--t-end", win_end, "window end time");
    dmd_fit->add_option("--out", model_out, "model file (JSON)")->required();

    auto* dmd_forecast = dmd_cmd->add_subcommand("forecast", "state at a future time");
    std::string model_in, state_out;
    double forecast_time = 0.0;
    dmd_forecast->add_option("--model", model_in, "model file")->required();
    dmd_forecast->add_option("--time", forecast_time, "absolute time")->required();
    dmd_forecast->add_option("--out", state_out, "state file, one value per line (default stdout)");

    auto* dmd_steady = dmd_cmd->add_subcommand("steady", "asymptotic steady state");
    double steady_tol = 1e-3;
    dmd_steady->add_option("--model", model_in, "model file")->required();
    dmd_steady->add_option("--tol", steady_tol, "unit-eigenvalue tolerance");
    dmd_steady->add_option("--out", state_out, "state file (default stdout)");

    // as estimate
    auto* as_cmd = app.add_subcommand("as", "active subspaces")->require_subcommand(1);
    auto* as_est = as_cmd->add_subcommand("estimate", "active subspace from a sample file");
    std::string samples_path, as_out, as_grad = "file";
    int as_dim = 0, as_neighbors = 0;
    as_est->add_option("--samples", samples_path, "CSV x1..xm,g1..gm,f in scaled coordinates")->required();
    as_est->add_option("--gradients", as_grad, "file, local-linear or global-linear");
    as_est->add_option("--neighbors", as_neighbors, "local-linear neighbour count (0: 2m+1)");
    as_est->add_option("--dim", as_dim, "active dimension (0: largest gap)");
    as_est->add_option("--out", as_out, "subspace file (JSON; default stdout)");

    // shared compute
    auto* shared_cmd = app.add_subcommand("shared", "shared subspace")->require_subcommand(1);
    auto* shared_compute = shared_cmd->add_subcommand("compute", "shared subspace of several active subspaces");
    std::vector<std::string> shared_in;
    std::string shared_out;
    shared_compute->add_option("--as", shared_in, "active subspace files")->required();
    shared_compute->add_option("--out", shared_out, "output file (JSON; default stdout)");

    // rs fit | minimize
    auto* rs_cmd = app.add_subcommand("rs", "response surfaces")->require_subcommand(1);
    auto* rs_fit = rs_cmd->add_subcommand("fit", "fit a polynomial surface");
    std::string rs_data, rs_out;
    int rs_degree = 2;
    bool rs_feasible_only = false;
    rs_fit->add_option("--data", rs_data, "CSV y1..yM,value[,feasible]")->required();
    rs_fit->add_option("--degree", rs_degree, "1 or 2");
    rs_fit->add_flag("--feasible-only", rs_feasible_only, "use rows with feasible = 1");
    rs_fit->add_option("--out", rs_out, "surface file (JSON; default stdout)");

    auto* rs_min = rs_cmd->add_subcommand("minimize", "minimum of a surface over a box");
    std::string rs_surface, rs_lower, rs_upper, rs_min_out;
    rs_min->add_option("--surface", rs_surface, "surface file")->required();
    rs_min->add_option("--lower", rs_lower, "comma-separated lower bounds")->required();
    rs_min->add_option("--upper", rs_upper, "comma-separated upper bounds")->required();
    rs_min->add_option("--out", rs_min_out, "result file (JSON; default stdout)");

    // campaign run | sample
    auto* camp = app.add_subcommand("campaign", "sampling campaigns")->require_subcommand(1);
    auto* camp_run = camp->add_subcommand("run", "evaluate every sample and write records");
    ConfigOptions run_cfg;
    run_cfg.attach(camp_run);
    std::string run_out;
    camp_run->add_option("--out", run_out, "output directory")->required();

    auto* camp_sample = camp->add_subcommand("sample", "write the sampled parameters only");
    ConfigOptions sample_cfg;
    sample_cfg.attach(camp_sample);
    std::string sample_out;
    camp_sample->add_option("--out", sample_out, "CSV file (default stdout)");

    // optimize
    auto* opt = app.add_subcommand("optimize", "shared subspace, response surface and constrained minimum");
    ConfigOptions opt_cfg;
    opt_cfg.attach(opt);
    std::string opt_records, opt_out;
    opt->add_option("--records", opt_records, "records CSV from campaign run")->required();
    opt->add_option("--out", opt_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::optional<ScopedWarningCapture> silence;
    if (quiet) {
        silence.emplace();
    }

    if (*ffd_apply) {
        const auto config = ffd_cfg.resolve();
        const auto mesh = ffd_in.empty() ? pipeline::load_reference_mesh(config, ffd_cfg.base_dir())
                                         : geometry::load_mesh(ffd_in).mesh;
        std::vector<double> mu;
        if (!ffd_mu.empty()) {
            mu = parse_list(ffd_mu, "--mu");
        } else if (!ffd_mu_file.empty()) {
            mu = read_numbers(ffd_mu_file);
        } else {
            throw ArgumentError("ffd apply needs --mu or --mu-file");
        }
        const auto deformed = geometry::deform_mesh(config.make_lattice(), mu, mesh);
        geometry::save_mesh(deformed, ffd_out);
        json info{{"vertices", deformed.vertices.size()}, {"faces", deformed.faces.size()}};
        try {
            info["volume_below_cut"] = geometry::volume_below_plane(deformed, config.z_cut);
        } catch (const GeometryError& e) {
            warn(std::string("volume not available: ") + e.what());
        }
        std::cout << info.dump() << '\n';
    } else if (*dmd_fit) {
        auto set = dmd::load_snapshots(snap_path);
        if (win_start || win_end) {
            set = dmd::time_window(set, win_start.value_or(set.t0), win_end.value_or(set.t_end()));
        }
        const auto model = dmd::fit(set, dmd::RankPolicy::parse(rank_text));
        dmd::save_model(model, model_out);
        std::cout << json{{"rank", model.rank}, {"spectral_radius", model.spectral_radius()}}.dump() << '\n';
    } else if (*dmd_forecast) {
        write_vector(dmd::forecast(dmd::load_model(model_in), forecast_time), state_out);
    } else if (*dmd_steady) {
        const auto steady = dmd::steady_state(dmd::load_model(model_in), steady_tol);
        write_vector(steady.state, state_out);
        std::cerr << json{{"steady", complex_list(steady.steady_eigenvalues)},
                          {"divergent", complex_list(steady.divergent_eigenvalues)},
                          {"persistent", complex_list(steady.persistent_eigenvalues)}}
                         .dump()
                  << '\n';
    } else if (*as_est) {
        auto samples = subspaces::load_samples(samples_path);
        if (as_grad != "file") {
            subspaces::GradientOptions opts;
            opts.method = subspaces::GradientOptions::parse_method(as_grad);
            opts.neighbors = as_neighbors;
            samples.gradients = subspaces::estimate_gradients(samples.inputs, samples.values, opts);
        }
        const auto rule = as_dim > 0 ? subspaces::DimensionRule::fixed(as_dim) : subspaces::DimensionRule::largest_gap();
        write_json(subspaces::to_json(subspaces::estimate_active_subspace(samples, rule)), as_out);
    } else if (*shared_compute) {
        std::vector<subspaces::ActiveSubspace> sources;
        for (const auto& p : shared_in) {
            std::ifstream in(p);
            if (!in) {
                throw IoError("cannot open " + p);
            }
            json doc;
            try {
                doc = json::parse(in);
            } catch (const json::exception& e) {
                throw ParseError(p, 0, e.what());
            }
            sources.push_back(subspaces::active_subspace_from_json(doc, p));
        }
        write_json(subspaces::to_json(subspaces::compute_shared_subspace(sources)), shared_out);
    } else if (*rs_fit) {
        const auto [header, rows] = read_csv(rs_data);
        Eigen::Index M = 0;
        while (M < static_cast<Eigen::Index>(header.size()) && header[static_cast<std::size_t>(M)] == "y" + std::to_string(M + 1)) {
            ++M;
        }
        const auto value_col = static_cast<std::size_t>(M);
        if (M == 0 || value_col >= header.size() || header[value_col] != "value") {
            throw ParseError(rs_data, 1, "header must be y1..yM,value[,feasible]");
        }
        const auto feasible_col = std::find(header.begin(), header.end(), "feasible");
        if (rs_feasible_only && feasible_col == header.end()) {
            throw ArgumentError("--feasible-only needs a feasible column");
        }
        std::vector<const std::vector<double>*> chosen;
        for (const auto& r : rows) {
            if (!rs_feasible_only || r[static_cast<std::size_t>(feasible_col - header.begin())] != 0.0) {
                chosen.push_back(&r);
            }
        }
        Eigen::MatrixXd Y(static_cast<Eigen::Index>(chosen.size()), M);
        Eigen::VectorXd v(static_cast<Eigen::Index>(chosen.size()));
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            for (Eigen::Index j = 0; j < M; ++j) {
                Y(static_cast<Eigen::Index>(i), j) = (*chosen[i])[static_cast<std::size_t>(j)];
            }
            v(static_cast<Eigen::Index>(i)) = (*chosen[i])[value_col];
        }
        write_json(response::to_json(response::fit_polynomial(Y, v, rs_degree)), rs_out);
    } else if (*rs_min) {
        const auto surface = response::load_surface(rs_surface);
        const response::Box box{to_vector(parse_list(rs_lower, "--lower")), to_vector(parse_list(rs_upper, "--upper"))};
        const auto best = response::minimize_surface(surface, box);
        write_json(json{{"point", vector_json(best.point)}, {"value", best.value}}, rs_min_out);
    } else if (*camp_run) {
        const auto config = run_cfg.resolve();
        const auto result = pipeline::run_campaign(config, run_cfg.base_dir());
        fs::create_directories(run_out);
        pipeline::save_records(result.records, fs::path(run_out) / "records.csv");
        pipeline::save_config(config, fs::path(run_out) / "config.json");
        std::ofstream timing(fs::path(run_out) / "timing.csv");
        if (!timing) {
            throw IoError("cannot write timing.csv in " + run_out);
        }
        pipeline::write_timing_csv(timing, result.records);
        std::cout << json{{"samples", result.records.size()}, {"failures", result.failures}, {"seed", config.seed}}.dump()
                  << '\n';
    } else if (*camp_sample) {
        const auto config = sample_cfg.resolve();
        const auto scaler = config.scaler();
        const auto mu = pipeline::sample_parameters(config.samples, scaler.lower(), scaler.upper(), config.seed);
        std::ofstream file;
        if (!sample_out.empty()) {
            file.open(sample_out);
            if (!file) {
                throw IoError("cannot write " + sample_out);
            }
        }
        std::ostream& os = file.is_open() ? static_cast<std::ostream&>(file) : std::cout;
        os << "index";
        for (Eigen::Index j = 0; j < mu.cols(); ++j) {
            os << ",mu" << j + 1;
        }
        os << '\n' << std::setprecision(17);
        for (Eigen::Index i = 0; i < mu.rows(); ++i) {
            os << i;
            for (Eigen::Index j = 0; j < mu.cols(); ++j) {
                os << ',' << mu(i, j);
            }
            os << '\n';
        }
    } else if (*opt) {
        const auto config = opt_cfg.resolve();
        const auto records = pipeline::load_records(opt_records);
        const auto surrogate = pipeline::make_surrogate(config, opt_cfg.base_dir());
        const auto report = pipeline::optimize_reduced(records, config, surrogate.get());
        fs::create_directories(opt_out);
        pipeline::save_report(report, fs::path(opt_out) / "report.json");
        pipeline::write_summary_files(report, records, opt_out);
        std::cout << json{{"feasible", report.feasible.size()},
                          {"minimizer_raw", vector_json(report.minimizer_raw)},
                          {"predicted_resistance", report.predicted_resistance}}
                         .dump()
                  << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const rh::Error& e) {
        std::cerr << "rh: error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "rh: error: " << e.what() << '\n';
        return 3;
    }
}
