#include "rh/errors.hpp"
#include "rh/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace rh::pipeline {

namespace {

std::string one_line(std::string text)
{
    std::replace(text.begin(), text.end(), '\n', ' ');
    std::replace(text.begin(), text.end(), ',', ';');
    return text;
}

RunRecord evaluate_sample(const CampaignConfig& config, const SurrogateModel& surrogate,
                          const geometry::ControlLattice& lattice, const geometry::SurfaceMesh& reference,
                          const dmd::RankPolicy& policy, RunRecord record)
{
    const auto started = std::chrono::steady_clock::now();
    try {
        const std::vector<double> mu(record.mu_raw.data(), record.mu_raw.data() + record.mu_raw.size());
        const auto deformed = geometry::deform_mesh(lattice, mu, reference);
        const auto series = surrogate.snapshots(record.index, record.mu_raw, deformed);
        if (std::abs(series.dt - config.dt) > 1e-9 * config.dt) {
            std::ostringstream msg;
            msg << "snapshot dt " << series.dt << " differs from the configured " << config.dt;
            throw ArgumentError(msg.str());
        }
        // Only the configured window enters the fit.
        const auto window = dmd::time_window(series, config.t_start, config.t_end);
        const auto expected = std::llround((config.t_end - config.t_start) / config.dt) + 1;
        if (window.count() != expected) {
            throw ArgumentError("snapshot window holds " + std::to_string(window.count()) + " of " +
                                std::to_string(expected) + " expected snapshots");
        }
        const auto model = dmd::fit(window, policy);
        const Eigen::VectorXd state = config.horizon > 0.0 ? dmd::forecast(model, config.t_end + config.horizon)
                                                           : dmd::steady_state(model, config.steady_tol).state;
        record.resistance = surrogate.resistance(state, deformed);
        const auto closed_form = surrogate.volume(record.mu_raw);
        record.volume = closed_form ? *closed_form : geometry::volume_below_plane(deformed, config.z_cut);
        record.dmd_rank = model.rank;
        record.spectral_radius = model.spectral_radius();
        if (!std::isfinite(record.resistance) || !std::isfinite(record.volume) || record.volume < 0.0) {
            throw NumericError("non-finite resistance or invalid volume");
        }
    } catch (const std::exception& e) {
        record.ok = false;
        record.failure = one_line(e.what());
        record.resistance = 0.0;
        record.volume = 0.0;
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return record;
}

} // namespace

CampaignResult run_campaign(const CampaignConfig& config, const SurrogateModel& surrogate,
                            const geometry::SurfaceMesh& reference)
{
    config.validate();
    reference.validate();
    const auto lattice = config.make_lattice();
    const auto scaler = config.scaler();
    const auto policy = config.rank_policy();
    const Eigen::MatrixXd mu = sample_parameters(config.samples, scaler.lower(), scaler.upper(), config.seed);

    const auto N = static_cast<std::size_t>(config.samples);
    std::vector<RunRecord> records(N);
    for (std::size_t i = 0; i < N; ++i) {
        records[i].index = i;
        records[i].mu_raw = mu.row(static_cast<Eigen::Index>(i)).transpose();
        records[i].mu_scaled = scaler.scale(records[i].mu_raw);
    }

    std::size_t workers = config.threads > 0 ? static_cast<std::size_t>(config.threads)
                                             : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, N);
    // Each worker claims the next index; results land in their own slot, so
    // the output order never depends on scheduling.
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < N; i = next++) {
            records[i] = evaluate_sample(config, surrogate, lattice, reference, policy, std::move(records[i]));
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t) {
            pool.emplace_back(work);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    CampaignResult result;
    result.failures = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const RunRecord& r) { return !r.ok; }));
    if (static_cast<double>(result.failures) > config.max_failure_fraction * static_cast<double>(N)) {
        const auto first = std::find_if(records.begin(), records.end(), [](const RunRecord& r) { return !r.ok; });
        std::ostringstream msg;
        msg << "campaign failed: " << result.failures << " of " << N << " samples failed (limit "
            << config.max_failure_fraction * 100.0 << "%); sample " << first->index << ": " << first->failure;
        throw NumericError(msg.str());
    }
    result.records = std::move(records);
    return result;
}

CampaignResult run_campaign(const CampaignConfig& config, const std::filesystem::path& base_dir)
{
    const auto surrogate = make_surrogate(config, base_dir);
    return run_campaign(config, *surrogate, load_reference_mesh(config, base_dir));
}

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records)
{
    const Eigen::Index m = records.empty() ? 0 : records.front().mu_raw.size();
    out << "index,status";
    for (Eigen::Index j = 0; j < m; ++j) {
        out << ",mu" << j + 1;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        out << ",x" << j + 1;
    }
    out << ",resistance,volume,dmd_rank,spectral_radius,failure\n" << std::setprecision(17);
    for (const auto& r : records) {
        if (r.mu_raw.size() != m || r.mu_scaled.size() != m) {
            throw ArgumentError("records have inconsistent parameter counts");
        }
        out << r.index << ',' << (r.ok ? "ok" : "failed");
        for (Eigen::Index j = 0; j < m; ++j) {
            out << ',' << r.mu_raw(j);
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            out << ',' << r.mu_scaled(j);
        }
        if (r.ok) {
            out << ',' << r.resistance << ',' << r.volume << ',' << r.dmd_rank << ',' << r.spectral_radius << ",\n";
        } else {
            out << ",,,,," << one_line(r.failure) << '\n';
        }
    }
}

std::vector<RunRecord> read_records_csv(std::istream& in, const std::string& source)
{
    std::string raw;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    Eigen::Index m = 0;
    std::vector<RunRecord> records;
    const auto number = [&](const std::string& cell) {
        try {
            std::size_t used = 0;
            const double v = std::stod(cell, &used);
            if (used == cell.size()) {
                return v;
            }
        } catch (const std::exception&) {
        }
        throw ParseError(source, line_no, "bad number '" + cell + "'");
    };
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') {
            raw.pop_back();
        }
        if (raw.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(raw);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (raw.back() == ',') {
            cells.emplace_back();
        }
        if (columns == 0) {
            columns = cells.size();
            if (columns < 7 || (columns - 7) % 2 != 0 || cells[0] != "index" || cells[1] != "status") {
                throw ParseError(source, line_no, "unexpected records header");
            }
            m = static_cast<Eigen::Index>((columns - 7) / 2);
            continue;
        }
        if (cells.size() != columns) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(columns) + " fields, got " + std::to_string(cells.size()));
        }
        RunRecord r;
        r.index = static_cast<std::size_t>(number(cells[0]));
        if (cells[1] != "ok" && cells[1] != "failed") {
            throw ParseError(source, line_no, "status must be ok or failed");
        }
        r.ok = cells[1] == "ok";
        r.mu_raw.resize(m);
        r.mu_scaled.resize(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            r.mu_raw(j) = number(cells[static_cast<std::size_t>(2 + j)]);
            r.mu_scaled(j) = number(cells[static_cast<std::size_t>(2 + m + j)]);
        }
        const auto base = static_cast<std::size_t>(2 + 2 * m);
        if (r.ok) {
            r.resistance = number(cells[base]);
            r.volume = number(cells[base + 1]);
            r.dmd_rank = static_cast<int>(number(cells[base + 2]));
            r.spectral_radius = number(cells[base + 3]);
        } else {
            r.failure = cells[base + 4];
        }
        records.push_back(std::move(r));
    }
    if (columns == 0) {
        throw ParseError(source, line_no, "records file is empty");
    }
    return records;
}

void save_records(const std::vector<RunRecord>& records, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    write_records_csv(out, records);
    if (!out) {
        throw IoError("error while writing " + path.string());
    }
}

std::vector<RunRecord> load_records(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_records_csv(in, path.string());
}

void write_timing_csv(std::ostream& out, const std::vector<RunRecord>& records)
{
    out << "index,seconds\n" << std::setprecision(6);
    for (const auto& r : records) {
        out << r.index << ',' << r.seconds << '\n';
    }
}

} // namespace rh::pipeline
