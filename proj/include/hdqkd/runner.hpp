#pragma once

#include "hdqkd/click_io.hpp"
#include "hdqkd/config.hpp"
#include "hdqkd/keyrate.hpp"
#include "hdqkd/primal_oracle.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

namespace hdqkd {

struct SweepRow {
    RateReport report;
    PresetSpec preset;
};

namespace detail {

inline double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace detail

// One (d, preset) series over the visibility grid. Sequential so the previous
// point can warm-start the next one.
inline std::vector<SweepRow> run_series(long d, const PresetSpec& preset, const RunConfig& cfg) {
    std::vector<SweepRow> rows;
    PipelineConfig pipe = cfg.pipeline_config(preset);
    std::optional<DualPoint> warm;
    for (double v : cfg.visibilities()) {
        const double t0 = detail::now_ms();
        pipe.solver.warm_start = cfg.warm_start ? warm : std::nullopt;
        RateReport rep = full_pipeline(NoiseModelSpec(d, v), pipe);
        rep.wallclock_ms = detail::now_ms() - t0;
        if (cfg.warm_start) warm = rep.bound.point;
        rows.push_back(SweepRow{std::move(rep), preset});
    }
    return rows;
}

// All configured series; distinct series run on the worker pool, outputs are
// merged in configuration order.
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
    struct Task {
        long d;
        PresetSpec preset;
    };
    std::vector<Task> tasks;
    for (long d : cfg.dims)
        for (const auto& p : cfg.presets) tasks.push_back(Task{d, p});

    std::vector<std::vector<SweepRow>> results(tasks.size());
    if (cfg.jobs > 1 && tasks.size() > 1) {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(tasks.size());
        const int nthreads = std::min<int>(cfg.jobs, int(tasks.size()));
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
                    try {
                        results[i] = run_series(tasks[i].d, tasks[i].preset, cfg);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    } else {
        for (size_t i = 0; i < tasks.size(); ++i)
            results[i] = run_series(tasks[i].d, tasks[i].preset, cfg);
    }

    std::vector<SweepRow> rows;
    for (auto& r : results)
        for (auto& row : r) rows.push_back(std::move(row));
    return rows;
}

inline std::string format_double(double v, const char* fmt = "%.12g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

inline std::string results_csv_header() {
    return "d,D,v,preset,p_guess_ub,hmin_bits,leak_bits,rate_bits,clamped_rate,wallclock_ms";
}

inline std::string results_csv_row(const SweepRow& row) {
    const RateReport& r = row.report;
    std::string v = r.visibility ? format_double(*r.visibility, "%.10g") : "nan";
    std::string out;
    out += std::to_string(r.d) + "," + std::to_string(r.block_size) + "," + v + "," +
           row.preset.label() + "," + format_double(r.p_guess_ub) + "," +
           format_double(r.hmin_bits) + "," + format_double(r.leak_bits) + "," +
           format_double(r.rate_bits) + "," + format_double(r.clamped_rate) + "," +
           format_double(r.wallclock_ms, "%.3f");
    return out;
}

inline void write_results_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << results_csv_header() << "\n";
    for (const auto& row : rows) out << results_csv_row(row) << "\n";
}

inline void write_metadata_json(const std::string& path, const RunConfig& cfg,
                                const std::vector<SweepRow>& rows,
                                const std::vector<std::string>& extra_warnings = {}) {
    nlohmann::json meta;
    meta["tool"] = "hdqkd";
    meta["mode"] = cfg.mode;
    meta["seed"] = cfg.seed;
    meta["constraints"] = cfg.constraint_set;
    meta["optimizer"] = {{"starts", cfg.starts},
                         {"max_evals", cfg.max_evals},
                         {"tolerance", cfg.tolerance},
                         {"fast_path", cfg.fast_path},
                         {"polish", cfg.polish},
                         {"warm_start", cfg.warm_start}};
    meta["tolerances"] = {{"feasibility", kFeasTol},
                          {"objective_reproduction", kObjectiveTol},
                          {"sandwich", kSandwichTol}};
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json jr;
        jr["d"] = row.report.d;
        jr["D"] = row.report.block_size;
        if (row.report.visibility) jr["v"] = *row.report.visibility;
        jr["preset"] = row.preset.label();
        jr["warnings"] = row.report.warnings;
        jr["fast_path"] = row.report.fast_path_used;
        if (!row.report.subspaces.empty()) {
            nlohmann::json subs = nlohmann::json::array();
            for (const auto& s : row.report.subspaces)
                subs.push_back({{"block_start", s.block_start},
                                {"weight", s.weight},
                                {"p_guess_ub", s.p_guess_ub},
                                {"rate_bits", s.rate_bits},
                                {"clamped_rate", s.clamped_rate}});
            jr["subspaces"] = std::move(subs);
        }
        jrows.push_back(std::move(jr));
    }
    meta["rows"] = std::move(jrows);
    meta["warnings"] = extra_warnings;
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << meta.dump(2) << "\n";
}

// Companion plotting script (rate vs visibility, one curve per series).
inline void write_plot_script(const std::string& path, const std::string& csv_name) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "#!/usr/bin/env python3\n"
           "import csv, collections\n"
           "import matplotlib\n"
           "matplotlib.use('Agg')\n"
           "import matplotlib.pyplot as plt\n\n"
           "series = collections.defaultdict(list)\n"
           "with open('" << csv_name << "') as f:\n"
           "    for row in csv.DictReader(f):\n"
           "        key = f\"{row['preset']} d={row['d']} D={row['D']}\"\n"
           "        series[key].append((float(row['v']), float(row['clamped_rate'])))\n\n"
           "for key, pts in sorted(series.items()):\n"
           "    pts.sort()\n"
           "    plt.plot([p[0] for p in pts], [p[1] for p in pts], marker='o', label=key)\n"
           "plt.xlabel('visibility v')\n"
           "plt.ylabel('key rate [bits/round]')\n"
           "plt.legend()\n"
           "plt.grid(True, alpha=0.3)\n"
           "plt.savefig('rates.png', dpi=160)\n"
           "print('wrote rates.png')\n";
}

struct RunArtifacts {
    std::string csv_path;
    std::string meta_path;
    std::vector<SweepRow> rows;
};

inline RunArtifacts run_simulate(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    RunArtifacts art;
    art.rows = run_sweep(cfg);
    art.csv_path = cfg.out_dir + "/results.csv";
    art.meta_path = cfg.out_dir + "/results.meta.json";
    write_results_csv(art.csv_path, art.rows);
    write_metadata_json(art.meta_path, cfg, art.rows);
    if (cfg.emit_plot) write_plot_script(cfg.out_dir + "/plot_results.py", "results.csv");
    return art;
}

inline RunArtifacts run_rate_from_data(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    ClickIngestInfo info;
    const ClickTables tables =
        load_click_csv(cfg.tt_path, cfg.ss_path.empty() ? std::nullopt : std::optional(cfg.ss_path), &info);
    RunArtifacts art;
    for (const auto& preset : cfg.presets) {
        PipelineConfig pipe = cfg.pipeline_config(preset);
        const double t0 = detail::now_ms();
        RateReport rep = full_pipeline(tables, pipe);
        rep.wallclock_ms = detail::now_ms() - t0;
        rep.warnings.insert(rep.warnings.end(), info.warnings.begin(), info.warnings.end());
        rep.warnings.push_back(info.normalization);
        art.rows.push_back(SweepRow{std::move(rep), preset});
    }
    art.csv_path = cfg.out_dir + "/rate.csv";
    art.meta_path = cfg.out_dir + "/rate.meta.json";
    write_results_csv(art.csv_path, art.rows);
    write_metadata_json(art.meta_path, cfg, art.rows, info.warnings);
    return art;
}

struct OracleRunResult {
    SandwichReport sandwich;
    RateReport report;
};

// Sandwich the emitted bound between random explicit Eve strategies.
inline OracleRunResult run_oracle(const RunConfig& cfg) {
    if (cfg.dims.size() != 1) throw config_error("oracle mode runs one dimension at a time");
    const long d = cfg.dims.front();
    const double v = cfg.v_start;
    PipelineConfig pipe = cfg.pipeline_config(cfg.presets.front());
    OracleRunResult res;
    res.report = full_pipeline(NoiseModelSpec(d, v), pipe);
    const DensityMatrix rho = isotropic(d, v);
    res.sandwich = sandwich_check(res.report.bound, rho, cfg.oracle_samples, cfg.seed);
    return res;
}

inline void run_completion_mode(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    PartialRealSymmetric input(1);
    if (!cfg.partial_path.empty()) {
        if (cfg.partial_dim < 1) throw config_error("completion mode needs input.dim");
        input = load_partial_csv(cfg.partial_path, cfg.partial_dim);
    } else {
        // simulated sector instance of the isotropic model
        const long d = cfg.dims.front();
        const ClickTables tables = simulate_click_tables(isotropic(d, cfg.v_start));
        input = sector_instance(tables.tt, extract_elements(tables));
    }
    const int passes = cfg.completion_passes > 0 ? cfg.completion_passes : int(input.dim());
    PartialRealSymmetric done = complete(input, passes);
    save_partial_csv(cfg.out_dir + "/completion.csv", done);
}

} // namespace hdqkd
