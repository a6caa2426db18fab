#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/keyrate.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hdqkd {

struct PresetSpec {
    std::string name = "khexp";
    double c = 0.75;
    double s = 4.0;
    double q0 = 0.0;
    QOverrides q_overrides;

    std::string label() const {
        std::string l = name;
        for (const auto& [z, v] : q_overrides) l += "_q" + std::to_string(z) + "=" + std::to_string(v);
        return l;
    }
};

// One run of the tool: mode, sweep grid, witness choice, solver knobs, paths.
struct RunConfig {
    std::string mode = "simulate"; // simulate | rate | oracle | completion
    std::vector<long> dims{16};
    double v_start = 0.9;
    double v_stop = 1.0;
    int v_steps = 11;
    std::vector<PresetSpec> presets{PresetSpec{}};
    std::optional<long> block_size;
    std::string constraint_set = "pair";
    int completion_passes = 0;
    // optimizer
    uint64_t seed = 1;
    int starts = 8;
    int max_evals = 2000;
    double tolerance = 1e-8;
    bool fast_path = true;
    bool polish = true;
    bool warm_start = true;
    int jobs = 1;
    // io
    std::string out_dir = "out";
    std::string tt_path;
    std::string ss_path;
    std::string partial_path;
    long partial_dim = 0;
    int oracle_samples = 500;
    bool emit_plot = false;

    void validate() const {
        if (mode != "simulate" && mode != "rate" && mode != "oracle" && mode != "completion")
            throw config_error("mode must be simulate|rate|oracle|completion");
        if (v_steps < 1) throw config_error("visibility sweep needs at least 1 step");
        if (!(v_start >= 0 && v_start <= 1 && v_stop >= 0 && v_stop <= 1 && v_start <= v_stop))
            throw config_error("visibility sweep bounds must satisfy 0 <= start <= stop <= 1");
        if (dims.empty()) throw config_error("at least one dimension required");
        for (long d : dims) {
            if (d < 2) throw config_error("dimensions must be >= 2");
            if (block_size && (*block_size < 2 || d % *block_size != 0))
                throw config_error("d must be an exact multiple of the partition block size");
        }
        if (starts < 1 || max_evals < 10) throw config_error("optimizer budget too small");
        if (jobs < 1) throw config_error("jobs must be >= 1");
        constraint_set_from_string(constraint_set); // throws on bad value
        if (mode == "rate" && tt_path.empty()) throw config_error("rate mode needs a TT input file");
        if (mode == "completion" && partial_path.empty() && mode == "completion" && dims.empty())
            throw config_error("completion mode needs an input file or a simulated instance");
    }

    std::vector<double> visibilities() const {
        std::vector<double> vs;
        if (v_steps == 1) {
            vs.push_back(v_start);
            return vs;
        }
        for (int k = 0; k < v_steps; ++k)
            vs.push_back(v_start + (v_stop - v_start) * double(k) / double(v_steps - 1));
        return vs;
    }

    SolverOptions solver_options() const {
        SolverOptions s;
        s.seed = seed;
        s.starts = starts;
        s.max_evals_per_start = max_evals;
        s.rel_tol = tolerance;
        s.fast_path = fast_path;
        s.polish = polish;
        s.jobs = 1; // sweep-level parallelism owns the threads
        return s;
    }

    PipelineConfig pipeline_config(const PresetSpec& p) const {
        PipelineConfig cfg;
        cfg.preset = p.name;
        cfg.khexp_c = p.c;
        cfg.khexp_s = p.s;
        cfg.khexp_q0 = p.q0;
        cfg.q_overrides = p.q_overrides;
        cfg.constraints = constraint_set_from_string(constraint_set);
        cfg.completion_passes = completion_passes;
        cfg.solver = solver_options();
        if (block_size) cfg.block_size = *block_size;
        return cfg;
    }
};

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (j.contains("mode")) c.mode = j.at("mode").get<std::string>();
        if (j.contains("dims")) c.dims = j.at("dims").get<std::vector<long>>();
        if (j.contains("d")) c.dims = {j.at("d").get<long>()};
        if (j.contains("visibility")) {
            const auto& v = j.at("visibility");
            if (v.is_number()) {
                c.v_start = c.v_stop = v.get<double>();
                c.v_steps = 1;
            } else {
                c.v_start = v.value("start", c.v_start);
                c.v_stop = v.value("stop", c.v_stop);
                c.v_steps = v.value("steps", c.v_steps);
            }
        }
        if (j.contains("presets")) {
            c.presets.clear();
            for (const auto& p : j.at("presets")) {
                PresetSpec ps;
                if (p.is_string()) {
                    ps.name = p.get<std::string>();
                } else {
                    ps.name = p.value("name", ps.name);
                    ps.c = p.value("c", ps.c);
                    ps.s = p.value("s", ps.s);
                    ps.q0 = p.value("q0", ps.q0);
                    if (p.contains("q_overrides"))
                        for (const auto& [k, v] : p.at("q_overrides").items())
                            ps.q_overrides[std::stoi(k)] = v.get<double>();
                }
                c.presets.push_back(std::move(ps));
            }
        }
        if (j.contains("partition")) {
            if (j.at("partition").is_number())
                c.block_size = j.at("partition").get<long>();
            else
                c.block_size = j.at("partition").value("block_size", 0L);
            if (*c.block_size == 0) c.block_size.reset();
        }
        c.constraint_set = j.value("constraints", c.constraint_set);
        c.completion_passes = j.value("completion_passes", c.completion_passes);
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            c.seed = o.value("seed", c.seed);
            c.starts = o.value("starts", c.starts);
            c.max_evals = o.value("max_evals", c.max_evals);
            c.tolerance = o.value("tolerance", c.tolerance);
            c.fast_path = o.value("fast_path", c.fast_path);
            c.polish = o.value("polish", c.polish);
        }
        c.seed = j.value("seed", c.seed);
        c.warm_start = j.value("warm_start", c.warm_start);
        c.jobs = j.value("jobs", c.jobs);
        c.out_dir = j.value("out", c.out_dir);
        if (j.contains("input")) {
            c.tt_path = j.at("input").value("tt", "");
            c.ss_path = j.at("input").value("ss", "");
            c.partial_path = j.at("input").value("partial", "");
            c.partial_dim = j.at("input").value("dim", 0L);
        }
        if (j.contains("oracle")) c.oracle_samples = j.at("oracle").value("samples", c.oracle_samples);
        c.emit_plot = j.value("emit_plot", c.emit_plot);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

} // namespace hdqkd
