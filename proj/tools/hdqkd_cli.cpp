// Command-line front end: simulate sweeps, ingest experimental click tables,
// run the weak-duality oracle, or emit completion interval tables.

#include "hdqkd/hdqkd.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

void apply_common_flags(CLI::App* cmd, std::string& config_path, hdqkd::RunConfig& cfg,
                        bool& seed_set, bool& out_set, bool& jobs_set) {
    cmd->add_option("--config", config_path, "JSON config file (flags override file values)");
    cmd->add_option("--seed", cfg.seed, "optimizer / oracle seed")->each([&](const std::string&) {
        seed_set = true;
    });
    cmd->add_option("--out", cfg.out_dir, "output directory")->each([&](const std::string&) {
        out_set = true;
    });
    cmd->add_option("--jobs", cfg.jobs, "worker pool size")->each([&](const std::string&) {
        jobs_set = true;
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hdqkd: certified key-rate lower bounds for high-dimensional time-bin QKD"};
    app.require_subcommand(1);

    std::string config_path;
    hdqkd::RunConfig flags;
    bool seed_set = false, out_set = false, jobs_set = false;

    // simulate
    auto* sim = app.add_subcommand("simulate", "isotropic-model visibility sweep");
    apply_common_flags(sim, config_path, flags, seed_set, out_set, jobs_set);
    std::vector<long> dims;
    sim->add_option("-d,--dims", dims, "local dimensions");
    std::vector<double> vrange;
    sim->add_option("--visibility", vrange, "sweep as start stop steps")->expected(3);
    std::vector<std::string> preset_names;
    sim->add_option("--preset", preset_names, "witness presets (kh1|kh2|khexp)");
    std::string cset;
    sim->add_option("--constraints", cset, "constraint set: pair|augmented");
    long block = 0;
    sim->add_option("--block-size", block, "subspace postselection block size");
    bool plot = false;
    sim->add_flag("--emit-plot", plot, "write a plotting script next to the CSV");

    // rate
    auto* rate = app.add_subcommand("rate", "key rate from ingested click tables");
    apply_common_flags(rate, config_path, flags, seed_set, out_set, jobs_set);
    std::string tt_path, ss_path, rate_cset;
    std::vector<std::string> rate_presets;
    rate->add_option("--tt", tt_path, "ToA counts CSV (i,j,count)");
    rate->add_option("--ss", ss_path, "superposition counts CSV (a,b,i,j,phiA,phiB,count)");
    rate->add_option("--preset", rate_presets, "witness presets");
    rate->add_option("--constraints", rate_cset, "constraint set: pair|augmented");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "weak-duality sandwich check");
    apply_common_flags(oracle, config_path, flags, seed_set, out_set, jobs_set);
    long od = 0;
    double ov = -1.0;
    int osamples = 0;
    std::string opreset;
    oracle->add_option("-d,--dim", od, "local dimension");
    oracle->add_option("-v,--visibility", ov, "visibility");
    oracle->add_option("--samples", osamples, "number of random POVM strategies");
    oracle->add_option("--preset", opreset, "witness preset");

    // completion
    auto* comp = app.add_subcommand("completion", "interval completion of a partial real matrix");
    apply_common_flags(comp, config_path, flags, seed_set, out_set, jobs_set);
    std::string partial_in;
    long partial_dim = 0;
    int passes = 0;
    long cd = 0;
    double cv = -1.0;
    comp->add_option("--in", partial_in, "partial matrix CSV (j,l,lo,hi,status)");
    comp->add_option("--dim", partial_dim, "dimension of the partial matrix");
    comp->add_option("--passes", passes, "max completion passes");
    comp->add_option("-d", cd, "simulate the |kk>-sector instance at this dimension");
    comp->add_option("-v", cv, "visibility for the simulated instance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        hdqkd::RunConfig cfg;
        if (!config_path.empty()) cfg = hdqkd::load_config(config_path);
        if (seed_set) cfg.seed = flags.seed;
        if (out_set) cfg.out_dir = flags.out_dir;
        if (jobs_set) cfg.jobs = flags.jobs;

        if (app.got_subcommand(sim)) {
            cfg.mode = "simulate";
            if (!dims.empty()) cfg.dims = dims;
            if (!vrange.empty()) {
                cfg.v_start = vrange[0];
                cfg.v_stop = vrange[1];
                cfg.v_steps = int(vrange[2]);
            }
            if (!preset_names.empty()) {
                cfg.presets.clear();
                for (const auto& n : preset_names) {
                    hdqkd::PresetSpec p;
                    p.name = n;
                    cfg.presets.push_back(p);
                }
            }
            if (!cset.empty()) cfg.constraint_set = cset;
            if (block > 0) cfg.block_size = block;
            if (plot) cfg.emit_plot = true;
            cfg.validate();
            auto art = hdqkd::run_simulate(cfg);
            std::cout << "wrote " << art.csv_path << " (" << art.rows.size() << " rows)\n";
        } else if (app.got_subcommand(rate)) {
            cfg.mode = "rate";
            if (!tt_path.empty()) cfg.tt_path = tt_path;
            if (!ss_path.empty()) cfg.ss_path = ss_path;
            if (!rate_cset.empty()) cfg.constraint_set = rate_cset;
            if (!rate_presets.empty()) {
                cfg.presets.clear();
                for (const auto& n : rate_presets) {
                    hdqkd::PresetSpec p;
                    p.name = n;
                    cfg.presets.push_back(p);
                }
            }
            cfg.validate();
            auto art = hdqkd::run_rate_from_data(cfg);
            std::cout << "wrote " << art.csv_path << "\n";
            for (const auto& row : art.rows)
                std::cout << "  " << row.preset.label() << ": clamped rate "
                          << row.report.clamped_rate << " bits\n";
        } else if (app.got_subcommand(oracle)) {
            cfg.mode = "oracle";
            if (od > 0) cfg.dims = {od};
            if (ov >= 0) {
                cfg.v_start = cfg.v_stop = ov;
                cfg.v_steps = 1;
            }
            if (osamples > 0) cfg.oracle_samples = osamples;
            if (!opreset.empty()) {
                cfg.presets.clear();
                hdqkd::PresetSpec p;
                p.name = opreset;
                cfg.presets.push_back(p);
            }
            cfg.validate();
            auto res = hdqkd::run_oracle(cfg);
            std::printf("bound %.10f  max-sample %.10f  gap %.3e  violations %d/%d  %s\n",
                        res.report.p_guess_ub, res.sandwich.max_sample, res.sandwich.gap,
                        res.sandwich.violations, res.sandwich.samples,
                        res.sandwich.pass ? "PASS" : "FAIL");
            if (!res.sandwich.pass)
                throw hdqkd::internal_error("primal sample exceeded a certified dual bound");
        } else if (app.got_subcommand(comp)) {
            cfg.mode = "completion";
            if (!partial_in.empty()) cfg.partial_path = partial_in;
            if (partial_dim > 0) cfg.partial_dim = partial_dim;
            if (passes > 0) cfg.completion_passes = passes;
            if (cd > 0) cfg.dims = {cd};
            if (cv >= 0) {
                cfg.v_start = cfg.v_stop = cv;
                cfg.v_steps = 1;
            }
            cfg.validate();
            hdqkd::run_completion_mode(cfg);
            std::cout << "wrote " << cfg.out_dir << "/completion.csv\n";
        }
        return 0;
    } catch (const hdqkd::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const hdqkd::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
