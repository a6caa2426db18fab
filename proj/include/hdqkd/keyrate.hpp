#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/completion.hpp"
#include "hdqkd/density_matrix.hpp"
#include "hdqkd/dual_solver.hpp"
#include "hdqkd/measurement.hpp"
#include "hdqkd/witness.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hdqkd {

// H(X|Y) in bits from the joint ToA table (X = Alice rows, Y = Bob columns).
inline double cond_entropy_xy(RealMatrix tt) {
    if (tt.minCoeff() < 0) throw data_error("cond_entropy_xy: negative probability");
    const double total = tt.sum();
    if (std::abs(total - 1.0) > 1e-6) throw data_error("cond_entropy_xy: table sum deviates from 1");
    tt /= total;
    auto h = [](double x) { return x > 0 ? -x * std::log2(x) : 0.0; };
    double hxy = 0.0, hy = 0.0;
    for (Eigen::Index j = 0; j < tt.cols(); ++j) {
        double py = 0.0;
        for (Eigen::Index i = 0; i < tt.rows(); ++i) {
            hxy += h(tt(i, j));
            py += tt(i, j);
        }
        hy += h(py);
    }
    return hxy - hy;
}

struct RateValue {
    double rate_bits = 0.0;
    double clamped_rate = 0.0;
};

// Asymptotic rate: min-entropy bound minus the classical reconciliation leak.
inline RateValue devetak_winter(double p_guess_ub, double leak_bits) {
    if (!(p_guess_ub > 0.0) || p_guess_ub > 1.0 + kFeasTol)
        throw data_error("devetak_winter: guessing probability must lie in (0, 1]");
    if (leak_bits < 0) throw data_error("devetak_winter: negative leak");
    RateValue r;
    r.rate_bits = -std::log2(std::min(p_guess_ub, 1.0)) - leak_bits;
    r.clamped_rate = std::max(0.0, r.rate_bits);
    return r;
}

// K = sum_m P(M=m) K_m. Rates are expected already clamped per subspace.
inline double subspace_rate(const std::vector<double>& weights, const std::vector<double>& rates) {
    if (weights.size() != rates.size()) throw config_error("subspace_rate: length mismatch");
    double total_w = 0.0, k = 0.0;
    for (size_t m = 0; m < weights.size(); ++m) {
        if (weights[m] < 0) throw data_error("subspace_rate: negative weight");
        total_w += weights[m];
        k += weights[m] * rates[m];
    }
    if (total_w > 1.0 + kFeasTol) throw data_error("subspace_rate: weights sum above 1");
    return k;
}

struct SubspaceEntry {
    Eigen::Index block_start = 0;
    double weight = 0.0;
    double p_guess_ub = 1.0;
    double hmin_bits = 0.0;
    double leak_bits = 0.0;
    double rate_bits = 0.0;
    double clamped_rate = 0.0;
};

struct RateReport {
    Eigen::Index d = 0;
    Eigen::Index block_size = 0; // = d without postselection
    std::optional<double> visibility;
    std::string preset;
    std::string constraint_set = "pair";
    double p_guess_ub = 1.0;
    double hmin_bits = 0.0;
    double leak_bits = 0.0;
    double rate_bits = 0.0;
    double clamped_rate = 0.0;
    double unclamped_subspace_sum = 0.0;
    std::vector<SubspaceEntry> subspaces;
    std::vector<std::string> warnings;
    GuessBound bound; // full-space runs; for postselection, the worst subspace bound
    bool fast_path_used = false;
    double wallclock_ms = 0.0;

    // Consistency of the derived fields; throws on violation.
    void check_invariants() const {
        if (subspaces.empty()) {
            if (std::abs(hmin_bits - std::max(0.0, -std::log2(p_guess_ub))) > 1e-12)
                throw internal_error("rate report: hmin != -log2(p_guess_ub)");
            if (std::abs(rate_bits - (hmin_bits - leak_bits)) > 1e-12)
                throw internal_error("rate report: rate != hmin - leak");
        }
        if (std::abs(clamped_rate - std::max(0.0, subspaces.empty() ? rate_bits : clamped_rate)) > 1e-12 &&
            subspaces.empty())
            throw internal_error("rate report: clamped rate mismatch");
        if (hmin_bits < 0 || hmin_bits > std::log2(double(block_size)) + kFeasTol)
            throw internal_error("rate report: hmin outside [0, log2 d]");
    }
};

struct PipelineConfig {
    std::string preset = "khexp";
    double khexp_c = 0.75;
    double khexp_s = 4.0;
    double khexp_q0 = 0.0;
    QOverrides q_overrides;
    ConstraintSet constraints = ConstraintSet::Pair;
    int completion_passes = 0; // 0 -> dimension of the completed block
    SolverOptions solver;
    std::optional<Eigen::Index> block_size; // subspace postselection
};

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const config_error& e) {
        throw config_error(std::string("[") + name + "] " + e.what());
    } catch (const data_error& e) {
        throw data_error(std::string("[") + name + "] " + e.what());
    } catch (const internal_error& e) {
        throw internal_error(std::string("[") + name + "] " + e.what());
    } catch (const std::exception& e) {
        throw internal_error(std::string("[") + name + "] " + e.what());
    }
}

// One full-space pass: tables -> extraction -> completion -> constraints ->
// dual bound -> rate.
inline RateReport run_tables(const ClickTables& tables, const PipelineConfig& cfg,
                             std::optional<double> visibility) {
    RateReport rep;
    rep.d = tables.dim;
    rep.block_size = tables.dim;
    rep.visibility = visibility;
    rep.preset = cfg.preset;
    rep.constraint_set = cfg.constraints == ConstraintSet::Pair ? "pair" : "augmented";

    const WitnessPreset preset = stage("witness", [&] {
        return make_preset(cfg.preset, tables.dim, cfg.khexp_c, cfg.khexp_s, cfg.khexp_q0,
                           cfg.q_overrides);
    });
    rep.warnings = preset.warnings;

    const ExtractedElements extracted = stage("extract", [&] { return extract_elements(tables); });
    if (extracted.xonly_mode)
        rep.warnings.push_back("x-only data: first-band coherences bounded, not measured");

    const int passes = cfg.completion_passes > 0 ? cfg.completion_passes : int(tables.dim);
    const PartialRealSymmetric completed = stage("complete", [&] {
        return complete(sector_instance(tables.tt, extracted), passes);
    });

    const auto constraints = stage("witness", [&] {
        return build_constraints(preset, tables.tt, extracted, completed, cfg.constraints);
    });

    rep.bound = stage("minimize", [&] { return minimize(constraints, cfg.solver); });
    rep.fast_path_used = rep.bound.fast_path_used;
    rep.p_guess_ub = rep.bound.p_guess_ub;

    const double leak = stage("rate", [&] { return cond_entropy_xy(tables.tt); });
    rep.hmin_bits = std::max(0.0, -std::log2(rep.p_guess_ub));
    rep.leak_bits = leak;
    const RateValue rv = devetak_winter(rep.p_guess_ub, leak);
    rep.rate_bits = rv.rate_bits;
    rep.clamped_rate = rv.clamped_rate;
    rep.unclamped_subspace_sum = rv.rate_bits;
    rep.check_invariants();
    return rep;
}

// Conditional tables for one contiguous block, renormalized by the block mass.
inline ClickTables conditional_tables(const ClickTables& tables, Eigen::Index start,
                                      Eigen::Index size, double& weight_out) {
    ClickTables cond;
    cond.dim = size;
    double w = tables.tt.block(start, start, size, size).sum();
    if (w < 1e-14) throw data_error("subspace block carries no probability mass");
    weight_out = w;
    cond.tt = tables.tt.block(start, start, size, size) / w;
    for (const auto& [key, value] : tables.ss) {
        if (key.i <= start || key.i >= start + size) continue;
        if (key.j <= start || key.j >= start + size) continue;
        SSKey local = key;
        local.i = key.i - start;
        local.j = key.j - start;
        cond.ss[local] = value / w;
    }
    return cond;
}

} // namespace detail

// Full chain from click tables to a rate report, with optional subspace
// postselection (contiguous blocks; the interferometer only links adjacent
// global bins, so scattered blocks have no conditional superposition data).
inline RateReport full_pipeline(const ClickTables& tables, const PipelineConfig& cfg,
                                std::optional<double> visibility = std::nullopt) {
    if (!cfg.block_size) return detail::run_tables(tables, cfg, visibility);

    const Eigen::Index bs = *cfg.block_size;
    if (bs < 2 || tables.dim % bs != 0)
        throw config_error("postselection block size must divide d and be >= 2");

    RateReport agg;
    agg.d = tables.dim;
    agg.block_size = bs;
    agg.visibility = visibility;
    agg.preset = cfg.preset;
    agg.constraint_set = cfg.constraints == ConstraintSet::Pair ? "pair" : "augmented";
    double worst_p = 0.0;

    PipelineConfig sub_cfg = cfg;
    sub_cfg.block_size.reset();
    for (Eigen::Index start = 0; start < tables.dim; start += bs) {
        double weight = 0.0;
        const ClickTables cond = detail::conditional_tables(tables, start, bs, weight);
        RateReport r = detail::run_tables(cond, sub_cfg, std::nullopt);
        SubspaceEntry e;
        e.block_start = start;
        e.weight = weight;
        e.p_guess_ub = r.p_guess_ub;
        e.hmin_bits = r.hmin_bits;
        e.leak_bits = r.leak_bits;
        e.rate_bits = r.rate_bits;
        e.clamped_rate = r.clamped_rate;
        agg.subspaces.push_back(e);
        agg.warnings.insert(agg.warnings.end(), r.warnings.begin(), r.warnings.end());
        if (r.p_guess_ub > worst_p) {
            worst_p = r.p_guess_ub;
            agg.bound = r.bound;
        }
        agg.fast_path_used = r.fast_path_used;
    }

    std::vector<double> weights, clamped, unclamped;
    for (const auto& e : agg.subspaces) {
        weights.push_back(e.weight);
        clamped.push_back(e.clamped_rate);
        unclamped.push_back(e.rate_bits);
        agg.hmin_bits += e.weight * e.hmin_bits;
        agg.leak_bits += e.weight * e.leak_bits;
    }
    agg.p_guess_ub = worst_p;
    agg.clamped_rate = subspace_rate(weights, clamped);
    agg.unclamped_subspace_sum = subspace_rate(weights, unclamped);
    agg.rate_bits = agg.hmin_bits - agg.leak_bits;
    return agg;
}

// Simulation entry point: isotropic model, standard x/y/z settings.
inline RateReport full_pipeline(const NoiseModelSpec& spec, const PipelineConfig& cfg) {
    const ClickTables tables = detail::stage("simulate", [&] { return simulate_click_tables(spec); });
    return full_pipeline(tables, cfg, spec.visibility);
}

} // namespace hdqkd
