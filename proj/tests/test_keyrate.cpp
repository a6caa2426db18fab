#include "hdqkd/keyrate.hpp"

#include "test_helpers.hpp"

#include <catch_amalgamated.hpp>

using namespace hdqkd;

TEST_CASE("conditional entropy of the isotropic table") {
    CHECK(cond_entropy_xy(toa_table(isotropic(4, 1.0))) == Catch::Approx(0.0).margin(1e-12));
    CHECK(cond_entropy_xy(toa_table(isotropic(4, 0.0))) == Catch::Approx(2.0).margin(1e-12));
    CHECK(cond_entropy_xy(toa_table(isotropic(8, 0.0))) == Catch::Approx(3.0).margin(1e-12));

    // conditional column (0.85, 0.05, 0.05, 0.05); value recomputed in place
    const double h = -(0.85 * std::log2(0.85) + 3 * 0.05 * std::log2(0.05));
    CHECK(cond_entropy_xy(toa_table(isotropic(4, 0.8))) == Catch::Approx(h).margin(1e-12));
    CHECK(h == Catch::Approx(0.8475846798245739).margin(1e-12));

    RealMatrix neg = RealMatrix::Constant(2, 2, 0.3);
    neg(0, 0) = -0.1;
    CHECK_THROWS_AS(cond_entropy_xy(neg), data_error);
    RealMatrix off = RealMatrix::Constant(2, 2, 0.3); // sums to 1.2
    CHECK_THROWS_AS(cond_entropy_xy(off), data_error);
    RealMatrix nearly = RealMatrix::Constant(2, 2, 0.25 + 1e-8); // renormalizable
    CHECK(cond_entropy_xy(nearly) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("devetak-winter rate arithmetic") {
    RateValue r1 = devetak_winter(1.0 / 16.0, 0.0);
    CHECK(r1.rate_bits == Catch::Approx(4.0).margin(1e-12));

    RateValue r2 = devetak_winter(1.0, 0.3);
    CHECK(r2.rate_bits == Catch::Approx(-0.3).margin(1e-12));
    CHECK(r2.clamped_rate == 0.0);

    const double leak = cond_entropy_xy(toa_table(isotropic(4, 0.8)));
    RateValue r3 = devetak_winter(0.25, leak);
    CHECK(r3.rate_bits == Catch::Approx(2.0 - leak).margin(1e-12));
    CHECK(r3.rate_bits == Catch::Approx(1.1524153).margin(1e-6));

    CHECK_THROWS_AS(devetak_winter(0.0, 0.0), data_error);
    CHECK_THROWS_AS(devetak_winter(0.5, -0.1), data_error);
}

TEST_CASE("subspace weighting") {
    CHECK(subspace_rate({0.5, 0.5}, {1.0, 1.0}) == Catch::Approx(1.0).margin(1e-14));
    CHECK(subspace_rate({0.3, 0.2}, {0.0, 0.0}) == 0.0);
    CHECK_THROWS_AS(subspace_rate({-0.1, 0.5}, {1.0, 1.0}), data_error);
    CHECK_THROWS_AS(subspace_rate({0.8, 0.8}, {1.0, 1.0}), data_error);
    CHECK_THROWS_AS(subspace_rate({0.5}, {1.0, 1.0}), config_error);
}

namespace {

PipelineConfig fast_config(ConstraintSet set, int starts = 6, int evals = 2500) {
    PipelineConfig cfg;
    cfg.preset = "khexp";
    cfg.constraints = set;
    cfg.solver.starts = starts;
    cfg.solver.max_evals_per_start = evals;
    return cfg;
}

} // namespace

TEST_CASE("pipeline reproduces the pure-state benchmark") {
    RateReport rep = full_pipeline(NoiseModelSpec(4, 1.0), fast_config(ConstraintSet::Augmented, 8, 4000));
    CHECK(rep.clamped_rate >= 1.9);
    CHECK(rep.leak_bits == Catch::Approx(0.0).margin(1e-10));
    CHECK(rep.hmin_bits == Catch::Approx(-std::log2(rep.p_guess_ub)).margin(1e-12));
    CHECK(rep.fast_path_used == false);
    rep.check_invariants();
}

TEST_CASE("pipeline reports are internally consistent") {
    for (double v : {0.6, 0.9}) {
        RateReport rep = full_pipeline(NoiseModelSpec(4, v), fast_config(ConstraintSet::Pair, 4, 800));
        rep.check_invariants();
        CHECK(rep.rate_bits == Catch::Approx(rep.hmin_bits - rep.leak_bits).margin(1e-12));
        CHECK(rep.clamped_rate == std::max(0.0, rep.rate_bits));
        CHECK(rep.fast_path_used);
        CHECK(rep.p_guess_ub <= 1.0 + 1e-9);
        CHECK(rep.p_guess_ub >= 1.0 / 4.0 - 1e-9);
    }
}

TEST_CASE("subspace pipeline equals the recomputed weighted sum") {
    PipelineConfig cfg = fast_config(ConstraintSet::Pair, 4, 800);
    cfg.block_size = 4;
    RateReport rep = full_pipeline(NoiseModelSpec(8, 0.7), cfg);
    REQUIRE(rep.subspaces.size() == 2);

    // weights must match the state-level projection
    DensityMatrix rho = isotropic(8, 0.7);
    SubspacePartition part = SubspacePartition::contiguous(8, 4);
    double k_manual = 0.0;
    for (size_t m = 0; m < part.blocks.size(); ++m) {
        const double w = project_subspace(rho, part.blocks[m]).weight;
        CHECK(rep.subspaces[m].weight == Catch::Approx(w).margin(1e-12));
        k_manual += rep.subspaces[m].weight * rep.subspaces[m].clamped_rate;
    }
    CHECK(rep.clamped_rate == Catch::Approx(k_manual).margin(1e-12));

    // conditional run must match a direct run on the projected state
    PipelineConfig flat = fast_config(ConstraintSet::Pair, 4, 800);
    RateReport direct = full_pipeline(
        simulate_click_tables(project_subspace(rho, part.blocks[0]).conditional), flat);
    CHECK(rep.subspaces[0].p_guess_ub == Catch::Approx(direct.p_guess_ub).margin(1e-9));
}

TEST_CASE("perfect-visibility partitions recover log2(D) per kept round") {
    PipelineConfig cfg = fast_config(ConstraintSet::Augmented, 6, 3000);
    cfg.block_size = 2;
    RateReport rep = full_pipeline(NoiseModelSpec(4, 1.0), cfg);
    double total_weight = 0.0;
    for (const auto& s : rep.subspaces) total_weight += s.weight;
    CHECK(total_weight == Catch::Approx(1.0).margin(1e-12));
    CHECK(rep.clamped_rate == Catch::Approx(std::log2(2.0) * total_weight).margin(1e-6));
}

TEST_CASE("rate is monotone in visibility on a coarse sweep") {
    PipelineConfig cfg = fast_config(ConstraintSet::Pair, 4, 1000);
    double prev = -1.0;
    std::optional<DualPoint> warm;
    for (double v : {0.5, 0.65, 0.8, 0.9, 1.0}) {
        cfg.solver.warm_start = warm;
        RateReport rep = full_pipeline(NoiseModelSpec(4, v), cfg);
        warm = rep.bound.point;
        CHECK(rep.clamped_rate >= prev - 1e-6);
        prev = rep.clamped_rate;
    }
}

TEST_CASE("pipeline rejects bad configuration") {
    PipelineConfig cfg = fast_config(ConstraintSet::Pair);
    cfg.block_size = 3; // does not divide 4
    CHECK_THROWS_AS(full_pipeline(NoiseModelSpec(4, 0.9), cfg), config_error);

    PipelineConfig kh1 = fast_config(ConstraintSet::Pair);
    kh1.preset = "kh1"; // defined for d = 16 only
    CHECK_THROWS_AS(full_pipeline(NoiseModelSpec(4, 0.9), kh1), config_error);
}

TEST_CASE("stage errors carry the stage name") {
    try {
        PipelineConfig cfg = fast_config(ConstraintSet::Pair);
        cfg.preset = "kh1";
        full_pipeline(NoiseModelSpec(8, 0.9), cfg);
        FAIL("expected config error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("[witness]") != std::string::npos);
    }
}
