#include "hdqkd/measurement.hpp"

#include "test_helpers.hpp"

#include <catch_amalgamated.hpp>

using namespace hdqkd;
using hdqkd::testing::random_state;

TEST_CASE("toa_table reads diagonal elements") {
    RealMatrix tt2 = toa_table(max_entangled(2));
    CHECK(tt2(0, 0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(tt2(1, 1) == Catch::Approx(0.5).margin(1e-15));
    CHECK(tt2(0, 1) == 0.0);

    RealMatrix tt4 = toa_table(isotropic(4, 0.8));
    CHECK(tt4(0, 0) == Catch::Approx(0.2125).margin(1e-15));
    CHECK(tt4(0, 1) == Catch::Approx(0.0125).margin(1e-15));
    CHECK(tt4.sum() == Catch::Approx(1.0).margin(1e-12));

    DensityMatrix mixed(3, Matrix::Identity(9, 9) / 9.0);
    CHECK((toa_table(mixed).array() - 1.0 / 9.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("tsup_click fixed values") {
    DensityMatrix mixed(3, Matrix::Identity(9, 9) / 9.0);
    for (int a = 1; a <= 2; ++a)
        for (int b = 1; b <= 2; ++b)
            CHECK(tsup_click(mixed, a, b, 1, 2, 0.7, 1.3) == Catch::Approx(1.0 / 9.0).margin(1e-14));

    // perfectly entangled pair: the window holds TT(1,1)+TT(0,0)+2 Re<1,1|rho|0,0> = 2,
    // a quarter of which is 0.5; cross-checked against the Born-rule oracle below
    const double click = tsup_click(max_entangled(2), 1, 1, 1, 1, 0.0, 0.0);
    CHECK(click == Catch::Approx(0.5).margin(1e-14));
    CHECK(click == Catch::Approx(tsup_click_oracle(max_entangled(2), 1, 1, 1, 1, 0.0, 0.0)).margin(1e-14));

    CHECK_THROWS_AS(tsup_click(mixed, 1, 1, 0, 1, 0.0, 0.0), config_error);
    CHECK_THROWS_AS(tsup_click(mixed, 3, 1, 1, 1, 0.0, 0.0), config_error);
}

TEST_CASE("four outcomes exhaust the interference window") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        DensityMatrix rho = random_state(4, rng, rep % 2 == 0);
        RealMatrix tt = toa_table(rho);
        const Eigen::Index i = 1 + Eigen::Index(rng() % 3), j = 1 + Eigen::Index(rng() % 3);
        const double pa = (rep % 3) * 0.7, pb = (rep % 5) * 0.4;
        double total = 0.0;
        for (int a = 1; a <= 2; ++a)
            for (int b = 1; b <= 2; ++b) total += tsup_click(rho, a, b, i, j, pa, pb);
        const double window = tt(i, j) + tt(i, j - 1) + tt(i - 1, j) + tt(i - 1, j - 1);
        CHECK(total == Catch::Approx(window).margin(1e-12));
    }
}

TEST_CASE("tsup_click equals the Born-rule oracle") {
    std::mt19937_64 rng(22);
    for (int rep = 0; rep < 30; ++rep) {
        const Eigen::Index d = 2 + rep % 3;
        DensityMatrix rho = random_state(d, rng);
        for (int a = 1; a <= 2; ++a)
            for (int b = 1; b <= 2; ++b)
                for (double phi : {kPhaseX, kPhaseY}) {
                    const Eigen::Index i = 1 + Eigen::Index(rng() % uint64_t(d - 1));
                    const Eigen::Index j = 1 + Eigen::Index(rng() % uint64_t(d - 1));
                    CHECK(tsup_click(rho, a, b, i, j, phi, phi) ==
                          Catch::Approx(tsup_click_oracle(rho, a, b, i, j, phi, phi)).margin(1e-12));
                }
    }
}

TEST_CASE("transpose convention flag") {
    std::mt19937_64 rng(23);
    DensityMatrix rho = random_state(3, rng);
    DensityMatrix rho_t(3, rho.entries().transpose());
    for (int a = 1; a <= 2; ++a) {
        const double off = tsup_click(rho, a, 2, 1, 2, 0.9, 0.4, false);
        const double on_transposed = tsup_click(rho_t, a, 2, 1, 2, 0.9, 0.4, true);
        CHECK(off == Catch::Approx(on_transposed).margin(1e-13));
    }
}

TEST_CASE("d_combination isolates coherences") {
    for (double v : {0.0, 0.4, 1.0}) {
        ClickTables t = simulate_click_tables(isotropic(4, v));
        for (Eigen::Index i = 1; i < 4; ++i) {
            CHECK(d_combination(t, i, i, kPhaseX, kPhaseX) == Catch::Approx(2.0 * v / 4.0).margin(1e-12));
            CHECK(d_combination(t, i, i, kPhaseY, kPhaseY) == Catch::Approx(-2.0 * v / 4.0).margin(1e-12));
        }
    }
    // diagonal state: no coherences anywhere
    ClickTables t0 = simulate_click_tables(isotropic(4, 0.0));
    for (const auto& phase : {kPhaseX, kPhaseY})
        CHECK(d_combination(t0, 2, 1, phase, phase) == Catch::Approx(0.0).margin(1e-14));

    ClickTables missing = t0;
    missing.ss.erase(SSKey{2, 1, 1, 1, kPhaseX, kPhaseX});
    CHECK_THROWS_AS(d_combination(missing, 1, 1, kPhaseX, kPhaseX), data_error);
}

TEST_CASE("extraction recovers real parts exactly") {
    // isotropic: Re<1,1|rho|0,0> = v/4, anti-band element vanishes
    for (double v : {0.0, 0.6, 1.0}) {
        ClickTables t = simulate_click_tables(isotropic(4, v));
        const double d00 = d_combination(t, 1, 1, kPhaseX, kPhaseX);
        const double dpp = d_combination(t, 1, 1, kPhaseY, kPhaseY);
        auto [re_sum, re_anti] = extract_re_offdiag(d00, dpp);
        CHECK(re_sum == Catch::Approx(v / 4.0).margin(1e-13));
        CHECK(re_anti == Catch::Approx(0.0).margin(1e-13));
    }

    std::mt19937_64 rng(24);
    for (int rep = 0; rep < 100; ++rep) {
        DensityMatrix rho = random_state(4, rng);
        ExtractedElements ex = extract_elements(simulate_click_tables(rho));
        CHECK(ex.cauchy_schwarz_defect() <= 1e-10);
        for (Eigen::Index i = 1; i < 4; ++i)
            for (Eigen::Index j = 1; j < 4; ++j) {
                const double truth_sum = std::real(rho.entry(i, j, i - 1, j - 1));
                const double truth_anti = std::real(rho.entry(i, j - 1, i - 1, j));
                CHECK(ex.re_sum_band.at({i, j}) == Catch::Approx(truth_sum).margin(1e-12));
                CHECK(ex.re_anti_band.at({i, j}) == Catch::Approx(truth_anti).margin(1e-12));
            }
    }
}

TEST_CASE("x-only lower bound") {
    {
        ClickTables t = simulate_click_tables(isotropic(4, 1.0));
        const double d00 = d_combination(t, 1, 1, kPhaseX, kPhaseX);
        const double bound = xonly_lower_bound(d00, t.tt, 1, 1);
        CHECK(bound == Catch::Approx(0.125).margin(1e-13));
        CHECK(bound <= 0.25 + 1e-13); // true value v/d = 0.25
    }
    {
        ClickTables t = simulate_click_tables(isotropic(4, 0.0));
        const double d00 = d_combination(t, 1, 1, kPhaseX, kPhaseX);
        const double bound = xonly_lower_bound(d00, t.tt, 1, 1);
        CHECK(bound == Catch::Approx(-1.0 / 16.0).margin(1e-13));
        CHECK(bound <= 0.0 + 1e-13);
    }

    std::mt19937_64 rng(25);
    for (int rep = 0; rep < 500; ++rep) {
        DensityMatrix rho = random_state(4, rng, false); // real states
        RealMatrix tt = toa_table(rho);
        const Eigen::Index i = 1 + Eigen::Index(rng() % 3), j = 1 + Eigen::Index(rng() % 3);
        double d00 = 0.0;
        int sign[2] = {+1, -1};
        for (int a = 1; a <= 2; ++a)
            for (int b = 1; b <= 2; ++b)
                d00 += sign[a - 1] * sign[b - 1] * tsup_click(rho, a, b, i, j, kPhaseX, kPhaseX);
        const double truth = std::real(rho.entry(i, j, i - 1, j - 1));
        CHECK(xonly_lower_bound(d00, tt, i, j) <= truth + 1e-12);
    }
}

TEST_CASE("closed-form isotropic tables match the dense simulation") {
    for (Eigen::Index d : {2, 3, 4, 8}) {
        for (double v : {0.0, 0.35, 0.8, 1.0}) {
            ClickTables dense = simulate_click_tables(isotropic(d, v));
            ClickTables fast = simulate_click_tables(NoiseModelSpec(d, v));
            CHECK((dense.tt - fast.tt).cwiseAbs().maxCoeff() < 1e-14);
            REQUIRE(dense.ss.size() == fast.ss.size());
            for (const auto& [key, value] : dense.ss)
                CHECK(fast.ss.at(key) == Catch::Approx(value).margin(1e-14));
        }
    }
}

TEST_CASE("x-only tables dispatch to the bound path") {
    ClickTables t = simulate_click_tables(isotropic(4, 0.9), /*xonly=*/true);
    ExtractedElements ex = extract_elements(t);
    CHECK(ex.xonly_mode);
    CHECK(ex.re_sum_band.empty());
    CHECK(ex.lower_bounds.size() == 9);
    for (const auto& [ij, lb] : ex.lower_bounds) CHECK(lb <= 0.9 / 4.0 + 1e-12);
}
