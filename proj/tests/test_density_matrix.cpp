#include "hdqkd/density_matrix.hpp"

#include "test_helpers.hpp"

#include <catch_amalgamated.hpp>

using namespace hdqkd;

TEST_CASE("max_entangled entries") {
    DensityMatrix rho2 = max_entangled(2);
    for (Eigen::Index k : {0, 1})
        for (Eigen::Index l : {0, 1})
            CHECK(std::real(rho2.entry(k, k, l, l)) == Catch::Approx(0.5).margin(1e-15));
    CHECK(std::abs(rho2.entry(0, 1, 0, 1)) == 0.0);

    DensityMatrix rho4 = max_entangled(4);
    for (Eigen::Index k = 0; k < 4; ++k)
        for (Eigen::Index l = 0; l < 4; ++l)
            CHECK(std::real(rho4.entry(k, k, l, l)) == Catch::Approx(0.25).margin(1e-15));
    CHECK(rho4.trace() == Catch::Approx(1.0).margin(1e-12));

    for (Eigen::Index d : {2, 3, 5})
        CHECK(max_entangled(d).purity() == Catch::Approx(1.0).margin(1e-12));

    CHECK_THROWS_AS(max_entangled(1), config_error);
}

TEST_CASE("isotropic mixtures") {
    DensityMatrix white = isotropic(2, 0.0);
    CHECK((white.entries() - Matrix::Identity(4, 4) * 0.25).cwiseAbs().maxCoeff() < 1e-15);

    DensityMatrix pure = isotropic(2, 1.0);
    CHECK((pure.entries() - max_entangled(2).entries()).cwiseAbs().maxCoeff() < 1e-15);

    DensityMatrix mixed = isotropic(4, 0.8);
    CHECK(std::real(mixed.entry(0, 0, 0, 0)) == Catch::Approx(0.2125).margin(1e-15));

    CHECK_THROWS_AS(isotropic(4, 1.5), config_error);
    CHECK_THROWS_AS(isotropic(4, -0.1), config_error);
}

TEST_CASE("validate diagnostics") {
    CHECK(validate(isotropic(4, 0.5)).pass);
    StateDiagnostics ok = validate(isotropic(3, 0.7));
    CHECK(ok.hermiticity_defect == 0.0);
    CHECK(ok.trace_defect < 1e-12);
    CHECK(ok.min_eigenvalue > -1e-12);

    Matrix short_trace = Matrix::Identity(4, 4) * (0.9 / 4.0);
    StateDiagnostics bad_trace = validate(DensityMatrix(2, short_trace));
    CHECK_FALSE(bad_trace.pass);
    CHECK(bad_trace.trace_defect == Catch::Approx(0.1).margin(1e-12));

    Matrix indef = Matrix::Identity(4, 4) * (1.03 / 4.0);
    indef(3, 3) = -0.01;
    indef(0, 0) += 1.0 - indef.trace().real(); // restore unit trace
    StateDiagnostics bad_psd = validate(DensityMatrix(2, indef));
    CHECK_FALSE(bad_psd.psd_ok);
    CHECK(bad_psd.min_eigenvalue == Catch::Approx(-0.01).margin(1e-12));
}

TEST_CASE("isotropic states validate cleanly across d and v") {
    for (Eigen::Index d : {2, 3, 4, 6})
        for (double v : {0.0, 0.3, 0.8, 1.0}) {
            StateDiagnostics diag = validate(isotropic(d, v));
            CHECK(diag.pass);
            CHECK(diag.hermiticity_defect <= 1e-12);
            CHECK(diag.trace_defect <= 1e-12);
        }
}

TEST_CASE("project_subspace basics") {
    auto [w, cond] = project_subspace(isotropic(4, 1.0), {0, 1});
    CHECK(w == Catch::Approx(0.5).margin(1e-12));
    CHECK((cond.entries() - max_entangled(2).entries()).cwiseAbs().maxCoeff() < 1e-12);

    // maximally mixed input: weight D^2/d^2, conditional maximally mixed
    auto [w0, cond0] = project_subspace(isotropic(4, 0.0), {1, 2});
    CHECK(w0 == Catch::Approx(4.0 / 16.0).margin(1e-12));
    CHECK((cond0.entries() - Matrix::Identity(4, 4) * 0.25).cwiseAbs().maxCoeff() < 1e-12);

    // block without support
    Matrix corner = Matrix::Zero(16, 16);
    corner(15, 15) = 1.0;
    CHECK_THROWS_AS(project_subspace(DensityMatrix(4, corner), {0, 1}), data_error);
}

TEST_CASE("conditional-visibility law") {
    for (double v : {0.0, 0.3, 0.7, 1.0}) {
        auto [w, cond] = project_subspace(isotropic(8, v), {0, 1, 2, 3});
        const double vprime = v / (v + (1.0 - v) * 4.0 / 8.0);
        CHECK((cond.entries() - isotropic(4, vprime).entries()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(w == Catch::Approx(v * 4.0 / 8.0 + (1 - v) * 16.0 / 64.0).margin(1e-12));
    }
}

TEST_CASE("partition weights sum rule") {
    for (Eigen::Index bs : {2, 4}) {
        for (double v : {0.0, 0.4, 1.0}) {
            const Eigen::Index d = 8;
            SubspacePartition part = SubspacePartition::contiguous(d, bs);
            const double ell = double(d / bs);
            double total = 0.0;
            for (const auto& block : part.blocks) total += project_subspace(isotropic(d, v), block).weight;
            const double expected =
                v * (ell * double(bs) / double(d)) + (1 - v) * ell * double(bs * bs) / double(d * d);
            CHECK(total == Catch::Approx(expected).margin(1e-12));
        }
    }
}

TEST_CASE("partition validation") {
    CHECK_THROWS_AS(SubspacePartition::contiguous(8, 3), config_error);
    CHECK_THROWS_AS(SubspacePartition::explicit_blocks(4, {{0, 1}, {1, 2}}), config_error);
    CHECK_THROWS_AS(SubspacePartition::explicit_blocks(4, {{0, 1}, {2}}), config_error);
    SubspacePartition odd = SubspacePartition::explicit_blocks(4, {{0, 2}, {1, 3}});
    CHECK(odd.block_size == 2);
}
