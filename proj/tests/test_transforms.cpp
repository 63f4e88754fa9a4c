#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "lfbgw/genfun.hpp"
#include "lfbgw/transforms.hpp"

using namespace lfbgw;

TEST_CASE("dual_triplet on Model B") {
    const LFModel b = testing::model_b();
    const SpectralSummary s = analyze(b);
    const LFModel dual = dual_triplet(b, s);

    CHECK(dual.m == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(dual.g[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dual.g[1] == doctest::Approx(0.5).epsilon(1e-12));
    // q is uniform, so Hhat = H / rho
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(dual.H(i, j) ==
                  doctest::Approx(b.H(i, j) / 1.8).epsilon(1e-11));
    CHECK(dual.h0[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-11));
    CHECK(dual.h0[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-11));
    CHECK(validate_model(dual, 1e-9).ok);
}

TEST_CASE("dual_triplet closed forms on the single-type embed") {
    const LFModel st = embed_single_type(0.25, 3.0);
    const SpectralSummary s = analyze(st);
    const LFModel dual = dual_triplet(st, s);
    CHECK(dual.m == doctest::Approx(1.0 / 3.0).epsilon(1e-11));   // h0/h1
    CHECK(dual.h0[0] == doctest::Approx(0.75).epsilon(1e-11));    // m/(m+1)
}

TEST_CASE("dual_triplet refuses degenerate conditioning") {
    SUBCASE("no-death model has q = 0") {
        const LFModel nodeath = embed_single_type(0.0, 2.0);
        const SpectralSummary s = analyze(nodeath);
        CHECK_THROWS_AS(dual_triplet(nodeath, s), DualDegenerate);
    }
    SUBCASE("critical model") {
        const LFModel crit = embed_single_type(0.5, 1.0);
        const SpectralSummary s = analyze(crit);
        CHECK_THROWS_AS(dual_triplet(crit, s), NotSupercritical);
    }
}

TEST_CASE("hs_triplet on Model B") {
    const LFModel b = testing::model_b();
    const SpectralSummary s = analyze(b);
    const LFModel hs = hs_triplet(b, s);

    CHECK(hs.m == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(hs.g[0] == doctest::Approx(0.5).epsilon(1e-11));
    CHECK(hs.g[1] == doctest::Approx(0.5).epsilon(1e-11));
    Eigen::MatrixXd expected(2, 2);
    expected << 0.5, 0.5, 0.4, 0.6;
    CHECK((hs.H - expected).lpNorm<Eigen::Infinity>() < 1e-11);
    // the skeleton never dies: rows are stochastic, h0 = 0
    CHECK(hs.h0.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((hs.H.rowwise().sum() - Eigen::VectorXd::Ones(2))
              .lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("hs_triplet on the single-type embed") {
    const LFModel st = embed_single_type(0.25, 3.0);
    const SpectralSummary s = analyze(st);
    const LFModel hs = hs_triplet(st, s);
    CHECK(hs.m == doctest::Approx(2.0).epsilon(1e-11));  // M - 1
    CHECK(hs.H(0, 0) == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("hs_triplet requires supercriticality") {
    const LFModel crit = embed_single_type(0.5, 1.0);
    const SpectralSummary s = analyze(crit);
    CHECK_THROWS_AS(hs_triplet(crit, s), NotSupercritical);
}

TEST_CASE("hs_triplet keeps the law when extinction is impossible") {
    const LFModel nodeath = embed_single_type(0.0, 2.0);
    const SpectralSummary s = analyze(nodeath);
    const LFModel hs = hs_triplet(nodeath, s);
    CHECK(hs.m == doctest::Approx(nodeath.m).epsilon(1e-11));
    CHECK(hs.H(0, 0) == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("dual_spectral_closed") {
    const LFModel b = testing::model_b();
    const SpectralSummary s = analyze(b);
    const DualSpectral ds = dual_spectral_closed(b, s);
    CHECK(ds.rho_hat == doctest::Approx(5.0 / 9.0).epsilon(1e-11));
    CHECK(ds.beta_hat == doctest::Approx(2.5).epsilon(1e-11));
    CHECK(ds.u_hat[0] == doctest::Approx(1.0).epsilon(1e-11));
    CHECK(ds.u_hat[1] == doctest::Approx(1.0).epsilon(1e-11));

    const LFModel st = embed_single_type(0.25, 3.0);
    const SpectralSummary ss = analyze(st);
    CHECK(dual_spectral_closed(st, ss).rho_hat ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-11));
}

TEST_CASE("hs_spectral_closed") {
    const LFModel b = testing::model_b();
    const SpectralSummary s = analyze(b);
    const HsSpectral hss = hs_spectral_closed(b, s);
    CHECK(hss.rho_tilde == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(hss.beta_tilde == doctest::Approx(2.25).epsilon(1e-11));
    CHECK((hss.u_tilde - Eigen::VectorXd::Ones(2)).lpNorm<Eigen::Infinity>() ==
          0.0);

    const LFModel st = embed_single_type(0.25, 3.0);
    const SpectralSummary ss = analyze(st);
    CHECK(hs_spectral_closed(st, ss).v_tilde[0] ==
          doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("skeleton_law on Model B") {
    const LFModel b = testing::model_b();
    const SpectralSummary s = analyze(b);
    const SkeletonLaw law = skeleton_law(b, s);

    // denominator for (1,1): 0.3 + 2*0.5*0.2 = 0.5, so h_110 = 0.6
    CHECK(law.h_ij0(0, 0) == doctest::Approx(0.6).epsilon(1e-10));
    double sum_k = 0.0;
    for (int k = 0; k < 2; ++k) sum_k += law.h_ijk(0, 0, k);
    CHECK(sum_k == doctest::Approx(0.4).epsilon(1e-10));

    CHECK(law.alpha[0] == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(law.alpha[1] == doctest::Approx(0.4).epsilon(1e-10));
}

TEST_CASE("skeleton_law rows satisfy h_ij0 + sum_k h_ijk = 1") {
    RngStream rng(777);
    for (int trial = 0; trial < 10; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const SpectralSummary s = analyze(model);
        const SkeletonLaw law = skeleton_law(model, s);
        for (int i = 0; i < model.n_types; ++i) {
            for (int j = 0; j < model.n_types; ++j) {
                double total = law.h_ij0(i, j);
                for (int k = 0; k < model.n_types; ++k)
                    total += law.h_ijk(i, j, k);
                CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("skeleton_law zero-denominator convention") {
    // g_2 = 0 and a zero H column make den(i,2) = 0
    Eigen::MatrixXd H(2, 2);
    H << 0.3, 0.0, 0.2, 0.0;
    Eigen::VectorXd g(2);
    g << 1.0, 0.0;
    const LFModel model = make_model(H, g, 3.0);
    const SpectralSummary s = analyze(model);
    REQUIRE(s.criticality == Criticality::supercritical);
    const SkeletonLaw law = skeleton_law(model, s);
    for (int i = 0; i < 2; ++i) {
        CHECK(law.h_tilde(i, 1) == 0.0);
        CHECK(law.h_ij0(i, 1) == 1.0);
        CHECK(law.h_ijk(i, 1, 0) == 0.0);
        CHECK(law.h_ijk(i, 1, 1) == 0.0);
    }
    // rows still stochastic through the first column alone
    CHECK(law.h_tilde.rowwise().sum().isApproxToConstant(1.0, 1e-11));
}

TEST_CASE("component-2 subtype split matches mtilde/m") {
    // single-type: the geometric extras choose skeleton with probability
    // mtilde/m and doomed with probability (m - mtilde)/m
    const LFModel st = embed_single_type(0.25, 3.0);
    const SpectralSummary s = analyze(st);
    const SkeletonLaw law = skeleton_law(st, s);
    const double p_skeleton = law.g[0] * (1.0 - law.q[0]);
    CHECK(p_skeleton == doctest::Approx(law.m_tilde / law.m).epsilon(1e-11));
    CHECK(1.0 - p_skeleton ==
          doctest::Approx((law.m - law.m_tilde) / law.m).epsilon(1e-11));
}

TEST_CASE("skeleton_total_mean") {
    const LFModel b = testing::model_b();
    const SpectralSummary s = analyze(b);
    const Eigen::VectorXd mbar = skeleton_total_mean(b, s);
    CHECK(mbar[0] == doctest::Approx(11.0 / 3.0).epsilon(1e-10));
    CHECK(mbar[1] == doctest::Approx(11.0 / 3.0).epsilon(1e-10));

    // the second closed form must agree, and Mbar_i > M_i strictly
    RngStream rng(1618);
    for (int trial = 0; trial < 10; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const SpectralSummary sum = analyze(model);
        const double rho = *sum.rho;
        const Eigen::VectorXd mb = skeleton_total_mean(model, sum);
        const Eigen::VectorXd M_i =
            (1.0 + model.m) *
            (Eigen::VectorXd::Ones(model.n_types) - model.h0);
        for (int i = 0; i < model.n_types; ++i) {
            const double alt =
                M_i[i] + (1.0 + model.m) *
                             (model.h0[i] + (rho - 1.0) *
                                                (sum.q[i] - model.h0[i]) /
                                                (rho * (1.0 - sum.q[i])));
            CHECK(mb[i] == doctest::Approx(alt).epsilon(1e-9));
            CHECK(mb[i] > M_i[i]);
        }
    }
}

TEST_CASE("transform round-trips through the generic pipeline") {
    RngStream rng(271828);
    for (int trial = 0; trial < 10; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const SpectralSummary s = analyze(model);
        const double rho = *s.rho;

        const LFModel dual = dual_triplet(model, s);
        const LFModel hs = hs_triplet(model, s);

        CHECK(classify(dual) == Criticality::subcritical);
        CHECK(classify(hs) == Criticality::supercritical);

        // re-solving the eigenvalue equation inverts / preserves rho
        const double rho_hat = solve_rho_any(dual, 1e-13);
        CHECK(rho_hat * rho == doctest::Approx(1.0).epsilon(1e-10));
        const double rho_tilde = solve_rho(hs, 1e-13);
        CHECK(rho_tilde == doctest::Approx(rho).epsilon(1e-10));

        // closed-form spectral data vs the generic series pipeline
        const DualSpectral ds = dual_spectral_closed(model, s);
        CHECK(compute_beta(dual, rho_hat) ==
              doctest::Approx(ds.beta_hat).epsilon(1e-8));
        const Eigen::VectorXd u_hat =
            eigen_u(dual, rho_hat, compute_beta(dual, rho_hat));
        const Eigen::VectorXd v_hat = eigen_v(dual, rho_hat);
        CHECK((u_hat - ds.u_hat).lpNorm<Eigen::Infinity>() < 1e-7);
        CHECK((v_hat - ds.v_hat).lpNorm<Eigen::Infinity>() < 1e-7);

        const HsSpectral hss = hs_spectral_closed(model, s);
        CHECK(compute_beta(hs, rho_tilde) ==
              doctest::Approx(hss.beta_tilde).epsilon(1e-8));
        const Eigen::VectorXd u_tilde =
            eigen_u(hs, rho_tilde, compute_beta(hs, rho_tilde));
        const Eigen::VectorXd v_tilde = eigen_v(hs, rho_tilde);
        CHECK((u_tilde - Eigen::VectorXd::Ones(model.n_types))
                  .lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK((v_tilde - hss.v_tilde).lpNorm<Eigen::Infinity>() < 1e-7);
    }
}

TEST_CASE("ghat Hhat^k identity") {
    RngStream rng(1729);
    for (int trial = 0; trial < 8; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const SpectralSummary s = analyze(model);
        const double rho = *s.rho;
        const LFModel dual = dual_triplet(model, s);

        Eigen::RowVectorXd lhs = dual.g.transpose();
        Eigen::RowVectorXd gHk = model.g.transpose();
        const double c = model.m / (1.0 + model.m - rho);
        for (int k = 0; k <= 10; ++k) {
            const Eigen::RowVectorXd rhs =
                c / std::pow(rho, k) * gHk.cwiseProduct(s.q.transpose());
            CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-10);
            lhs *= dual.H;
            gHk *= model.H;
        }
    }
}

TEST_CASE("mixture consistency of the transformed triplets") {
    RngStream rng(33550336);
    for (int trial = 0; trial < 10; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const SpectralSummary s = analyze(model);
        const LFModel dual = dual_triplet(model, s);
        const LFModel hs = hs_triplet(model, s);
        // mtilde gtilde + (m - mtilde) ghat = m g componentwise
        const Eigen::VectorXd mixed =
            hs.m * hs.g + (model.m - hs.m) * dual.g;
        CHECK((mixed - model.m * model.g).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("skeleton refuses types that cannot survive") {
    // type 2 is sterile (zero row), so q_2 = 1 and the skeleton law is
    // degenerate there
    Eigen::MatrixXd H(2, 2);
    H << 0.4, 0.3, 0.0, 0.0;
    Eigen::VectorXd g(2);
    g << 0.7, 0.3;
    const LFModel model = make_model(H, g, 4.0);
    const SpectralSummary s = analyze(model);
    REQUIRE(s.criticality == Criticality::supercritical);
    CHECK(s.q[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(hs_triplet(model, s), DualDegenerate);
    CHECK_THROWS_AS(skeleton_law(model, s), DualDegenerate);
}
