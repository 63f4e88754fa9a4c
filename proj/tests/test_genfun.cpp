#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "lfbgw/genfun.hpp"
#include "lfbgw/singletype.hpp"

using namespace lfbgw;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

Eigen::VectorXd random_point(int n, RngStream& rng) {
    Eigen::VectorXd s(n);
    for (int j = 0; j < n; ++j) s[j] = rng.next_unit();
    return s;
}

}  // namespace

TEST_CASE("pgf_eval") {
    const LFModel b = testing::model_b();
    CHECK((pgf_eval(b, vec2(1, 1)) - vec2(1, 1)).lpNorm<Eigen::Infinity>() <
          1e-14);
    CHECK((pgf_eval(b, vec2(0, 0)) - b.h0).lpNorm<Eigen::Infinity>() < 1e-14);
    // (0.6, 0.6) is the extinction fixed point
    CHECK((pgf_eval(b, vec2(0.6, 0.6)) - vec2(0.6, 0.6))
              .lpNorm<Eigen::Infinity>() < 1e-14);
    CHECK_THROWS_AS(pgf_eval(b, vec2(1.5, 0.5)), DomainError);
}

TEST_CASE("pgf_eval stays in [0,1] and is monotone") {
    RngStream rng(5150);
    for (int trial = 0; trial < 20; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const Eigen::VectorXd s = random_point(model.n_types, rng);
        Eigen::VectorXd s_up = s;
        for (int j = 0; j < model.n_types; ++j)
            s_up[j] = s[j] + (1.0 - s[j]) * rng.next_unit();
        const Eigen::VectorXd f = pgf_eval(model, s);
        const Eigen::VectorXd f_up = pgf_eval(model, s_up);
        CHECK(f.minCoeff() >= 0.0);
        CHECK(f.maxCoeff() <= 1.0 + 1e-14);
        CHECK(((f_up - f).array() >= -1e-14).all());
    }
}

TEST_CASE("pgf_iterate") {
    const LFModel b = testing::model_b();
    SUBCASE("n = 0 is the identity") {
        const Eigen::VectorXd s = vec2(0.3, 0.8);
        CHECK(pgf_iterate(b, s, 0) == s);
    }
    SUBCASE("iterates from 0 increase to q") {
        Eigen::VectorXd prev = vec2(0, 0);
        for (int n = 1; n <= 30; ++n) {
            const Eigen::VectorXd cur = pgf_iterate(b, vec2(0, 0), n);
            CHECK(((cur - prev).array() >= -1e-15).all());
            prev = cur;
        }
        CHECK((prev - vec2(0.6, 0.6)).lpNorm<Eigen::Infinity>() < 1e-6);
    }
    SUBCASE("q is a fixed point of every iterate") {
        const SpectralSummary s = analyze(b);
        for (int n : {1, 2, 5, 17})
            CHECK((pgf_iterate(b, s.q, n) - s.q).lpNorm<Eigen::Infinity>() <
                  1e-12);
    }
    SUBCASE("matches the scalar iteration on the single-type embed") {
        const STParams p{0.25, 3.0};
        const LFModel st = embed_single_type(p.h0, p.m);
        for (int n : {1, 3, 10}) {
            Eigen::VectorXd s0(1);
            s0 << 0.2;
            CHECK(pgf_iterate(st, s0, n)[0] ==
                  doctest::Approx(st_pgf_iterate(p, 0.2, n)).epsilon(1e-13));
        }
    }
}

TEST_CASE("finite differences of f at 1 recover the mean matrix") {
    RngStream rng(3111);
    const double eps = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const Eigen::MatrixXd M = mean_matrix(model);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.n_types);
        for (int j = 0; j < model.n_types; ++j) {
            Eigen::VectorXd s = ones;
            s[j] -= eps;
            const Eigen::VectorXd fd =
                (pgf_eval(model, ones) - pgf_eval(model, s)) / eps;
            for (int i = 0; i < model.n_types; ++i)
                CHECK(fd[i] == doctest::Approx(M(i, j)).epsilon(1e-5));
        }
    }
}

TEST_CASE("joint_pgf_F") {
    const LFModel b = testing::model_b();
    const SpectralSummary s = analyze(b);
    SUBCASE("boundary values") {
        CHECK((joint_pgf_F(b, s, vec2(1, 1), vec2(1, 1)) - vec2(1, 1))
                  .lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK(joint_pgf_F(b, s, vec2(0, 0), vec2(0, 0))
                  .lpNorm<Eigen::Infinity>() < 1e-14);
    }
    SUBCASE("the two evaluation routes agree") {
        const SkeletonLaw law = skeleton_law(b, s);
        const Eigen::VectorXd def =
            joint_pgf_F(b, s, vec2(0.5, 0.5), vec2(0.5, 0.5));
        const Eigen::VectorXd fac =
            joint_pgf_F_factorized(law, vec2(0.5, 0.5), vec2(0.5, 0.5));
        CHECK((def - fac).lpNorm<Eigen::Infinity>() < 1e-10);
    }
    SUBCASE("not supercritical throws") {
        const LFModel crit = embed_single_type(0.5, 1.0);
        const SpectralSummary cs = analyze(crit);
        Eigen::VectorXd one1 = Eigen::VectorXd::Ones(1);
        CHECK_THROWS_AS(joint_pgf_F(crit, cs, one1, one1), NotSupercritical);
    }
}

TEST_CASE("F route agreement at random points on random models") {
    RngStream rng(88);
    for (int trial = 0; trial < 10; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const SpectralSummary sum = analyze(model);
        const SkeletonLaw law = skeleton_law(model, sum);
        for (int point = 0; point < 20; ++point) {
            const Eigen::VectorXd s = random_point(model.n_types, rng);
            const Eigen::VectorXd t = random_point(model.n_types, rng);
            const Eigen::VectorXd def = joint_pgf_F(model, sum, s, t);
            const Eigen::VectorXd fac = joint_pgf_F_factorized(law, s, t);
            CHECK((def - fac).lpNorm<Eigen::Infinity>() < 1e-10);
        }
    }
}

TEST_CASE("F collapses to the HS pgf at t = 1") {
    RngStream rng(4096);
    for (int trial = 0; trial < 10; ++trial) {
        const LFModel model = testing::random_supercritical_model(rng);
        const SpectralSummary sum = analyze(model);
        const LFModel hs = hs_triplet(model, sum);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.n_types);
        const Eigen::VectorXd s = random_point(model.n_types, rng);
        CHECK((joint_pgf_F(model, sum, s, ones) - pgf_eval(hs, s))
                  .lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("mixture identity") {
    const LFModel b = testing::model_b();
    const SpectralSummary s = analyze(b);
    SUBCASE("zero at the corners") {
        CHECK(mixture_residual(b, s, vec2(1, 1)).lpNorm<Eigen::Infinity>() <
              1e-12);
        CHECK(mixture_residual(b, s, vec2(0, 0)).lpNorm<Eigen::Infinity>() <
              1e-12);
    }
    SUBCASE("zero at 100 random points") {
        RngStream rng(123);
        double worst = 0.0;
        for (int point = 0; point < 100; ++point) {
            const Eigen::VectorXd sp = random_point(2, rng);
            worst = std::max(worst,
                             mixture_residual(b, s, sp).lpNorm<Eigen::Infinity>());
        }
        CHECK(worst < 1e-10);
    }
    SUBCASE("degenerate dual throws") {
        const LFModel nodeath = embed_single_type(0.0, 2.0);
        const SpectralSummary ns = analyze(nodeath);
        Eigen::VectorXd half(1);
        half << 0.5;
        CHECK_THROWS_AS(mixture_residual(nodeath, ns, half), DualDegenerate);
    }
}

TEST_CASE("total_count_pmf") {
    const LFModel st = embed_single_type(0.25, 3.0);
    SUBCASE("values at (0.25, 3)") {
        const TotalCountPmf pmf = total_count_pmf(st, 0, 10);
        CHECK(pmf.p[0] == doctest::Approx(0.25).epsilon(1e-14));
        // P(total = 1) = 0.75 * 1/4
        CHECK(pmf.p[1] == doctest::Approx(0.1875).epsilon(1e-14));
        double mass = pmf.tail_mass;
        for (double p : pmf.p) mass += p;
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("mean with analytic tail equals M_i") {
        RngStream rng(9);
        for (int trial = 0; trial < 10; ++trial) {
            const LFModel model = testing::random_supercritical_model(rng);
            const Eigen::VectorXd M_i =
                (1.0 + model.m) * (Eigen::VectorXd::Ones(model.n_types) -
                                   model.h0);
            for (int i = 0; i < model.n_types; ++i) {
                const TotalCountPmf pmf = total_count_pmf(model, i, 60);
                double mean = pmf.tail_mean;
                for (std::size_t k = 0; k < pmf.p.size(); ++k)
                    mean += static_cast<double>(k) * pmf.p[k];
                CHECK(mean == doctest::Approx(M_i[i]).epsilon(1e-10));
            }
        }
    }
    SUBCASE("tail matches brute-force remainder") {
        const TotalCountPmf coarse = total_count_pmf(st, 0, 5);
        const TotalCountPmf fine = total_count_pmf(st, 0, 4000);
        double mass = 0.0, mean = 0.0;
        for (std::size_t k = 6; k < fine.p.size(); ++k) {
            mass += fine.p[k];
            mean += static_cast<double>(k) * fine.p[k];
        }
        CHECK(coarse.tail_mass == doctest::Approx(mass).epsilon(1e-12));
        CHECK(coarse.tail_mean == doctest::Approx(mean).epsilon(1e-12));
    }
}
