#ifndef LFBGW_TESTS_HELPERS_HPP
#define LFBGW_TESTS_HELPERS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "lfbgw/model.hpp"
#include "lfbgw/rng.hpp"

namespace lfbgw::testing {

// N=2, H = [[0.3,0.3],[0.2,0.4]], g = (0.5,0.5), m = 2. H has constant row
// sums 0.6, so a_k = 0.6^k and every spectral quantity has an independent
// geometric-series closed form (rho = 1.8, mu = 3, beta = 1.5, q = 0.6).
inline LFModel model_b() {
    Eigen::MatrixXd H(2, 2);
    H << 0.3, 0.3, 0.2, 0.4;
    Eigen::VectorXd g(2);
    g << 0.5, 0.5;
    return make_model(H, g, 2.0);
}

struct RandomModelConfig {
    int n_min = 2;
    int n_max = 20;
    double row_sum_min = 0.35;
    double row_sum_max = 0.90;
    double mu_min = 1.4;
    double mu_max = 3.5;
    double density = 0.5;  // expected fraction of nonzero H entries
};

// Random supercritical model: sparse nonneg H with prescribed row sums
// (every row nonempty, every h0_i > 0), strictly positive g, and m chosen
// so that mu = m sum_k g H^k 1^t hits a target above 1.
inline LFModel random_supercritical_model(RngStream& rng,
                                          const RandomModelConfig& cfg = {}) {
    const int n =
        cfg.n_min +
        static_cast<int>(rng.next_unit() * (cfg.n_max - cfg.n_min + 1));

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        int nonzero = 0;
        for (int j = 0; j < n; ++j) {
            if (rng.next_unit() < cfg.density) {
                H(i, j) = 0.1 + 0.9 * rng.next_unit();
                ++nonzero;
            }
        }
        if (nonzero == 0) {
            H(i, static_cast<int>(rng.next_unit() * n)) = 1.0;
        }
        const double target =
            cfg.row_sum_min +
            (cfg.row_sum_max - cfg.row_sum_min) * rng.next_unit();
        H.row(i) *= target / H.row(i).sum();
    }

    Eigen::VectorXd g(n);
    for (int j = 0; j < n; ++j) g[j] = 0.05 + 0.95 * rng.next_unit();
    g /= g.sum();

    // sum_k a_k with a_k = g H^k 1^t; row sums <= 0.9 make this geometric
    Eigen::VectorXd w = H.rowwise().sum();
    double a_sum = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const double a_k = g.dot(w);
        a_sum += a_k;
        if (a_k < 1e-14) break;
        w = H * w;
    }
    const double mu_target =
        cfg.mu_min + (cfg.mu_max - cfg.mu_min) * rng.next_unit();
    return make_model(H, g, mu_target / a_sum);
}

// Plain power iteration on M and M^t; independent of the series pipeline.
// Returns (rho, u, v) normalized so that v 1^t = 1 and v u^t = 1.
inline std::tuple<double, Eigen::VectorXd, Eigen::VectorXd> power_iteration(
    const Eigen::MatrixXd& M, int max_iter = 200000, double tol = 1e-13) {
    const Eigen::Index n = M.rows();
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(n);
    double rho = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd x_next = M * x;
        Eigen::VectorXd y_next = M.transpose() * y;
        const double rho_next = x_next.lpNorm<Eigen::Infinity>();
        x_next /= rho_next;
        y_next /= y_next.lpNorm<Eigen::Infinity>();
        const bool settled = std::abs(rho_next - rho) < tol * rho_next &&
                             (x_next - x).lpNorm<Eigen::Infinity>() < tol &&
                             (y_next - y).lpNorm<Eigen::Infinity>() < tol;
        x = std::move(x_next);
        y = std::move(y_next);
        rho = rho_next;
        if (settled) {
            y /= y.sum();                // v 1^t = 1
            x /= y.dot(x);               // v u^t = 1
            // one Rayleigh pass for the eigenvalue itself
            rho = y.dot(M * x) / y.dot(x);
            return {rho, x, y};
        }
    }
    throw std::runtime_error("power_iteration did not settle");
}

}  // namespace lfbgw::testing

#endif
