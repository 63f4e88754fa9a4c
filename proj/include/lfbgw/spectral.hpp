#ifndef LFBGW_SPECTRAL_HPP
#define LFBGW_SPECTRAL_HPP

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include "lfbgw/model.hpp"

namespace lfbgw {

enum class Criticality { subcritical, critical, supercritical };

const char* to_string(Criticality c);

// Cutoff policy shared by all series in this module: stop a series when the
// current term drops below eps, fail with NotConverged at k_max.
struct SeriesOptions {
    double eps = 1e-15;
    int k_max = 100000;
};

// Spectral data of one model. rho/beta/u/v are only meaningful in the
// supercritical case and are left empty otherwise; q is always set
// (identically 1 when extinction is certain).
struct SpectralSummary {
    Criticality criticality = Criticality::subcritical;
    double mu = 0.0;          // m * sum_k g H^k 1^t; +inf when non-summable
    Eigen::VectorXd q;        // extinction probabilities
    int k_used = 0;           // deepest series truncation used
    std::optional<double> rho;
    std::optional<double> beta;
    std::optional<Eigen::VectorXd> u;  // right eigenvector, v u^t = 1
    std::optional<Eigen::VectorXd> v;  // left eigenvector,  v 1^t = 1
};

struct SeriesWeights {
    std::vector<double> a;  // a[k-1] = g H^k 1^t
    int k_used = 0;
};

inline constexpr double kInfMu = std::numeric_limits<double>::infinity();

// Terms a_k = g H^k 1^t for k = 1..K, with K the first index whose weighted
// term m rho^-K a_K falls below eps. Requires rho > 1.
SeriesWeights series_weights(const LFModel& model, double rho,
                             const SeriesOptions& opts = {});

// phi(rho) = m sum_k rho^-k a_k; strictly decreasing in rho.
double phi(const LFModel& model, double rho, const SeriesOptions& opts = {});

// mu = m sum_k a_k. Returns +inf when the partial sum exceeds 1 without the
// terms decaying below eps (enough to classify as supercritical); a partial
// sum still below 1 at k_max is returned as-is with k_used = k_max.
double compute_mu(const LFModel& model, const SeriesOptions& opts = {},
                  int* k_used = nullptr);

// Unique root of phi(rho) = 1 in (1, 1+m], located by bisection on
// [1+1e-9, 1+m] with secant refinement. Requires mu > 1.
double solve_rho(const LFModel& model, double tol = 1e-13,
                 const SeriesOptions& opts = {});

// Root of phi(rho) = 1 for a model of any criticality class (the dual of a
// supercritical model is subcritical and has its root below 1). Finds a
// bracket by geometric descent from 1 when needed.
double solve_rho_any(const LFModel& model, double tol = 1e-13,
                     const SeriesOptions& opts = {});

// beta = m sum_k k rho^-k a_k.
double compute_beta(const LFModel& model, double rho,
                    const SeriesOptions& opts = {}, int* k_used = nullptr);

// u^t = (1+m) beta^-1 sum_{k>=1} rho^-k H^k 1^t
Eigen::VectorXd eigen_u(const LFModel& model, double rho, double beta,
                        const SeriesOptions& opts = {}, int* k_used = nullptr);

// v = m/(1+m) sum_{k>=0} rho^-k g H^k
Eigen::VectorXd eigen_v(const LFModel& model, double rho,
                        const SeriesOptions& opts = {}, int* k_used = nullptr);

Criticality classify(const LFModel& model, const SeriesOptions& opts = {});

// Monotone iteration x <- f(x) from x = 0; converges to q from below.
Eigen::VectorXd fixed_point_q(const LFModel& model, double tol = 1e-12,
                              int max_iter = 300000);

// Assembles the full summary. In the supercritical case q comes from the
// closed form 1 - (rho-1)(1+m)^-1 beta u and is cross-checked against
// fixed_point_q; disagreement beyond fp_tol raises FixedPointMismatch.
SpectralSummary analyze(const LFModel& model, const SeriesOptions& opts = {},
                        double rho_tol = 1e-13, double fp_tol = 1e-8);

}  // namespace lfbgw

#endif
