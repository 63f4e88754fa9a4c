#ifndef LFBGW_GENFUN_HPP
#define LFBGW_GENFUN_HPP

#include <Eigen/Dense>
#include <vector>

#include "lfbgw/model.hpp"
#include "lfbgw/spectral.hpp"
#include "lfbgw/transforms.hpp"

namespace lfbgw {

// f_i(s) = h0_i + (sum_j H(i,j) s_j) / (1 + m - m g.s) for s in [0,1]^N.
Eigen::VectorXd pgf_eval(const LFModel& model, const Eigen::VectorXd& s);

// n-fold composition f(f(...f(s))); n = 0 returns s.
Eigen::VectorXd pgf_iterate(const LFModel& model, const Eigen::VectorXd& s,
                            int n);

// Joint skeleton/doomed offspring PGF by its defining formula
//   F_i(s,t) = (f_i(s(1-q)+tq) - f_i(tq)) / (1 - q_i).
Eigen::VectorXd joint_pgf_F(const LFModel& model, const SpectralSummary& sum,
                            const Eigen::VectorXd& s, const Eigen::VectorXd& t);

// Same function through the factorized skeleton-law form; the two paths
// agreeing pointwise is the strongest single check of the decomposition.
Eigen::VectorXd joint_pgf_F_factorized(const SkeletonLaw& law,
                                       const Eigen::VectorXd& s,
                                       const Eigen::VectorXd& t);

// r_i = f_i(s) - (1-q_i) F_i(s,s) - q_i fhat_i(s), with fhat evaluated on
// the dual triplet. Zero (to roundoff) whenever the transforms are right.
Eigen::VectorXd mixture_residual(const LFModel& model,
                                 const SpectralSummary& sum,
                                 const Eigen::VectorXd& s);

struct TotalCountPmf {
    std::vector<double> p;  // p[k] = P(total offspring = k), k = 0..k_cap
    double tail_mass = 0.0; // P(total > k_cap)
    double tail_mean = 0.0; // E[total; total > k_cap]
};

// Exact pmf of the total offspring count of a type-i particle:
// P(0) = h0_i, P(1+j) = (1-h0_i) (1/(1+m)) (m/(1+m))^j.
TotalCountPmf total_count_pmf(const LFModel& model, int i, int k_cap);

}  // namespace lfbgw

#endif
