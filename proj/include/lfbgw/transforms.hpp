#ifndef LFBGW_TRANSFORMS_HPP
#define LFBGW_TRANSFORMS_HPP

#include <Eigen/Dense>

#include "lfbgw/model.hpp"
#include "lfbgw/spectral.hpp"

namespace lfbgw {

// Sampling-ready parameterization of the joint skeleton offspring law.
// A skeleton particle of type i produces
//   (a) one skeleton offspring of type j ~ row i of h_tilde,
//   (b) a Geometric(1/(1+m)) number of extras, each of type k ~ g and
//       independently skeleton with probability 1-q_k,
//   (c) with probability 1-h_ij0(i,j) a doomed cluster: one doomed
//       offspring of type k ~ h_ijk(i,j,.) plus Geometric(1/(1+m_hat))
//       doomed extras with types ~ g_hat.
struct SkeletonLaw {
    int n_types = 0;
    Eigen::MatrixXd h_tilde;   // stochastic rows
    double m_tilde = 0.0;      // rho - 1
    Eigen::VectorXd g_tilde;
    Eigen::MatrixXd h_hat;     // dual kernel
    Eigen::VectorXd g_hat;
    double m_hat = 0.0;
    Eigen::VectorXd h_hat0;    // h0_i / q_i
    Eigen::MatrixXd h_ij0;     // doomed-cluster abort probabilities
    Eigen::VectorXd alpha;     // (rho-1)(q_i - h0_i)/(1 - q_i), in (0,1)
    Eigen::VectorXd q;
    // carried from the base model for component (b) sampling
    double m = 0.0;
    Eigen::VectorXd g;

    // h_ijk = m g_j q_i h_hat(i,k) / (h_ij + m g_j (q_i - h0_i)); stored
    // factorized, not as an N^3 tensor. Zero whenever h_ij0(i,j) = 1.
    double h_ijk(int i, int j, int k) const;
};

// Dual (extinction-conditioned) triplet:
//   hhat_ij = h_ij q_j / (q_i rho), mhat = (1+m-rho)/rho,
//   ghat_j = g_j q_j m / (1+m-rho).
// Throws NotSupercritical, or DualDegenerate when rho = 1+m or some q_i = 0.
LFModel dual_triplet(const LFModel& model, const SpectralSummary& sum);

// Harris-Sevastyanov (skeleton) triplet:
//   htilde_ij = (1-q_j)/(1-q_i) (h_ij + m g_j (q_i - h0_i)),
//   mtilde = rho - 1, gtilde_j = m/(rho-1) g_j (1-q_j).
// Rows of htilde are stochastic; the skeleton never dies out.
LFModel hs_triplet(const LFModel& model, const SpectralSummary& sum);

struct DualSpectral {
    double rho_hat = 0.0;   // 1/rho
    double beta_hat = 0.0;  // (mu-1)/(rho-1)
    Eigen::VectorXd u_hat;  // (q^-1 - 1)(1+m)/(mu-1)
    Eigen::VectorXd v_hat;  // m/(1+m) sum_k (g H^k) q  (componentwise product)
};
DualSpectral dual_spectral_closed(const LFModel& model,
                                  const SpectralSummary& sum,
                                  const SeriesOptions& opts = {});

struct HsSpectral {
    double rho_tilde = 0.0;   // rho
    double beta_tilde = 0.0;  // rho/(rho-1)
    Eigen::VectorXd u_tilde;  // 1
    Eigen::VectorXd v_tilde;  // m sum_k rho^-1-k (g {H + m/rho H q^t g}^k)(1-q)
};
HsSpectral hs_spectral_closed(const LFModel& model, const SpectralSummary& sum,
                              const SeriesOptions& opts = {});

SkeletonLaw skeleton_law(const LFModel& model, const SpectralSummary& sum);

// Mbar_i = 1 + m + alpha_i (1 + m_hat), the total offspring mean of a
// skeleton particle; strictly larger than the unconditioned M_i.
Eigen::VectorXd skeleton_total_mean(const LFModel& model,
                                    const SpectralSummary& sum);

}  // namespace lfbgw

#endif
