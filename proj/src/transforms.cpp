#include "lfbgw/transforms.hpp"

#include <cmath>
#include <sstream>

namespace lfbgw {

namespace {

constexpr double kDegenerateTol = 1e-12;

void require_supercritical(const SpectralSummary& sum, const char* op) {
    if (sum.criticality != Criticality::supercritical || !sum.rho)
        throw NotSupercritical(std::string(op) +
                               ": model is not supercritical");
}

// The dual conditions on extinction, the skeleton on survival; both are
// degenerate for types that are certain to do one or the other.
void require_q_interior(const SpectralSummary& sum, const char* op,
                        bool need_positive, bool need_below_one) {
    for (Eigen::Index i = 0; i < sum.q.size(); ++i) {
        if (need_positive && sum.q[i] < kDegenerateTol) {
            std::ostringstream msg;
            msg << op << ": q[" << i + 1
                << "] = 0, conditioning on extinction is degenerate";
            throw DualDegenerate(msg.str());
        }
        if (need_below_one && sum.q[i] > 1.0 - kDegenerateTol) {
            std::ostringstream msg;
            msg << op << ": q[" << i + 1
                << "] = 1, conditioning on survival is degenerate";
            throw DualDegenerate(msg.str());
        }
    }
}

// Derived triplets inherit the solver/series error of (rho, q); the exact
// 1e-12 stochasticity tolerance is reserved for user input.
constexpr double kDerivedTol = 1e-9;

}  // namespace

LFModel dual_triplet(const LFModel& model, const SpectralSummary& sum) {
    require_supercritical(sum, "dual_triplet");
    const double rho = *sum.rho;
    if (rho > 1.0 + model.m - kDegenerateTol)
        throw DualDegenerate("dual_triplet: rho = 1+m, extinction has "
                             "probability zero");
    require_q_interior(sum, "dual_triplet", /*need_positive=*/true,
                       /*need_below_one=*/false);

    const int n = model.n_types;
    const Eigen::VectorXd& q = sum.q;
    Eigen::MatrixXd Hh(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            Hh(i, j) = model.H(i, j) * q[j] / (q[i] * rho);
    const double mh = (1.0 + model.m - rho) / rho;
    Eigen::VectorXd gh =
        model.m / (1.0 + model.m - rho) * model.g.cwiseProduct(q);
    return make_model(std::move(Hh), std::move(gh), mh, kDerivedTol);
}

LFModel hs_triplet(const LFModel& model, const SpectralSummary& sum) {
    require_supercritical(sum, "hs_triplet");
    require_q_interior(sum, "hs_triplet", /*need_positive=*/false,
                       /*need_below_one=*/true);
    const double rho = *sum.rho;
    const int n = model.n_types;
    const Eigen::VectorXd& q = sum.q;
    Eigen::MatrixXd Ht(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            Ht(i, j) = (1.0 - q[j]) / (1.0 - q[i]) *
                       (model.H(i, j) + model.m * model.g[j] * (q[i] - model.h0[i]));
    const double mt = rho - 1.0;
    Eigen::VectorXd gt = model.m / mt *
                         model.g.cwiseProduct(Eigen::VectorXd::Ones(n) - q);
    return make_model(std::move(Ht), std::move(gt), mt, kDerivedTol);
}

DualSpectral dual_spectral_closed(const LFModel& model,
                                  const SpectralSummary& sum,
                                  const SeriesOptions& opts) {
    require_supercritical(sum, "dual_spectral_closed");
    const double rho = *sum.rho;
    if (rho > 1.0 + model.m - kDegenerateTol)
        throw DualDegenerate("dual_spectral_closed: rho = 1+m");
    require_q_interior(sum, "dual_spectral_closed", true, false);
    if (!std::isfinite(sum.mu))
        throw DomainError("dual_spectral_closed: mu is infinite");

    DualSpectral out;
    out.rho_hat = 1.0 / rho;
    out.beta_hat = (sum.mu - 1.0) / (rho - 1.0);
    out.u_hat = (sum.q.cwiseInverse() - Eigen::VectorXd::Ones(sum.q.size())) *
                (1.0 + model.m) / (sum.mu - 1.0);

    // v_hat = m/(1+m) sum_{k>=0} (g H^k) q, componentwise product
    Eigen::RowVectorXd w = model.g.transpose();
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(model.n_types);
    double term = 0.0;
    bool converged = false;
    for (int k = 0; k <= opts.k_max; ++k) {
        const Eigen::RowVectorXd t = w.cwiseProduct(sum.q.transpose());
        acc += t;
        term = t.sum();
        if (term < opts.eps) {
            converged = true;
            break;
        }
        w *= model.H;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "dual_spectral_closed: v_hat series term still " << term
            << " after " << opts.k_max << " terms";
        throw NotConverged(msg.str());
    }
    out.v_hat = model.m / (1.0 + model.m) * acc.transpose();
    return out;
}

HsSpectral hs_spectral_closed(const LFModel& model, const SpectralSummary& sum,
                              const SeriesOptions& opts) {
    require_supercritical(sum, "hs_spectral_closed");
    require_q_interior(sum, "hs_spectral_closed", false, true);
    const double rho = *sum.rho;
    const int n = model.n_types;

    HsSpectral out;
    out.rho_tilde = rho;
    out.beta_tilde = rho / (rho - 1.0);
    out.u_tilde = Eigen::VectorXd::Ones(n);

    // v_tilde = m sum_{k>=0} rho^-1-k (g K^k)(1-q), K = H + m/rho (H q^t) g.
    // K is similar to the stochastic htilde, so terms decay like rho^-k.
    const Eigen::MatrixXd K =
        model.H + model.m / rho * (model.H * sum.q) * model.g.transpose();
    const Eigen::VectorXd one_minus_q =
        Eigen::VectorXd::Ones(n) - sum.q;
    Eigen::RowVectorXd w = model.g.transpose();
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(n);
    double scale = 1.0 / rho;
    double term = 0.0;
    bool converged = false;
    for (int k = 0; k <= opts.k_max; ++k) {
        const Eigen::RowVectorXd t =
            scale * w.cwiseProduct(one_minus_q.transpose());
        acc += t;
        term = model.m * t.sum();
        if (term < opts.eps) {
            converged = true;
            break;
        }
        w *= K;
        scale /= rho;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "hs_spectral_closed: v_tilde series term still " << term
            << " after " << opts.k_max << " terms";
        throw NotConverged(msg.str());
    }
    out.v_tilde = model.m * acc.transpose();
    return out;
}

SkeletonLaw skeleton_law(const LFModel& model, const SpectralSummary& sum) {
    require_supercritical(sum, "skeleton_law");
    const LFModel dual = dual_triplet(model, sum);
    const LFModel hs = hs_triplet(model, sum);
    const double rho = *sum.rho;
    const int n = model.n_types;
    const Eigen::VectorXd& q = sum.q;

    SkeletonLaw law;
    law.n_types = n;
    law.h_tilde = hs.H;
    law.m_tilde = hs.m;
    law.g_tilde = hs.g;
    law.h_hat = dual.H;
    law.g_hat = dual.g;
    law.m_hat = dual.m;
    law.h_hat0 = dual.h0;
    law.q = q;
    law.m = model.m;
    law.g = model.g;

    law.h_ij0.resize(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double den =
                model.H(i, j) + model.m * model.g[j] * (q[i] - model.h0[i]);
            // den = 0 forces htilde_ij = 0, so the pair is never sampled;
            // setting the abort probability to 1 keeps the row well defined
            law.h_ij0(i, j) = den > 0.0 ? model.H(i, j) / den : 1.0;
        }
    }

    law.alpha.resize(n);
    for (int i = 0; i < n; ++i) {
        law.alpha[i] = (rho - 1.0) * (q[i] - model.h0[i]) / (1.0 - q[i]);
        if (!(law.alpha[i] > 0.0 && law.alpha[i] < 1.0)) {
            std::ostringstream msg;
            msg << "skeleton_law: alpha[" << i + 1 << "] = " << law.alpha[i]
                << " outside (0,1)";
            throw AlphaOutOfRange(msg.str());
        }
    }
    return law;
}

double SkeletonLaw::h_ijk(int i, int j, int k) const {
    // h_ij + m g_j (q_i - h0_i), recovered from htilde_ij
    const double den = h_tilde(i, j) * (1.0 - q[i]) / (1.0 - q[j]);
    if (den <= 0.0) return 0.0;
    return m * g[j] * q[i] * h_hat(i, k) / den;
}

Eigen::VectorXd skeleton_total_mean(const LFModel& model,
                                    const SpectralSummary& sum) {
    const SkeletonLaw law = skeleton_law(model, sum);
    return Eigen::VectorXd::Constant(model.n_types, 1.0 + model.m) +
           law.alpha * (1.0 + law.m_hat);
}

}  // namespace lfbgw
