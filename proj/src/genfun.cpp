#include "lfbgw/genfun.hpp"

#include <cmath>
#include <sstream>

namespace lfbgw {

namespace {

void require_unit_box(const Eigen::VectorXd& s, const char* op) {
    for (Eigen::Index j = 0; j < s.size(); ++j)
        if (!(s[j] >= -1e-12 && s[j] <= 1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << op << ": s[" << j + 1 << "] = " << s[j]
                << " outside [0,1]";
            throw DomainError(msg.str());
        }
}

double denom_or_throw(const LFModel& model, const Eigen::VectorXd& s,
                      const char* op) {
    const double denom = 1.0 + model.m - model.m * model.g.dot(s);
    // cannot go below 1 for s in the unit box with a valid g; guards
    // corrupted inputs only
    if (denom < 1e-14)
        throw DomainError(std::string(op) + ": vanishing denominator");
    return denom;
}

}  // namespace

Eigen::VectorXd pgf_eval(const LFModel& model, const Eigen::VectorXd& s) {
    require_unit_box(s, "pgf_eval");
    const double denom = denom_or_throw(model, s, "pgf_eval");
    return model.h0 + (model.H * s) / denom;
}

Eigen::VectorXd pgf_iterate(const LFModel& model, const Eigen::VectorXd& s,
                            int n) {
    if (n < 0) throw DomainError("pgf_iterate: n must be non-negative");
    Eigen::VectorXd x = s;
    for (int k = 0; k < n; ++k) x = pgf_eval(model, x);
    return x;
}

Eigen::VectorXd joint_pgf_F(const LFModel& model, const SpectralSummary& sum,
                            const Eigen::VectorXd& s,
                            const Eigen::VectorXd& t) {
    if (sum.criticality != Criticality::supercritical)
        throw NotSupercritical("joint_pgf_F: model is not supercritical");
    require_unit_box(s, "joint_pgf_F");
    require_unit_box(t, "joint_pgf_F");
    const Eigen::VectorXd& q = sum.q;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(q.size());
    const Eigen::VectorXd mixed =
        s.cwiseProduct(ones - q) + t.cwiseProduct(q);
    const Eigen::VectorXd tq = t.cwiseProduct(q);
    const Eigen::VectorXd f_mixed = pgf_eval(model, mixed);
    const Eigen::VectorXd f_tq = pgf_eval(model, tq);
    return (f_mixed - f_tq).cwiseQuotient(ones - q);
}

Eigen::VectorXd joint_pgf_F_factorized(const SkeletonLaw& law,
                                       const Eigen::VectorXd& s,
                                       const Eigen::VectorXd& t) {
    require_unit_box(s, "joint_pgf_F_factorized");
    require_unit_box(t, "joint_pgf_F_factorized");
    const int n = law.n_types;
    const double gt_s = law.g_tilde.dot(s);
    const double gh_t = law.g_hat.dot(t);
    const double outer_den = 1.0 + law.m - law.m_tilde * gt_s -
                             (law.m - law.m_tilde) * gh_t;
    const double inner_den = 1.0 + law.m_hat - law.m_hat * gh_t;
    const Eigen::VectorXd Hh_t = law.h_hat * t;

    Eigen::VectorXd F(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            if (law.h_tilde(i, j) == 0.0) continue;
            // sum_k h_ijk t_k = (m g_j q_i / den_ij) (Hhat t)_i
            const double den_ij =
                law.h_tilde(i, j) * (1.0 - law.q[i]) / (1.0 - law.q[j]);
            const double cluster =
                law.h_ij0(i, j) +
                law.m * law.g[j] * law.q[i] * Hh_t[i] / (den_ij * inner_den);
            acc += law.h_tilde(i, j) * s[j] * cluster;
        }
        F[i] = acc / outer_den;
    }
    return F;
}

Eigen::VectorXd mixture_residual(const LFModel& model,
                                 const SpectralSummary& sum,
                                 const Eigen::VectorXd& s) {
    const LFModel dual = dual_triplet(model, sum);  // throws when degenerate
    const Eigen::VectorXd f = pgf_eval(model, s);
    const Eigen::VectorXd F_ss = joint_pgf_F(model, sum, s, s);
    const Eigen::VectorXd f_hat = pgf_eval(dual, s);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.n_types);
    return f - (ones - sum.q).cwiseProduct(F_ss) - sum.q.cwiseProduct(f_hat);
}

TotalCountPmf total_count_pmf(const LFModel& model, int i, int k_cap) {
    if (i < 0 || i >= model.n_types)
        throw DomainError("total_count_pmf: type index out of range");
    if (k_cap < 0) throw DomainError("total_count_pmf: k_cap must be >= 0");

    TotalCountPmf out;
    out.p.resize(k_cap + 1, 0.0);
    const double h0 = model.h0[i];
    const double h1 = 1.0 - h0;
    const double r = model.m / (1.0 + model.m);
    const double one_minus_r = 1.0 / (1.0 + model.m);

    out.p[0] = h0;
    double geo = one_minus_r;  // P(extra = j) at j = 0
    for (int k = 1; k <= k_cap; ++k) {
        out.p[k] = h1 * geo;
        geo *= r;
    }
    // analytic remainder beyond k_cap: totals 1+j with j >= k_cap
    const int J = k_cap;  // first truncated extra count
    const double rJ = std::pow(r, J);
    out.tail_mass = h1 * rJ;
    // sum_{j>=J} (1+j)(1-r) r^j = r^J (1 + J + r/(1-r)), and r/(1-r) = m
    out.tail_mean = h1 * rJ * (1.0 + J + model.m);
    return out;
}

}  // namespace lfbgw
