#include "lfbgw/spectral.hpp"

#include <cmath>
#include <sstream>

namespace lfbgw {

const char* to_string(Criticality c) {
    switch (c) {
        case Criticality::subcritical: return "subcritical";
        case Criticality::critical: return "critical";
        case Criticality::supercritical: return "supercritical";
    }
    return "?";
}

namespace {

[[noreturn]] void throw_not_converged(const char* what, int k_max,
                                      double last_term) {
    std::ostringstream msg;
    msg << what << ": series term still " << last_term << " after " << k_max
        << " terms";
    throw NotConverged(msg.str());
}

constexpr double kCriticalBand = 1e-12;

}  // namespace

SeriesWeights series_weights(const LFModel& model, double rho,
                             const SeriesOptions& opts) {
    if (!(rho > 1.0))
        throw DomainError("series_weights: rho must exceed 1");
    SeriesWeights out;
    Eigen::VectorXd w = model.H.rowwise().sum();  // H^k 1^t, k = 1
    double scale = 1.0 / rho;                     // rho^-k
    for (int k = 1; k <= opts.k_max; ++k) {
        const double a_k = model.g.dot(w);
        out.a.push_back(a_k);
        out.k_used = k;
        if (model.m * scale * a_k < opts.eps) return out;
        w = model.H * w;
        scale /= rho;
    }
    throw_not_converged("series_weights", opts.k_max,
                        model.m * scale * rho * out.a.back());
}

double phi(const LFModel& model, double rho, const SeriesOptions& opts) {
    const SeriesWeights sw = series_weights(model, rho, opts);
    double sum = 0.0;
    double scale = 1.0;
    for (double a_k : sw.a) {
        scale /= rho;
        sum += scale * a_k;
    }
    return model.m * sum;
}

double compute_mu(const LFModel& model, const SeriesOptions& opts,
                  int* k_used) {
    Eigen::VectorXd w = model.H.rowwise().sum();
    double sum = 0.0;
    for (int k = 1; k <= opts.k_max; ++k) {
        const double term = model.m * model.g.dot(w);
        sum += term;
        if (term < opts.eps) {
            if (k_used) *k_used = k;
            return sum;
        }
        if (sum > 1.0 && k == opts.k_max) break;
        w = model.H * w;
    }
    if (k_used) *k_used = opts.k_max;
    // Terms are non-increasing (H is substochastic), so a partial sum past 1
    // already proves supercriticality; report the non-summable case as +inf.
    return sum > 1.0 ? kInfMu : sum;
}

namespace {

// phi with an early exit: once the partial sum passes `cap` the caller only
// needs to know the value is on the far side of the root. Root finding on
// nearly-divergent series would otherwise burn the whole term budget.
struct PhiProbe {
    double value = 0.0;
    bool capped = false;
};

PhiProbe phi_capped(const LFModel& model, double rho, double cap,
                    const SeriesOptions& opts) {
    // iterate w_k = rho^-k H^k 1^t directly; a separate rho^-k scale would
    // overflow for rho < 1 while H^k 1^t underflows
    Eigen::VectorXd w = model.H.rowwise().sum() / rho;
    double sum = 0.0;
    double term = 0.0;
    for (int k = 1; k <= opts.k_max; ++k) {
        term = model.m * model.g.dot(w);
        sum += term;
        if (term < opts.eps) return {sum, false};
        if (sum > cap) return {sum, true};
        w = model.H * w / rho;
    }
    if (sum > 1.0) return {sum, true};
    throw_not_converged("phi", opts.k_max, term);
}

// Bisection on a bracket with phi(lo) > 1 > phi(hi), accelerated by a
// secant step whenever the last two clean evaluations allow one.
double refine_root(const LFModel& model, double lo, double hi, double tol,
                   const SeriesOptions& opts) {
    double r1 = 0.0, f1 = 0.0;  // f = phi - 1 at the two newest clean points
    double r2 = 0.0, f2 = 0.0;
    int clean = 0;
    for (int iter = 0; iter < 200; ++iter) {
        double r = 0.5 * (lo + hi);
        if (clean >= 2 && f1 != f2) {
            const double r_sec = r2 - f2 * (r2 - r1) / (f2 - f1);
            if (r_sec > lo && r_sec < hi) r = r_sec;
        }
        const PhiProbe p = phi_capped(model, r, 4.0, opts);
        const double f = p.value - 1.0;
        if (!p.capped && std::abs(f) < tol) return r;
        if (f > 0.0)
            lo = r;
        else
            hi = r;
        if (!p.capped) {
            r1 = r2;
            f1 = f2;
            r2 = r;
            f2 = f;
            ++clean;
        }
        // bracket collapsed to machine precision: the root is as sharp as
        // doubles allow even if phi itself carries more roundoff than tol
        if (hi - lo < 4e-16 * hi) return 0.5 * (lo + hi);
    }
    throw NotConverged("solve_rho: iteration budget (200) exhausted");
}

}  // namespace

double solve_rho(const LFModel& model, double tol, const SeriesOptions& opts) {
    const double mu = compute_mu(model, opts);
    if (!(mu > 1.0 + kCriticalBand))
        throw NotSupercritical("solve_rho: mu <= 1");
    const double hi = 1.0 + model.m;
    const double phi_hi = phi(model, hi, opts);
    if (std::abs(phi_hi - 1.0) < tol) return hi;
    // phi(1+delta) >= mu > 1 up to continuity, phi(1+m) < 1: bracketed.
    return refine_root(model, 1.0 + 1e-9, hi, tol, opts);
}

double solve_rho_any(const LFModel& model, double tol,
                     const SeriesOptions& opts) {
    const double mu = compute_mu(model, opts);
    if (mu > 1.0 + kCriticalBand) return solve_rho(model, tol, opts);
    if (std::abs(mu - 1.0) <= kCriticalBand) return 1.0;
    if (model.H.rowwise().sum().maxCoeff() <= 0.0)
        throw DomainError("solve_rho_any: H is zero, phi has no root");

    // Subcritical: the root sits below 1. Walk down geometrically until phi
    // crosses 1; phi blows up towards the decay rate of a_k, so the capped
    // probe always terminates.
    double hi = 1.0, lo = 1.0;
    for (int step = 0; step < 200; ++step) {
        lo *= 0.7;
        const PhiProbe p = phi_capped(model, lo, 4.0, opts);
        if (p.capped || p.value > 1.0) break;
        hi = lo;
        if (lo < 1e-30)
            throw NotConverged("solve_rho_any: no bracket found above 1e-30");
    }
    return refine_root(model, lo, hi, tol, opts);
}

double compute_beta(const LFModel& model, double rho, const SeriesOptions& opts,
                    int* k_used) {
    Eigen::VectorXd w = model.H.rowwise().sum() / rho;  // rho^-k H^k 1^t
    double sum = 0.0;
    double term = 0.0;
    for (int k = 1; k <= opts.k_max; ++k) {
        term = model.m * k * model.g.dot(w);
        sum += term;
        if (term < opts.eps) {
            if (k_used) *k_used = k;
            return sum;
        }
        w = model.H * w / rho;
    }
    throw_not_converged("compute_beta", opts.k_max, term);
}

Eigen::VectorXd eigen_u(const LFModel& model, double rho, double beta,
                        const SeriesOptions& opts, int* k_used) {
    Eigen::VectorXd w = model.H.rowwise().sum() / rho;  // rho^-k H^k 1^t
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.n_types);
    double term = 0.0;
    for (int k = 1; k <= opts.k_max; ++k) {
        sum += w;
        term = w.maxCoeff();
        if (term < opts.eps) {
            if (k_used) *k_used = k;
            return (1.0 + model.m) / beta * sum;
        }
        w = model.H * w / rho;
    }
    throw_not_converged("eigen_u", opts.k_max, term);
}

Eigen::VectorXd eigen_v(const LFModel& model, double rho,
                        const SeriesOptions& opts, int* k_used) {
    Eigen::RowVectorXd w = model.g.transpose();  // rho^-k g H^k
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(model.n_types);
    double term = 0.0;
    for (int k = 0; k <= opts.k_max; ++k) {
        sum += w;
        term = model.m * w.sum();
        if (term < opts.eps) {
            if (k_used) *k_used = k + 1;
            return model.m / (1.0 + model.m) * sum.transpose();
        }
        w = w * model.H / rho;
    }
    throw_not_converged("eigen_v", opts.k_max, term);
}

Criticality classify(const LFModel& model, const SeriesOptions& opts) {
    const double mu = compute_mu(model, opts);
    if (mu > 1.0 + kCriticalBand) return Criticality::supercritical;
    if (mu < 1.0 - kCriticalBand) return Criticality::subcritical;
    return Criticality::critical;
}

Eigen::VectorXd fixed_point_q(const LFModel& model, double tol, int max_iter) {
    const int n = model.n_types;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int it = 0; it < max_iter; ++it) {
        // inline pgf_eval to keep spectral free of the genfun dependency
        const double denom = 1.0 + model.m - model.m * model.g.dot(x);
        Eigen::VectorXd next = model.h0 + (model.H * x) / denom;
        const double step = (next - x).lpNorm<Eigen::Infinity>();
        x = std::move(next);
        if (step < tol) return x;
    }
    throw NotConverged("fixed_point_q: iteration budget exhausted");
}

SpectralSummary analyze(const LFModel& model, const SeriesOptions& opts,
                        double rho_tol, double fp_tol) {
    SpectralSummary s;
    int k_mu = 0;
    s.mu = compute_mu(model, opts, &k_mu);
    s.k_used = k_mu;
    s.criticality = s.mu > 1.0 + kCriticalBand ? Criticality::supercritical
                    : s.mu < 1.0 - kCriticalBand ? Criticality::subcritical
                                                 : Criticality::critical;
    if (s.criticality != Criticality::supercritical) {
        s.q = Eigen::VectorXd::Ones(model.n_types);
        return s;
    }

    const double rho = solve_rho(model, rho_tol, opts);
    int k_beta = 0, k_u = 0, k_v = 0;
    const double beta = compute_beta(model, rho, opts, &k_beta);
    Eigen::VectorXd u = eigen_u(model, rho, beta, opts, &k_u);
    Eigen::VectorXd v = eigen_v(model, rho, opts, &k_v);
    s.k_used = std::max({k_mu, k_beta, k_u, k_v});

    Eigen::VectorXd q =
        Eigen::VectorXd::Ones(model.n_types) -
        (rho - 1.0) / (1.0 + model.m) * beta * u;
    // clip roundoff excursions outside [0,1]; anything larger than that is
    // caught by the fixed-point cross-check below
    q = q.cwiseMax(0.0).cwiseMin(1.0);

    const Eigen::VectorXd q_fp = fixed_point_q(model);
    const double gap = (q - q_fp).lpNorm<Eigen::Infinity>();
    if (gap > fp_tol) {
        std::ostringstream msg;
        msg << "extinction probabilities disagree: closed form vs fixed point "
               "differ by "
            << gap << " (series truncation too coarse)";
        throw FixedPointMismatch(msg.str());
    }

    s.rho = rho;
    s.beta = beta;
    s.u = std::move(u);
    s.v = std::move(v);
    s.q = std::move(q);
    return s;
}

}  // namespace lfbgw
