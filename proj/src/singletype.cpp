#include "lfbgw/singletype.hpp"

#include <cmath>

namespace lfbgw {

namespace {

constexpr double kCriticalBand = 1e-12;

void require_supercritical_st(const STReport& r, const char* op) {
    if (r.criticality != Criticality::supercritical)
        throw NotSupercritical(std::string(op) + ": M <= 1");
}

}  // namespace

void st_validate(const STParams& p) {
    if (!(p.h0 >= 0.0 && p.h0 < 1.0))
        throw DomainError("singletype: h0 must lie in [0,1)");
    if (!(p.m > 0.0)) throw DomainError("singletype: m must be positive");
}

double st_pgf(const STParams& p, double s) {
    return p.h0 + p.h1() * s / (1.0 + p.m - p.m * s);
}

double st_pgf_iterate(const STParams& p, double s, int n) {
    double x = s;
    for (int k = 0; k < n; ++k) x = st_pgf(p, x);
    return x;
}

STReport st_analyze(const STParams& p) {
    st_validate(p);
    STReport r;
    r.M = p.h1() * (1.0 + p.m);
    r.criticality = r.M > 1.0 + kCriticalBand ? Criticality::supercritical
                    : r.M < 1.0 - kCriticalBand ? Criticality::subcritical
                                                : Criticality::critical;
    if (r.criticality != Criticality::supercritical) {
        r.q = 1.0;
        return r;
    }
    r.q = (1.0 + p.m - r.M) / p.m;  // equals h0 (1 + 1/m)
    r.m_hat = p.h0 / p.h1();
    r.h_hat0 = p.m / (p.m + 1.0);
    r.M_hat = 1.0 / r.M;
    r.m_tilde = p.m * (1.0 - r.q);  // equals M - 1
    r.M_bar = 1.0 + p.m + *r.m_hat;
    r.alpha = (r.M - 1.0) * (r.q - p.h0) / (1.0 - r.q);
    return r;
}

double st_joint_F(const STParams& p, double s, double t) {
    const STReport r = st_analyze(p);
    require_supercritical_st(r, "st_joint_F");
    const double mt = *r.m_tilde;
    const double mh = *r.m_hat;
    return s / (1.0 + p.m - mt * s - (p.m - mt) * t) /
           (1.0 + mh - mh * t);
}

double st_joint_F_defining(const STParams& p, double s, double t) {
    const STReport r = st_analyze(p);
    require_supercritical_st(r, "st_joint_F_defining");
    const double q = r.q;
    return (st_pgf(p, s * (1.0 - q) + t * q) - st_pgf(p, t * q)) / (1.0 - q);
}

double st_fbar(const STParams& p, double s) {
    const STReport r = st_analyze(p);
    require_supercritical_st(r, "st_fbar");
    const double mh = *r.m_hat;
    return s / (1.0 + p.m - p.m * s) / (1.0 + mh - mh * s);
}

}  // namespace lfbgw
