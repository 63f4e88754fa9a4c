#ifndef LFBGW_SINGLETYPE_HPP
#define LFBGW_SINGLETYPE_HPP

#include <optional>

#include "lfbgw/spectral.hpp"

namespace lfbgw {

// Single-type linear-fractional law f(s) = h0 + h1 s / (1+m-ms), h1 = 1-h0.
// Everything about it is available in closed form, which makes this module
// the independent oracle for the N=1 multitype pipeline.
struct STParams {
    double h0 = 0.0;
    double m = 0.0;
    double h1() const { return 1.0 - h0; }
};

struct STReport {
    double M = 0.0;  // h1 (1+m)
    Criticality criticality = Criticality::subcritical;
    double q = 1.0;  // (1+m-M)/m when supercritical, else 1
    // supercritical-only transforms
    std::optional<double> m_hat;    // h0/h1
    std::optional<double> h_hat0;   // m/(m+1)
    std::optional<double> M_hat;    // 1/M
    std::optional<double> m_tilde;  // m(1-q) = M-1
    std::optional<double> M_bar;    // 1+m+m_hat = M+(M+1) m_hat
    std::optional<double> alpha;    // (M-1)(q-h0)/(1-q)
};

void st_validate(const STParams& p);  // throws DomainError

double st_pgf(const STParams& p, double s);
double st_pgf_iterate(const STParams& p, double s, int n);

STReport st_analyze(const STParams& p);

// Factorized joint skeleton/doomed PGF
//   F(s,t) = s * 1/(1+m - mtilde s - (m-mtilde) t) * 1/(1+mhat - mhat t).
double st_joint_F(const STParams& p, double s, double t);

// Defining formula (f(s(1-q)+tq) - f(tq)) / (1-q); agrees with st_joint_F.
double st_joint_F_defining(const STParams& p, double s, double t);

// Total-offspring PGF of a skeleton particle, fbar(s) = F(s,s).
double st_fbar(const STParams& p, double s);

}  // namespace lfbgw

#endif
