#ifndef LFBGW_MODEL_HPP
#define LFBGW_MODEL_HPP

#include <Eigen/Dense>
#include <string>

#include "lfbgw/errors.hpp"

namespace lfbgw {

// A linear-fractional reproduction law on the finite type space {1..N}.
//
// A type-i particle produces, with probability h0[i], nothing; otherwise one
// "first" offspring whose type j is drawn proportionally to H(i,j), plus a
// Geometric(1/(1+m)) number of extra offspring with types i.i.d. ~ g.
// The triplet (H, g, m) fully determines the process; h0 is derived.
struct LFModel {
    int n_types = 0;       // N
    Eigen::MatrixXd H;     // N x N, substochastic (h_ij >= 0, row sums <= 1)
    Eigen::VectorXd g;     // N, probability vector
    double m = 0.0;        // mean of the geometric extra-offspring count
    Eigen::VectorXd h0;    // derived: h0[i] = 1 - sum_j H(i,j)
};

// Default tolerance for the stochasticity checks.
inline constexpr double kModelTol = 1e-12;

// Builds a model from (H, g, m): derives h0 (snapping |h0|<tol roundoff to
// the exact boundary) and validates. Throws ValidationError.
LFModel make_model(Eigen::MatrixXd H, Eigen::VectorXd g, double m,
                   double tol = kModelTol);

// Reports every invariant violation; never throws.
ValidationReport validate_model(const LFModel& model, double tol = kModelTol);

// Parses the JSON model document (dense or sparse H), derives h0 and
// validates. Throws ParseError / ValidationError.
LFModel load_model(const std::string& text, double tol = kModelTol);
LFModel load_model_file(const std::string& path, double tol = kModelTol);

// Canonical JSON document (dense H); load_model(save_model(x)) == x exactly.
std::string save_model(const LFModel& model);

// Mean offspring matrix M = H + m (H 1^t) g, so M(i,j) is the expected
// number of type-j offspring of a type-i particle.
Eigen::MatrixXd mean_matrix(const LFModel& model);

// N=1 model with H = [[1-h0]], g = [1]. Throws DomainError unless
// 0 <= h0 < 1 and m > 0.
LFModel embed_single_type(double h0, double m);

// FNV-1a 64 hash of the canonical document, as fixed-width hex.
std::string model_digest(const LFModel& model);

}  // namespace lfbgw

#endif
