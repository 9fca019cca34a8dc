#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "infinitas/family.hpp"

namespace infinitas {

/// Absolute cutoff, after scaling A by its largest row norm, below which A is
/// treated as not surjective.
inline constexpr double kSurjectivityThreshold = 1e-9;

/// nu(A) = min over unit phi of |A^T phi| for A: R^p -> R^q stored as q x p.
/// Zero when q > p or when A is numerically rank deficient.
double rabier_number(const Eigen::MatrixXd& A);

struct RabierEquivalence {
    double infimum = 0.0;         // min |A^T phi| by sphere descent
    double inner_radius = 0.0;    // largest ball inside A(B^p), from the support function
    double singular_distance = 0.0;  // distance to the rank-deficient maps
    double discrepancy = 0.0;     // largest pairwise difference
};

/// Evaluates the three characterisations of nu(A) independently.
RabierEquivalence check_rabier_equivalences(const Eigen::MatrixXd& A);

/// nu of the projection graph(A) -> R^q, that is nu(A) / sqrt(1 + nu(A)^2).
double nu_of_graph_projection(const Eigen::MatrixXd& A);

/// Norm of the component of the unit vector u orthogonal to span(E), where E
/// has orthonormal columns. Throws std::invalid_argument for non-unit u.
double delta_distance(const Eigen::VectorXd& u, const Eigen::MatrixXd& E);

struct TangentFrame {
    Eigen::VectorXd point;
    Eigen::MatrixXd tangent;  // (n+s) x dim W
    Eigen::MatrixXd normal;   // (n+s) x codim
};

/// Point (x, G(x)) of the graph of a map-graph family.
Eigen::VectorXd graph_point(const FamilySpec& spec, const Eigen::VectorXd& x);
/// Values G(x) and Jacobian DG(x) (s x n) of a map-graph family.
Eigen::VectorXd map_values(const FamilySpec& spec, const Eigen::VectorXd& x);
Eigen::MatrixXd map_jacobian(const FamilySpec& spec, const Eigen::VectorXd& x);

/// Defining residual of W at w: |G(x) - y| for map-graph families, |F(w)| otherwise.
double defining_residual(const FamilySpec& spec, const Eigen::VectorXd& w);

/// Orthonormal frames of T_wW and its normal space. Throws std::domain_error
/// with "singular point" when |grad F(w)| < 1e-9 and std::invalid_argument
/// when w is off W by more than tol * (1 + |grad F(w)|).
TangentFrame fiber_tangent_frame(const FamilySpec& spec, const Eigen::VectorXd& w, double tol = 1e-6);

/// nu of the restriction to T_wW of the projection (x, y) -> y.
double fiber_rabier(const FamilySpec& spec, const Eigen::VectorXd& w);
double fiber_rabier(const FamilySpec& spec, const TangentFrame& frame);

/// (1 + |w|) * fiber_rabier(spec, w).
double malgrange_functional(const FamilySpec& spec, const Eigen::VectorXd& w);

/// Distance of w/|w| to the tangent space of the fiber through w.
double spherical_deviation(const FamilySpec& spec, const Eigen::VectorXd& w);

/// V = A^T (A A^T)^{-1}. Throws std::domain_error when A is not surjective.
Eigen::MatrixXd right_inverse(const Eigen::MatrixXd& A);

class FlowBlocked : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FlowOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double identity_tol = 1e-6;
    double initial_step = 1e-2;
    double min_step = 1e-12;
    int max_steps = 200000;
};

struct FlowResult {
    Eigen::VectorXd endpoint;
    double max_identity_residual = 0.0;  // over accepted steps, after correction
    double min_malgrange = 0.0;          // smallest M seen along the path
    int accepted_steps = 0;
    int rejected_steps = 0;
    int corrections = 0;
    std::vector<double> times;                // accepted times, starting at 0
    std::vector<Eigen::VectorXd> trajectory;  // points at those times
};

/// Integrates x' = V(x) (y - c) on t in [0, 1] from x0 with G(x0) = c, keeping
/// G(x(t)) = c + t (y - c). Map-graph families only. Throws FlowBlocked on
/// step-size underflow.
FlowResult transport_fiber(const FamilySpec& spec, const Eigen::VectorXd& x0, const Eigen::VectorXd& target,
                           const FlowOptions& options = {});

}  // namespace infinitas
