#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infinitas/poly.hpp"

namespace infinitas {

/// Raised when a level set sample has |grad f| < 1e-6.
class SingularLevel : public std::domain_error {
public:
    explicit SingularLevel(const Eigen::VectorXd& where);
    const Eigen::VectorXd& location() const noexcept { return where_; }

private:
    Eigen::VectorXd where_;
};

inline constexpr double kRegularityFloor = 1e-6;

/// Discretisation of {f = 0} inside the closed ball B_R, for curves in R^2
/// (segments) and surfaces in R^3 (triangles).
struct LevelMesh {
    int dimension = 0;  // 1 for curves, 2 for surfaces; 0 when empty
    int ambient = 0;
    double radius = 0.0;
    std::vector<Jet2> vertices;
    std::vector<std::array<int, 3>> elements;  // segments use the first two slots
    std::vector<double> measure;               // per element length or area
    std::vector<int> component;                // per element
    std::vector<bool> boundary;                // element touches S_R
    int component_count = 0;
    std::vector<bool> closed;  // per component, curves only: closed loop

    bool empty() const { return elements.empty(); }
    double total_measure() const;
    int element_size() const { return dimension + 1; }

    /// OBJ-style text: "v x y [z]" lines then "l a b" or "f a b c" (1-based).
    std::string to_obj() const;
};

struct TraceOptions {
    double max_step = 0.0;      // 0 selects R / 500
    double max_turn = 0.01;     // radians per predictor step
    int coarse_grid = 0;        // seed grid cells per side over [-R, R]^2; 0 selects 512
    int fine_grid = 256;        // seed grid cells per side over [-r, r]^2, r = min(R, 4)
};

/// Traces {f = 0} inside B_R for a polynomial in two variables.
LevelMesh trace_curve(const Polynomial& f, double R, const TraceOptions& options = {});

struct SurfaceOptions {
    int resolution = 64;       // grid cells per side over [-R, R]^3
    double inner_radius = 0.0;  // > 0 keeps only the shell inner_radius <= |x| <= R
};

/// Marching-tetrahedra triangulation of {f = 0} inside B_R for three variables.
LevelMesh mesh_surface(const Polynomial& f, double R, const SurfaceOptions& options = {});

/// Meshes {f = 0} in B_R with the mesher matching the number of variables.
LevelMesh mesh_level(const Polynomial& f, double R, int resolution_hint = 0);

struct CurvatureSample {
    Eigen::VectorXd point;
    Eigen::VectorXd principal;  // k_1..k_d
    Eigen::VectorXd sigma;      // sigma_0..sigma_d
    Eigen::VectorXd curvature_vector;  // curves in R^3 only
};

/// Principal curvatures of the hypersurface {f = 0} at the jet's point for the
/// unit normal -grad f / |grad f|: eigenvalues of T^T H T / |grad f| with T an
/// orthonormal tangent basis.
CurvatureSample shape_operator(const Jet2& jet);

/// Curvature data of the curve {f1 = f2 = 0} in R^3.
CurvatureSample curve_sample(const Jet2& f1, const Jet2& f2);

/// Elementary symmetric functions sigma_0..sigma_d of the values k.
Eigen::VectorXd elementary_symmetric(const Eigen::VectorXd& k);

/// Lipschitz-Killing integrands K_0..K_d: 2 sigma_i for even i and 0 for odd i
/// in codimension one; normal-circle trapezoid quadrature (64 nodes) in
/// codimension two. Throws std::invalid_argument for other codimensions.
Eigen::VectorXd lk_curvatures(const CurvatureSample& sample, int codim);

/// Element-measure weighted average of per-vertex values; constants integrate
/// to the total measure.
double integrate_over_level(const LevelMesh& mesh, const std::vector<double>& vertex_values);
double integrate_over_level(const LevelMesh& mesh, const std::function<double(const Jet2&)>& integrand);

struct VolumeEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo estimate of vol({f <= 0} cap B_R), uniform samples in the ball.
VolumeEstimate sublevel_volume(const Polynomial& f, double R, long samples, std::uint64_t seed);

/// Volume and sphere-area constants: s_l = vol(S^l), b_l = vol(B^l).
double sphere_volume(int l);
double ball_volume(int l);

/// Lambda_k of the manifold with boundary {f <= 0} cap B_R from its boundary
/// mesh: (1 / s_{n-k-1}) * integral of sigma_{n-1-k} with the inward normal.
double boundary_lambda(const LevelMesh& mesh, int k);

/// Lambda_k of the level manifold itself: (1 / s_{n-k-1}) * integral of K_{d-k}.
/// k = d returns the mesh measure.
double manifold_lambda(const LevelMesh& mesh, int k);

/// V - E (+ F) of the mesh's simplicial complex.
int euler_characteristic(const LevelMesh& mesh);

/// Roots of theta -> f(R cos theta, R sin theta) on [0, 2 pi).
struct CircleRoots {
    std::vector<double> angles;
    bool tangency = false;  // an undecided interval or a nearly tangent root
};

CircleRoots circle_roots(const Polynomial& f, double R);

}  // namespace infinitas
