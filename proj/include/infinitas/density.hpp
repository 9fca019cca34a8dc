#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infinitas/family.hpp"
#include "infinitas/poly.hpp"
#include "infinitas/topology.hpp"

namespace infinitas {

struct GeometricConstants {
    double s = 0.0;  // volume of the unit sphere S^l
    double b = 0.0;  // volume of the unit ball B^l
};

/// Closed forms s_l = 2 pi^{(l+1)/2} / Gamma((l+1)/2), b_l = pi^{l/2} / Gamma(l/2 + 1).
GeometricConstants geometric_constants(int l);

struct ExtrapolateOptions {
    double tolerance = 0.02;  // relative to max(1, |value|)
};

struct Extrapolation {
    double limit = 0.0;
    double error = 0.0;
    double alpha = 0.0;    // fitted decay exponent (power-law rule)
    std::string rule;      // "constant", "power-law", "last-value"
    bool converged = false;
};

/// Limit of v(R) from the table. Fits v = L + a R^-alpha over the last four
/// finite entries when the differences are monotone and shrinking; otherwise
/// returns the last value with error |last - previous|. Throws
/// std::invalid_argument with fewer than 3 finite entries.
Extrapolation extrapolate(const std::vector<double>& radii, const std::vector<double>& values,
                          const ExtrapolateOptions& options = {});

enum class DensityTarget { Kappa, Sigma, Theta, Lambda };

std::string to_string(DensityTarget t);

struct DensityRow {
    double radius = 0.0;
    double raw = 0.0;
    double normalized = 0.0;
};

struct DensityEstimate {
    DensityTarget target = DensityTarget::Kappa;
    int index = 0;
    std::vector<DensityRow> table;
    double limit = 0.0;
    double error = 0.0;
    std::string rule;
    std::string status;  // "converged", "non-convergent", "exact"
    std::vector<std::string> flags;

    /// "kappa:0", "sigma:1", "theta", "lambda:2".
    std::string label() const;
    bool converged() const { return status != "non-convergent"; }
};

struct DensityOptions {
    int mesh_level = 4;        // curves: seed grid 128 * level; surfaces: resolution 16 * level
    long samples = 200000;     // Monte Carlo samples per radius for volumes
    std::uint64_t seed = 0;
    ExtrapolateOptions extrapolation;
};

/// kappa_i: lim R^{-(d-i)} int_{Z cap B_R} K_i / s_0 over the hypersurface Z = {f = 0}
/// (d = n - 1). Odd i returns exactly 0 without meshing.
DensityEstimate kappa_density(const Polynomial& f, int i, const RadiusSchedule& schedule, const DensityOptions& options = {});

/// sigma_i: lim R^{-(n-1-i)} int_{Z cap B_R} sigma_i with the normal -grad f / |grad f|.
DensityEstimate sigma_density(const Polynomial& f, int i, const RadiusSchedule& schedule, const DensityOptions& options = {});

/// Theta_n: lim vol({f <= 0} cap B_R) / (b_n R^n), unit-ball normalisation.
DensityEstimate theta_density(const Polynomial& f, const RadiusSchedule& schedule, const DensityOptions& options = {});

/// Lambda_k at infinity of the fiber (manifold case) or of the sub-level
/// (boundary case, k = n uses the volume): Lambda_k(X, X cap B_R) / (b_k R^k)
/// for k >= 1 and the plain limit for k = 0.
DensityEstimate lambda_infinity(const DefinableSet& set, int k, const RadiusSchedule& schedule,
                                const DensityOptions& options = {});

struct DensityRequest {
    DensityTarget target = DensityTarget::Kappa;
    int index = 0;
};

/// Several densities of one set from a single mesh per radius. Kappa and sigma
/// refer to the hypersurface {f = 0}, Theta to {f <= 0}, Lambda to `set`.
/// Results follow the order of `requests` and agree with the single-target
/// functions.
std::vector<DensityEstimate> mesh_densities(const DefinableSet& set, const std::vector<DensityRequest>& requests,
                                           const RadiusSchedule& schedule, const DensityOptions& options = {});

/// Options taken from a FamilySpec: sampling.mesh_level and seed.
DensityOptions density_options(const FamilySpec& spec);

/// Family wrappers at parameter y.
DensityEstimate kappa_density(const FamilySpec& spec, const Eigen::VectorXd& y, int i, const RadiusSchedule& schedule,
                              const DensityOptions& options = {});
DensityEstimate sigma_density(const FamilySpec& spec, const Eigen::VectorXd& y, int i, const RadiusSchedule& schedule,
                              const DensityOptions& options = {});
DensityEstimate theta_density(const FamilySpec& spec, const Eigen::VectorXd& y, const RadiusSchedule& schedule,
                              const DensityOptions& options = {});

}  // namespace infinitas
