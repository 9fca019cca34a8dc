#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infinitas/acv.hpp"
#include "infinitas/density.hpp"
#include "infinitas/family.hpp"
#include "infinitas/topology.hpp"

namespace infinitas {

struct IdentityResidual {
    std::string id;   // "GB-0", "GB-k", "GB-(n-1)", "GB-n", "matrix-L", "GB-hyp-n", "GB-hyp-(n-1)", "GB-hyp-i", "sigma-lambda-bridge"
    int index = -1;   // k or i for the indexed identities, -1 otherwise
    double left = 0.0;
    double right = 0.0;
    double error = 0.0;   // combined error of both sides
    std::string verdict;  // "pass", "fail", "inconclusive"
    std::string detail;   // reason for an inconclusive verdict

    /// id with the index appended, e.g. "GB-k[1]".
    std::string label() const;
    bool passed() const { return verdict == "pass"; }
};

inline constexpr double kIdentityFloor = 0.05;

/// "pass" iff |left - right| <= max(0.05, 3 error); "inconclusive" when an
/// ingredient did not stabilize.
std::string identity_verdict(double left, double right, double error, bool stabilized);

/// Upper triangular (n+1) x (n+1) matrix with unit diagonal and entries in
/// {-1, 0, 1} such that (Lambda_0, ..., Lambda_n) = L (chi, chi_n, ..., chi_1).
Eigen::MatrixXi gauss_bonnet_matrix(int n);

struct GbOptions {
    RadiusSchedule density_schedule{4, 2, 7};
    RadiusSchedule link_schedule = default_link_schedule();
    int planes = 100;
    std::uint64_t seed = 0;
    DensityOptions density;
    double euler_radius = 8.0;
    int euler_resolution = 64;
};

/// Estimated quantity with its error and whether it stabilized.
struct Ingredient {
    double value = 0.0;
    double error = 0.0;
    bool stabilized = true;
    std::string detail;
};

/// Both sides of the Gauss-Bonnet formulas for a closed set X in R^n:
/// Lambda_k^infty from curvature integration, chi_l^infty from links and plane
/// sections, chi(X) from a global complex (or the hint).
struct GbIngredients {
    int n = 0;
    std::vector<Ingredient> lambda;  // k = 0..n
    std::vector<Ingredient> chi;     // index l = 0..n; chi[0] is chi(X)
};

GbIngredients gb_ingredients(const DefinableSet& set, std::optional<int> chi_hint, const GbOptions& options = {});

/// GB-0, GB-k (k = 1..n-2), GB-(n-1), GB-n and the matrix-L consistency row.
std::vector<IdentityResidual> gb_identity_check(const GbIngredients& ingredients);
std::vector<IdentityResidual> gb_identity_check(const DefinableSet& set, std::optional<int> chi_hint,
                                                const GbOptions& options = {});
/// The fiber or sub-level of the family at y; the hint comes from spec.chi_hints.
std::vector<IdentityResidual> gb_identity_check(const FamilySpec& spec, const Eigen::VectorXd& y, SetKind kind,
                                                const GbOptions& options = {});

/// Hypersurface identities on Y = {f = 0} and the sub-level {f <= 0}:
/// GB-hyp-n, GB-hyp-(n-1), GB-hyp-i (i = 0..n-2) and the sigma-Lambda bridge
/// (i = 0..n-1).
std::vector<IdentityResidual> hypersurface_gb_check(const Polynomial& f, std::optional<int> chi_hint,
                                                    const GbOptions& options = {});
std::vector<IdentityResidual> hypersurface_gb_check(const FamilySpec& spec, const Eigen::VectorXd& y,
                                                    const GbOptions& options = {});

struct InvariantEntry {
    std::string quantity;              // "chi:1", "lambda:0", "kappa:0", "sigma:1", "theta"
    std::string component = "all";
    std::optional<double> value;       // empty when the entry could not be computed
    double error = 0.0;
    std::string status;                // "ok", "non-convergent", "near-K", "failed"
    std::string detail;
};

/// Invariants of the fiber W_y (chi_l, Lambda_k, kappa_i, sigma_i) and of the
/// sub-level {f_y <= 0} (Theta) at one grid node.
struct InvariantVector {
    Eigen::VectorXd y;
    std::vector<int> index;
    std::vector<InvariantEntry> entries;
    int components = -1;  // connected pieces of W_y in the smallest schedule ball, -1 if unknown
    bool near_k = false;

    const InvariantEntry* find(const std::string& quantity) const;
};

/// Quantity names of the invariant vector for fibers of dimension n - 1 in R^n.
std::vector<std::string> invariant_quantities(int n);

struct ScanOptions {
    RadiusSchedule density_schedule{4, 2, 7};
    RadiusSchedule link_schedule = default_link_schedule();
    RadiusSchedule acv_schedule{};
    int planes = 100;
    std::uint64_t seed = 0;
    DensityOptions density;
    AcvOptions acv;
    std::vector<std::string> quantities;  // empty selects every quantity
    double near_cells = 1.0;
};

struct Jump {
    std::string quantity;
    std::size_t from = 0;  // node indices
    std::size_t to = 0;
    Eigen::VectorXd lower;  // cell corners in parameter space
    Eigen::VectorXd upper;
    double left = 0.0;
    double right = 0.0;
    double threshold = 0.0;
    bool contains_k = false;  // the cell meets an estimate_K component
};

struct ScanResult {
    std::vector<GridAxis> grid;
    std::vector<std::string> quantities;
    std::vector<InvariantVector> nodes;
    std::vector<Jump> jumps;
    AcvReport k;
    bool containment = true;  // every jump cell meets K

    /// Values of one quantity over the nodes, empty optionals for missing ones.
    std::vector<std::optional<double>> trace(const std::string& quantity) const;
};

/// Scan options taken from a FamilySpec: schedule for densities and estimate_K,
/// sampling.planes, sampling.mesh_level and seed.
ScanOptions scan_options(const FamilySpec& spec);

/// Invariant vector at y for the hypersurface fiber of the family.
InvariantVector invariant_vector(const FamilySpec& spec, const Eigen::VectorXd& y, const ScanOptions& options);

/// Evaluates the invariant vector at every node of a 1- or 2-dimensional grid,
/// flags jumps between adjacent nodes larger than max(0.1, 5 pooled error) and
/// checks them against estimate_K. Node failures are recorded per entry.
ScanResult continuity_scan(const FamilySpec& spec, const std::vector<GridAxis>& grid, const ScanOptions& options = {});

}  // namespace infinitas
