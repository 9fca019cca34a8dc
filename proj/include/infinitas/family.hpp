#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infinitas/poly.hpp"

namespace infinitas {

/// Raised for malformed family specification files (CLI exit code 4).
class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FamilyKind { MapGraph, HypersurfaceFamily };

std::string to_string(FamilyKind kind);

/// Geometric radius schedule r0, r0*factor, ..., r0*factor^(steps-1).
struct RadiusSchedule {
    double r0 = 4.0;
    double factor = 2.0;
    int steps = 7;

    /// Throws std::invalid_argument unless r0 > 0, factor > 1, steps >= 3 and
    /// the final radius is at most 1e9.
    void validate() const;
    std::vector<double> radii() const;
    double final_radius() const;
};

struct GridAxis {
    double min = -1.0;
    double max = 1.0;
    int steps = 41;

    double node(int i) const;
    double spacing() const { return steps > 1 ? (max - min) / (steps - 1) : 0.0; }
};

struct SamplingConfig {
    int planes = 100;
    int mesh_level = 4;
};

/// A polynomial family: either the graph of G: R^n -> R^s (W = graph G,
/// fibers G^{-1}(y)) or a hypersurface family W = {F(x, y) = 0} in R^n x R^s.
/// Variables are always named x1..xn and y1..ys.
struct FamilySpec {
    FamilyKind kind = FamilyKind::MapGraph;
    int n = 2;
    int s = 1;
    /// Map-graph: s polynomials in x1..xn. Hypersurface family: one polynomial
    /// in x1..xn, y1..ys.
    std::vector<Polynomial> polys;
    std::map<std::string, int> chi_hints;
    std::vector<GridAxis> grid;
    RadiusSchedule schedule;
    SamplingConfig sampling;
    std::uint64_t seed = 0;

    static FamilySpec map_graph(const std::vector<std::string>& exprs, int n);
    static FamilySpec hypersurface(const std::string& expr, int n, int s);

    /// dim W: n for map-graph, n + s - 1 for hypersurface families.
    int total_dimension() const;
    /// Dimension of W as a subset of R^{n+s}.
    int ambient_dimension() const { return n + s; }

    /// Throws SpecError when the arities or dimensions are inconsistent.
    void validate() const;

    /// Hypersurface {f = 0} in x-space realising the fiber W_y. Requires s = 1
    /// for map-graph families.
    Polynomial fiber_polynomial(const Eigen::VectorXd& y) const;
    Polynomial fiber_polynomial(double y) const;

    /// Parameter value phi(w) of a point w = (x, y) of W.
    Eigen::VectorXd parameter_of(const Eigen::VectorXd& w) const { return w.tail(s); }
};

/// Parses the YAML family specification format documented in docs/spec-format.md.
FamilySpec parse_family_spec(const std::string& text);
FamilySpec load_family_spec(const std::string& path);

}  // namespace infinitas
