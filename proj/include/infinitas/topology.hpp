#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infinitas/family.hpp"
#include "infinitas/poly.hpp"

namespace infinitas {

enum class SetKind { Fiber, Sublevel };

std::string to_string(SetKind kind);
SetKind parse_set_kind(const std::string& text);

/// {f = 0} (fiber) or {f <= 0} (sub-level) in R^n, n = f.arity().
struct DefinableSet {
    SetKind kind = SetKind::Fiber;
    Polynomial f;

    int ambient() const { return static_cast<int>(f.arity()); }

    /// The fiber W_y, or the sub-level {f_y <= 0} bounded by it.
    static DefinableSet from_spec(const FamilySpec& spec, const Eigen::VectorXd& y, SetKind kind);
};

/// Raised when S_R stays tangent to the set after all radius perturbations.
class TangencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PlaneSample {
    int l = 0;
    Eigen::MatrixXd basis;  // n x l, orthonormal columns
    std::uint64_t index = 0;
    std::uint64_t attempt = 0;
};

/// Uniformly distributed planes of G(l, n); plane i uses substream (seed, i, 0).
std::vector<PlaneSample> sample_grassmannian(int l, int n, int count, std::uint64_t seed);

/// One plane of the sampling stream; attempts > 0 replace degenerate planes.
PlaneSample grassmannian_plane(int l, int n, std::uint64_t seed, std::uint64_t index, std::uint64_t attempt);

struct SectionResult {
    DefinableSet set;   // in variables u1..ul
    bool degenerate = false;  // the restriction vanishes identically
};

/// X cap P in the coordinates of P. Coefficients below 1e-12 times the l1
/// norm of f are dropped.
SectionResult section_set(const DefinableSet& set, const PlaneSample& plane);

struct LinkSample {
    double radius = 0.0;      // radius actually used after jitter
    int chi = 0;
    int count = 0;            // points (fibers) or arcs (sub-levels) on S_R; -1 when not applicable
    int jitter = 0;           // perturbation attempts used
};

/// Euler characteristic of X cap S_R for ambient dimension 1, 2 or 3.
/// Throws TangencyError after 5 perturbations of R by 1% steps.
LinkSample link_euler(const DefinableSet& set, double R);

struct LinkReport {
    std::vector<LinkSample> samples;
    std::vector<std::string> errors;  // per radius, empty on success
    bool stabilized = false;
    int chi = 0;                      // stable value when stabilized
    int first_stable = -1;            // index of the first radius of the final constant run
    double stable_radius() const { return first_stable >= 0 ? samples[static_cast<std::size_t>(first_stable)].radius : 0.0; }
};

/// Schedule used for links: 4, 16, ..., 4^10.
RadiusSchedule default_link_schedule();

/// link_euler across the schedule; stabilized when the last three radii agree.
LinkReport stable_link(const DefinableSet& set, const RadiusSchedule& schedule);

struct ChiEstimate {
    int l = 0;
    double value = 0.0;
    double std_error = 0.0;
    bool exact = false;       // l = n: no sampling
    bool stabilized = true;
    int planes = 0;
    int failed = 0;           // planes whose link did not stabilize
    int resampled = 0;        // degenerate planes replaced
    std::vector<double> plane_chi;  // per plane link chi, NaN for failures
};

/// chi_l at infinity: half the mean link Euler characteristic of uniformly
/// sampled l-plane sections, or half the stable link chi when l = n. Throws
/// std::runtime_error when more than 5% of the planes fail.
ChiEstimate chi_l_infty(const DefinableSet& set, int l, int planes, std::uint64_t seed,
                        const RadiusSchedule& schedule = default_link_schedule());

struct EulerResult {
    int chi = 0;
    bool hint_used = false;
    std::vector<int> checks;  // values at (R, res), (2R, res), (R, 2 res)
};

/// Euler characteristic of X cap B_R by cubical or simplicial complexes, checked
/// over two radii and two resolutions. Falls back to the hint when the checks
/// disagree; throws std::runtime_error without a hint.
EulerResult euler_global(const DefinableSet& set, double R, int resolution,
                         std::optional<int> hint = std::nullopt);

/// Hint lookup in spec.chi_hints under "fiber" or "sublevel".
std::optional<int> chi_hint(const FamilySpec& spec, SetKind kind);

/// Closed-form volume of G(l, n) for the metric induced by O(n) with its
/// bi-invariant normalisation: s_{n-1} ... s_{n-l} / (s_{l-1} ... s_0).
double grassmannian_volume(int l, int n);

/// Euler characteristic of the union of closed cells of a uniform cubical grid
/// (n = 1, 2, 3), `cells` per side, from the inclusion mask of top cells in
/// row-major order.
int cubical_euler(const std::vector<char>& mask, int cells, int n);

}  // namespace infinitas
