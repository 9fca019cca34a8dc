#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infinitas/family.hpp"

namespace infinitas {

enum class ValueClass { MRRegular, ACVSuspect, FiberBounded };

std::string to_string(ValueClass c);

/// Axis-aligned box in (x, y)-space: n + s bounds each.
struct SearchBox {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    /// [-xb, xb]^n x [ylo, yhi]^s.
    static SearchBox around_origin(const FamilySpec& spec, double x_bound, double y_lo, double y_hi);
};

struct CriticalPoint {
    Eigen::VectorXd x;
    Eigen::VectorXd value;  // critical value y
    double residual = 0.0;  // norm of the rank-deficiency system
};

struct CriticalValueResult {
    std::vector<CriticalPoint> points;  // one witness per distinct value, sorted by value
    int converged_starts = 0;
    bool coverage_warning = false;  // no start converged
};

/// Multistart damped Gauss-Newton on the system expressing that D_w phi loses
/// rank on W. Values are deduplicated at resolution 1e-6 and filtered to the
/// parameter range of the box.
CriticalValueResult critical_values(const FamilySpec& spec, const SearchBox& box, int starts, std::uint64_t seed);

struct ProfileOptions {
    double eta = 1e-2;  // half-width of the band |phi - c| <= eta
    int starts = 64;
};

struct ProfileEntry {
    double radius = 0.0;
    bool fiber_bounded = false;  // no feasible point found on the sphere
    bool converged = true;       // pattern search reached its step tolerance
    double inf_m = 0.0;          // infimum of M over the band on the sphere
    Eigen::VectorXd witness;     // minimising point w
};

struct InfimumProfile {
    Eigen::VectorXd c;
    double eta = 0.0;
    std::vector<ProfileEntry> entries;
};

/// Per-radius infimum of M(w) = (1 + |w|) nu^phi(w) over {w in W : |phi(w) - c| <= eta, |w| = R}.
InfimumProfile infimum_profile(const FamilySpec& spec, const Eigen::VectorXd& c, const RadiusSchedule& schedule,
                               const ProfileOptions& options, std::uint64_t seed, std::uint64_t node = 0);

struct ClassifyOptions {
    double decay_ratio = 0.1;
    double slope_threshold = -0.25;
    int fit_points = 4;
};

struct Classification {
    ValueClass value_class = ValueClass::MRRegular;
    double slope = 0.0;        // log-log slope over the last fit_points finite entries
    double lower_bound = 0.0;  // min of the finite entries
    std::vector<int> witness_indices;  // entries carrying a strictly decreasing M sequence
};

Classification classify_value(const InfimumProfile& profile, const ClassifyOptions& options = {});

struct NodeReport {
    Eigen::VectorXd y;
    std::vector<int> index;  // grid multi-index
    InfimumProfile profile;
    Classification classification;
    std::string error;  // non-empty when the node failed
};

/// Parameter region [lower, upper] of one K component.
struct KComponent {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::string source;  // "K0" or "Kinf"
};

struct AcvOptions {
    ProfileOptions profile;
    ClassifyOptions classify;
    double x_bound = 10.0;  // critical point search box [-x_bound, x_bound]^n
    int critical_starts = 200;
};

struct AcvReport {
    std::vector<GridAxis> grid;
    RadiusSchedule schedule;
    AcvOptions options;
    CriticalValueResult k0;
    std::vector<NodeReport> nodes;
    std::vector<KComponent> kinf;  // merged ACV-suspect nodes
    std::vector<KComponent> k;     // K0 points followed by the K-infinity components
};

AcvReport estimate_K(const FamilySpec& spec, const std::vector<GridAxis>& grid, const RadiusSchedule& schedule,
                     std::uint64_t seed, const AcvOptions& options = {});

/// True when some component of the report lies within `cells` grid spacings of y.
bool near_K(const AcvReport& report, const Eigen::VectorXd& y, double cells = 1.0);

/// Restriction of the family to P x R^s with P the column span of `basis` (n x m)
/// in x-space. Variables become u1..um (and y1..ys for hypersurface families).
FamilySpec restrict_family(const FamilySpec& spec, const Eigen::MatrixXd& basis);

struct SectionTestResult {
    double pass_fraction = 0.0;
    int planes = 0;
    int passed = 0;
    int fiber_bounded = 0;  // counted as passes: MR holds vacuously
    int resampled = 0;      // degenerate restrictions replaced by fresh planes
};

/// Samples planes P in G(k - s, n) and checks that c stays MR-regular for the
/// restricted family. Throws std::invalid_argument when c is not MR-regular
/// for the full family or k is out of range.
SectionTestResult section_MR_test(const FamilySpec& spec, const Eigen::VectorXd& c, int k, int planes,
                                  std::uint64_t seed, const RadiusSchedule& schedule, const AcvOptions& options = {});

}  // namespace infinitas
