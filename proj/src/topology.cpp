#include "infinitas/topology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

#include "infinitas/level_geometry.hpp"
#include "infinitas/parallel.hpp"
#include "infinitas/sampling.hpp"

namespace infinitas {

std::string to_string(SetKind kind) { return kind == SetKind::Fiber ? "fiber" : "sublevel"; }

SetKind parse_set_kind(const std::string& text) {
    if (text == "fiber") return SetKind::Fiber;
    if (text == "sublevel") return SetKind::Sublevel;
    throw std::invalid_argument("set kind must be fiber or sublevel");
}

DefinableSet DefinableSet::from_spec(const FamilySpec& spec, const Eigen::VectorXd& y, SetKind kind) {
    return DefinableSet{kind, spec.fiber_polynomial(y)};
}

PlaneSample grassmannian_plane(int l, int n, std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
    if (l < 1 || l > n || n > 6) throw std::invalid_argument("Grassmannian sampling needs 1 <= l <= n <= 6");
    Rng rng = make_rng({seed, 0x6A55ULL, index, attempt});
    return PlaneSample{l, random_orthonormal_frame(rng, n, l), index, attempt};
}

std::vector<PlaneSample> sample_grassmannian(int l, int n, int count, std::uint64_t seed) {
    if (l < 1 || l > n || n > 6) throw std::invalid_argument("Grassmannian sampling needs 1 <= l <= n <= 6");
    std::vector<PlaneSample> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) out.push_back(grassmannian_plane(l, n, seed, static_cast<std::uint64_t>(i), 0));
    return out;
}

SectionResult section_set(const DefinableSet& set, const PlaneSample& plane) {
    const Polynomial raw = restrict_to_plane(set.f, plane.basis);
    const double floor = 1e-12 * set.f.l1_norm();
    Polynomial clean(raw.variables());
    for (const auto& [e, c] : raw.terms())
        if (std::abs(c) > floor) clean.add_term(e, c);
    SectionResult out;
    out.degenerate = clean.is_zero();
    out.set = DefinableSet{set.kind, std::move(clean)};
    return out;
}

namespace {

// Geodesic icosahedral meshes of the unit sphere, levels 0..7.
struct Icosphere {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<int, 2>> edges;
};

std::vector<Icosphere> build_icospheres(int max_level) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Icosphere base;
    const double v[12][3] = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                             {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (const auto& p : v) base.vertices.push_back(Eigen::Vector3d(p[0], p[1], p[2]).normalized());
    base.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                  {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    std::vector<Icosphere> levels{base};
    for (int L = 1; L <= max_level; ++L) {
        const Icosphere& prev = levels.back();
        Icosphere next;
        next.vertices = prev.vertices;
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            next.vertices.push_back((prev.vertices[static_cast<std::size_t>(a)] + prev.vertices[static_cast<std::size_t>(b)]).normalized());
            const int id = static_cast<int>(next.vertices.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        for (const auto& f : prev.faces) {
            const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
            next.faces.push_back({f[0], a, c});
            next.faces.push_back({f[1], b, a});
            next.faces.push_back({f[2], c, b});
            next.faces.push_back({a, b, c});
        }
        levels.push_back(std::move(next));
    }
    for (auto& ico : levels) {
        std::map<std::pair<int, int>, int> seen;
        for (const auto& f : ico.faces)
            for (int j = 0; j < 3; ++j) {
                const int a = f[static_cast<std::size_t>(j)], b = f[static_cast<std::size_t>((j + 1) % 3)];
                if (seen.emplace(std::make_pair(std::min(a, b), std::max(a, b)), 0).second)
                    ico.edges.push_back({std::min(a, b), std::max(a, b)});
            }
    }
    return levels;
}

const Icosphere& icosphere(int level) {
    static std::once_flag once;
    static std::vector<Icosphere> levels;
    std::call_once(once, [] { levels = build_icospheres(7); });
    return levels.at(static_cast<std::size_t>(level));
}

// Induced subcomplex of {f <= 0} on the icosphere of radius R.
int sphere_sublevel_chi(const Polynomial& f, double R, int level) {
    const Icosphere& ico = icosphere(level);
    std::vector<char> in(ico.vertices.size());
    for (std::size_t i = 0; i < ico.vertices.size(); ++i) in[i] = f(Eigen::VectorXd(R * ico.vertices[i])) <= 0.0;
    long V = std::count(in.begin(), in.end(), 1);
    long E = 0, F = 0;
    for (const auto& e : ico.edges) E += in[static_cast<std::size_t>(e[0])] && in[static_cast<std::size_t>(e[1])];
    for (const auto& t : ico.faces)
        F += in[static_cast<std::size_t>(t[0])] && in[static_cast<std::size_t>(t[1])] && in[static_cast<std::size_t>(t[2])];
    return static_cast<int>(V - E + F);
}

// One attempt at a fixed radius; returns false on tangency.
bool link_at(const DefinableSet& set, double R, LinkSample& out) {
    const Polynomial& f = set.f;
    const int n = set.ambient();
    out.radius = R;
    if (f.is_zero()) {
        // The whole space (sub-level) or a degenerate fiber.
        if (set.kind == SetKind::Fiber) return false;
        out.chi = (n % 2 == 1) ? 2 : 0;
        out.count = -1;
        return true;
    }
    if (n == 1) {
        Eigen::VectorXd p(1);
        int c = 0;
        for (double s : {-1.0, 1.0}) {
            p[0] = s * R;
            const double v = f(p);
            const double scale = 1e-12 * (1.0 + std::abs(evaluate_gradient(f, p)[0]) * R);
            if (std::abs(v) <= scale && !f.is_constant()) return false;
            if (set.kind == SetKind::Sublevel ? v <= 0.0 : v == 0.0) ++c;
        }
        out.count = c;
        out.chi = c;
        return true;
    }
    if (n == 2) {
        const CircleRoots roots = circle_roots(f, R);
        if (roots.tangency) return false;
        const int k = static_cast<int>(roots.angles.size());
        if (set.kind == SetKind::Fiber) {
            out.count = k;
            out.chi = k;
            return true;
        }
        if (k % 2 != 0) return false;
        if (k == 0) {
            out.count = 0;
            out.chi = 0;  // empty, or the whole circle
            return true;
        }
        out.count = k / 2;
        out.chi = k / 2;
        return true;
    }
    if (n == 3) {
        if (set.kind == SetKind::Fiber) {
            // Closed curves on S^2_R.
            out.count = -1;
            out.chi = 0;
            return true;
        }
        int prev = sphere_sublevel_chi(f, R, 3);
        for (int level = 4; level <= 7; ++level) {
            const int cur = sphere_sublevel_chi(f, R, level);
            if (cur == prev) {
                out.count = -1;
                out.chi = cur;
                return true;
            }
            prev = cur;
        }
        return false;
    }
    throw std::invalid_argument("links are supported in ambient dimension 1, 2 or 3");
}

}  // namespace

LinkSample link_euler(const DefinableSet& set, double R) {
    if (!(R > 0)) throw std::invalid_argument("radius must be positive");
    static const double jitter[] = {0.0, 0.01, -0.01, 0.02, -0.02, 0.03};
    for (int k = 0; k < 6; ++k) {
        LinkSample s;
        s.jitter = k;
        if (link_at(set, R * (1.0 + jitter[k]), s)) return s;
    }
    throw TangencyError("S_R stays tangent to the set near R = " + std::to_string(R));
}

RadiusSchedule default_link_schedule() { return RadiusSchedule{4.0, 4.0, 10}; }

LinkReport stable_link(const DefinableSet& set, const RadiusSchedule& schedule) {
    schedule.validate();
    LinkReport rep;
    for (double R : schedule.radii()) {
        try {
            rep.samples.push_back(link_euler(set, R));
            rep.errors.emplace_back();
        } catch (const std::exception& e) {
            LinkSample s;
            s.radius = R;
            s.count = -1;
            rep.samples.push_back(s);
            rep.errors.emplace_back(e.what());
        }
    }
    const int m = static_cast<int>(rep.samples.size());
    auto ok = [&](int i) { return rep.errors[static_cast<std::size_t>(i)].empty(); };
    auto chi = [&](int i) { return rep.samples[static_cast<std::size_t>(i)].chi; };
    if (m >= 3 && ok(m - 1) && ok(m - 2) && ok(m - 3) && chi(m - 1) == chi(m - 2) && chi(m - 2) == chi(m - 3)) {
        rep.stabilized = true;
        rep.chi = chi(m - 1);
        int first = m - 1;
        while (first > 0 && ok(first - 1) && chi(first - 1) == rep.chi) --first;
        rep.first_stable = first;
    }
    return rep;
}

ChiEstimate chi_l_infty(const DefinableSet& set, int l, int planes, std::uint64_t seed, const RadiusSchedule& schedule) {
    const int n = set.ambient();
    if (l < 1 || l > n) throw std::invalid_argument("chi_l needs 1 <= l <= n");
    if (l > 3) throw std::invalid_argument("chi_l needs l <= 3");
    ChiEstimate est;
    est.l = l;
    if (l == n) {
        const LinkReport rep = stable_link(set, schedule);
        est.exact = true;
        est.stabilized = rep.stabilized;
        est.value = rep.stabilized ? 0.5 * rep.chi : std::numeric_limits<double>::quiet_NaN();
        return est;
    }
    if (planes < 1) throw std::invalid_argument("chi_l needs at least one plane");
    struct PlaneOutcome {
        double chi = 0.0;
        bool ok = false;
        int resampled = 0;
    };
    std::vector<PlaneOutcome> outcomes(static_cast<std::size_t>(planes));
    parallel_for(outcomes.size(), [&](std::size_t i) {
        PlaneOutcome& o = outcomes[i];
        for (std::uint64_t attempt = 0; attempt < 20; ++attempt) {
            const PlaneSample P = grassmannian_plane(l, n, seed, i, attempt);
            const SectionResult sec = section_set(set, P);
            if (sec.degenerate) {
                ++o.resampled;
                continue;
            }
            const LinkReport rep = stable_link(sec.set, schedule);
            if (rep.stabilized) {
                o.chi = rep.chi;
                o.ok = true;
            }
            return;
        }
    });
    double sum = 0.0, sum2 = 0.0;
    int good = 0;
    est.plane_chi.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        est.resampled += o.resampled;
        if (!o.ok) {
            ++est.failed;
            est.plane_chi.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        est.plane_chi.push_back(o.chi);
        sum += o.chi;
        sum2 += o.chi * o.chi;
        ++good;
    }
    est.planes = planes;
    if (est.failed > 0.05 * planes)
        throw std::runtime_error("chi_l estimate aborted: " + std::to_string(est.failed) + " of " +
                                 std::to_string(planes) + " plane sections did not stabilize");
    const double mean = good > 0 ? sum / good : 0.0;
    const double var = good > 1 ? std::max(0.0, (sum2 - good * mean * mean) / (good - 1)) : 0.0;
    est.value = 0.5 * mean;
    est.std_error = good > 0 ? 0.5 * std::sqrt(var / good) : 0.0;
    return est;
}

int cubical_euler(const std::vector<char>& mask, int cells, int n) {
    if (n < 1 || n > 3) throw std::invalid_argument("cubical complexes need n in 1..3");
    const long N = cells;
    long total = 1;
    for (int d = 0; d < n; ++d) total *= N;
    if (static_cast<long>(mask.size()) != total) throw std::invalid_argument("mask size does not match the grid");
    const long M = 2 * N + 1;
    long cellsM = 1;
    for (int d = 0; d < n; ++d) cellsM *= M;
    std::vector<char> present(static_cast<std::size_t>(cellsM), 0);
    std::array<long, 3> idx{0, 0, 0};
    for (long t = 0; t < total; ++t) {
        if (!mask[static_cast<std::size_t>(t)]) continue;
        long r = t;
        for (int d = n - 1; d >= 0; --d) {
            idx[static_cast<std::size_t>(d)] = r % N;
            r /= N;
        }
        // Mark the closed cube: doubled coordinates 2i..2i+2 in each axis.
        long combos = 1;
        for (int d = 0; d < n; ++d) combos *= 3;
        for (long c = 0; c < combos; ++c) {
            long cc = c, off = 0;
            for (int d = 0; d < n; ++d) {
                const long k = 2 * idx[static_cast<std::size_t>(d)] + cc % 3;
                cc /= 3;
                off = off * M + k;
            }
            present[static_cast<std::size_t>(off)] = 1;
        }
    }
    long chi = 0;
    for (long c = 0; c < cellsM; ++c) {
        if (!present[static_cast<std::size_t>(c)]) continue;
        long r = c;
        int dim = 0;
        for (int d = 0; d < n; ++d) {
            dim += static_cast<int>((r % M) % 2);
            r /= M;
        }
        chi += (dim % 2 == 0) ? 1 : -1;
    }
    return static_cast<int>(chi);
}

namespace {

// Pixel or voxel complex of {f <= 0} cap B_R.
int sublevel_complex_chi(const Polynomial& f, double R, int cells) {
    const int n = static_cast<int>(f.arity());
    const double h = 2.0 * R / cells;
    const double off = 0.1234567 * h;
    long total = 1;
    for (int d = 0; d < n; ++d) total *= cells;
    std::vector<char> mask(static_cast<std::size_t>(total), 0);
    parallel_for(static_cast<std::size_t>(cells), [&](std::size_t first) {
        const long stride = total / cells;
        Eigen::VectorXd p(n);
        for (long t = static_cast<long>(first) * stride; t < static_cast<long>(first + 1) * stride; ++t) {
            long r = t;
            for (int d = n - 1; d >= 0; --d) {
                p[d] = -R + (static_cast<double>(r % cells) + 0.5) * h + off;
                r /= cells;
            }
            mask[static_cast<std::size_t>(t)] = p.norm() <= R && f(p) <= 0.0;
        }
    });
    return cubical_euler(mask, cells, n);
}

int fiber_points_chi(const Polynomial& f, double R, int cells) {
    // Zeros of a one-variable polynomial in [-R, R] by sign changes.
    Eigen::VectorXd p(1);
    int count = 0;
    double prev = 0.0;
    for (int i = 0; i <= cells; ++i) {
        p[0] = -R + 2.0 * R * i / cells + 1e-7 * R;
        const double v = f(p);
        if (i > 0 && ((v >= 0) != (prev >= 0))) ++count;
        prev = v;
    }
    return count;
}

int euler_at(const DefinableSet& set, double R, int resolution) {
    const int n = set.ambient();
    if (set.f.is_zero()) {
        if (set.kind == SetKind::Sublevel) return 1;
        throw std::invalid_argument("the zero polynomial defines no fiber");
    }
    if (set.kind == SetKind::Sublevel) {
        if (n < 1 || n > 3) throw std::invalid_argument("Euler characteristics need n <= 3");
        return sublevel_complex_chi(set.f, R, resolution);
    }
    if (n == 1) return fiber_points_chi(set.f, R, resolution * 8);
    if (n == 2) {
        TraceOptions o;
        o.coarse_grid = resolution;
        return euler_characteristic(trace_curve(set.f, R, o));
    }
    if (n == 3) return euler_characteristic(mesh_surface(set.f, R, {resolution}));
    throw std::invalid_argument("Euler characteristics need n <= 3");
}

}  // namespace

EulerResult euler_global(const DefinableSet& set, double R, int resolution, std::optional<int> hint) {
    if (!(R > 0) || resolution < 4) throw std::invalid_argument("euler_global needs R > 0 and resolution >= 4");
    EulerResult out;
    std::string failure;
    try {
        out.checks = {euler_at(set, R, resolution), euler_at(set, 2 * R, resolution), euler_at(set, R, 2 * resolution)};
    } catch (const std::exception& e) {
        failure = e.what();
    }
    if (failure.empty() && out.checks[0] == out.checks[1] && out.checks[1] == out.checks[2]) {
        out.chi = out.checks[0];
        return out;
    }
    if (hint) {
        out.chi = *hint;
        out.hint_used = true;
        return out;
    }
    if (!failure.empty()) throw std::runtime_error("Euler characteristic failed without a hint: " + failure);
    throw std::runtime_error("Euler characteristic did not stabilize and no hint was given");
}

std::optional<int> chi_hint(const FamilySpec& spec, SetKind kind) {
    auto it = spec.chi_hints.find(to_string(kind));
    if (it == spec.chi_hints.end()) return std::nullopt;
    return it->second;
}

double grassmannian_volume(int l, int n) {
    if (l < 0 || l > n) throw std::invalid_argument("Grassmannian needs 0 <= l <= n");
    double v = 1.0;
    for (int j = 1; j <= l; ++j) v *= sphere_volume(n - j) / sphere_volume(j - 1);
    return v;
}

}  // namespace infinitas
