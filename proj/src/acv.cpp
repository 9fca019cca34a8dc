#include "infinitas/acv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "infinitas/parallel.hpp"
#include "infinitas/rabier.hpp"
#include "infinitas/sampling.hpp"

namespace infinitas {

std::string to_string(ValueClass c) {
    switch (c) {
        case ValueClass::MRRegular: return "MR-regular";
        case ValueClass::ACVSuspect: return "ACV-suspect";
        case ValueClass::FiberBounded: return "fiber-bounded";
    }
    return "?";
}

SearchBox SearchBox::around_origin(const FamilySpec& spec, double x_bound, double y_lo, double y_hi) {
    SearchBox b;
    b.lower.resize(spec.n + spec.s);
    b.upper.resize(spec.n + spec.s);
    b.lower.head(spec.n).setConstant(-x_bound);
    b.upper.head(spec.n).setConstant(x_bound);
    b.lower.tail(spec.s).setConstant(y_lo);
    b.upper.tail(spec.s).setConstant(y_hi);
    return b;
}

namespace {

// ---------------------------------------------------------------------------
// Critical values

// Residual and Jacobian of the rank-deficiency system in unknowns z.
struct CriticalSystem {
    const FamilySpec& spec;

    explicit CriticalSystem(const FamilySpec& s) : spec(s) {}

    // Unknowns: map-graph s=1: x; s=2: (x, theta). Hypersurface: (x, y).
    int unknowns() const {
        if (spec.kind == FamilyKind::MapGraph) return spec.n + (spec.s == 2 ? 1 : 0);
        return spec.n + spec.s;
    }

    void eval(const Eigen::VectorXd& z, Eigen::VectorXd& r, Eigen::MatrixXd& J) const {
        const int n = spec.n;
        if (spec.kind == FamilyKind::MapGraph) {
            const Eigen::VectorXd x = z.head(n);
            if (spec.s == 1) {
                const Jet2 jet = evaluate_jet(spec.polys[0], x);
                r = jet.gradient;
                J = jet.hessian;
                return;
            }
            const double th = z[n];
            const double a = std::cos(th), b = std::sin(th);
            const Jet2 j0 = evaluate_jet(spec.polys[0], x);
            const Jet2 j1 = evaluate_jet(spec.polys[1], x);
            r = a * j0.gradient + b * j1.gradient;
            J.resize(n, n + 1);
            J.leftCols(n) = a * j0.hessian + b * j1.hessian;
            J.col(n) = -b * j0.gradient + a * j1.gradient;
            return;
        }
        const Jet2 jet = evaluate_jet(spec.polys[0], z);
        r.resize(n + 1);
        J.resize(n + 1, n + spec.s);
        r[0] = jet.value;
        J.row(0) = jet.gradient.transpose();
        r.tail(n) = jet.gradient.head(n);
        J.bottomRows(n) = jet.hessian.topRows(n);
    }

    Eigen::VectorXd value(const Eigen::VectorXd& z) const {
        if (spec.kind == FamilyKind::MapGraph) return map_values(spec, z.head(spec.n));
        return z.tail(spec.s);
    }
};

// Damped Gauss-Newton with minimum-norm steps. Returns the final residual norm.
double gauss_newton(const CriticalSystem& sys, Eigen::VectorXd& z, double bound) {
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    sys.eval(z, r, J);
    double norm = r.norm();
    for (int it = 0; it < 100 && norm > 1e-13; ++it) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
        const Eigen::VectorXd dz = cod.solve(-r);
        if (!dz.allFinite()) break;
        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
            Eigen::VectorXd zt = z + alpha * dz;
            Eigen::VectorXd rt;
            Eigen::MatrixXd Jt;
            sys.eval(zt, rt, Jt);
            if (rt.allFinite() && rt.norm() < norm) {
                z = zt;
                r = rt;
                J = Jt;
                norm = rt.norm();
                moved = true;
                break;
            }
        }
        if (!moved) break;
        if (z.head(sys.spec.n).cwiseAbs().maxCoeff() > 100 * bound) break;
    }
    return norm;
}

}  // namespace

CriticalValueResult critical_values(const FamilySpec& spec, const SearchBox& box, int starts, std::uint64_t seed) {
    if (spec.s > 2) throw std::invalid_argument("critical_values supports s = 1 or 2");
    const int dim = spec.n + spec.s;
    if (box.lower.size() != dim || box.upper.size() != dim) throw std::invalid_argument("search box has wrong size");
    CriticalSystem sys(spec);
    const int m = sys.unknowns();
    const double bound = std::max(box.upper.head(spec.n).cwiseAbs().maxCoeff(), box.lower.head(spec.n).cwiseAbs().maxCoeff());

    struct Found {
        bool ok = false;
        CriticalPoint cp;
    };
    std::vector<Found> found(static_cast<std::size_t>(std::max(starts, 0)));
    parallel_for(found.size(), [&](std::size_t i) {
        Rng rng = make_rng({seed, 0xC217ULL, i});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Eigen::VectorXd z(m);
        for (int j = 0; j < spec.n; ++j) z[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * u(rng);
        if (spec.kind == FamilyKind::MapGraph) {
            if (spec.s == 2) z[spec.n] = 2 * M_PI * u(rng);
        } else {
            for (int j = 0; j < spec.s; ++j)
                z[spec.n + j] = box.lower[spec.n + j] + (box.upper[spec.n + j] - box.lower[spec.n + j]) * u(rng);
        }
        const double res = gauss_newton(sys, z, bound);
        if (!(res <= 1e-10)) return;
        const Eigen::VectorXd x = z.head(spec.n);
        const Eigen::VectorXd y = sys.value(z);
        for (int j = 0; j < spec.s; ++j)
            if (y[j] < box.lower[spec.n + j] - 1e-9 || y[j] > box.upper[spec.n + j] + 1e-9) return;
        found[i].ok = true;
        found[i].cp = CriticalPoint{x, y, res};
    });

    CriticalValueResult out;
    for (auto& f : found) {
        if (!f.ok) continue;
        ++out.converged_starts;
        bool merged = false;
        for (auto& p : out.points) {
            if ((p.value - f.cp.value).cwiseAbs().maxCoeff() <= 1e-6) {
                if (f.cp.residual < p.residual) p = f.cp;
                merged = true;
                break;
            }
        }
        if (!merged) out.points.push_back(f.cp);
    }
    std::sort(out.points.begin(), out.points.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        return std::lexicographical_compare(a.value.data(), a.value.data() + a.value.size(), b.value.data(),
                                            b.value.data() + b.value.size());
    });
    out.coverage_warning = out.converged_starts == 0;
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// The feasible set {w in W : |w| = R, |phi(w) - c| <= eta} in the free
// coordinates z (x for map-graph families, w itself otherwise).
class BandSphere {
public:
    BandSphere(const FamilySpec& spec, const Eigen::VectorXd& c, double eta, double R)
        : spec_(spec), c_(c), eta_(eta), R_(R) {}

    int dim() const { return spec_.kind == FamilyKind::MapGraph ? spec_.n : spec_.n + spec_.s; }

    Eigen::VectorXd point(const Eigen::VectorXd& z) const {
        return spec_.kind == FamilyKind::MapGraph ? graph_point(spec_, z) : z;
    }

    // Equality constraints (sphere, and F = 0 for hypersurface families) plus
    // the Jacobian of phi.
    void eval(const Eigen::VectorXd& z, Eigen::VectorXd& r, Eigen::MatrixXd& J, Eigen::VectorXd& phi,
              Eigen::MatrixXd& Jphi) const {
        const int m = dim();
        if (spec_.kind == FamilyKind::MapGraph) {
            phi = map_values(spec_, z);
            Jphi = map_jacobian(spec_, z);
            const double wn = std::sqrt(z.squaredNorm() + phi.squaredNorm());
            r.resize(1);
            J.resize(1, m);
            r[0] = wn - R_;
            J.row(0) = ((z + Jphi.transpose() * phi) / std::max(wn, 1e-300)).transpose();
            return;
        }
        const Eigen::VectorXd g = evaluate_gradient(spec_.polys[0], z);
        const double wn = z.norm();
        r.resize(2);
        J.resize(2, m);
        r[0] = spec_.polys[0](z);
        J.row(0) = g.transpose();
        r[1] = wn - R_;
        J.row(1) = (z / std::max(wn, 1e-300)).transpose();
        phi = z.tail(spec_.s);
        Jphi = Eigen::MatrixXd::Zero(spec_.s, m);
        Jphi.rightCols(spec_.s).setIdentity();
    }

    // Newton projection onto the feasible set. The band is handled as an
    // active set: violated components are pinned to the nearest band edge.
    bool restore(Eigen::VectorXd& z) const {
        const double tol = 1e-11 * (1.0 + R_);
        Eigen::VectorXd r, phi;
        Eigen::MatrixXd J, Jphi;
        for (int it = 0; it < 80; ++it) {
            eval(z, r, J, phi, Jphi);
            if (!r.allFinite() || !phi.allFinite()) return false;
            std::vector<int> active;
            for (int j = 0; j < spec_.s; ++j)
                if (std::abs(phi[j] - c_[j]) > eta_) active.push_back(j);
            const Eigen::Index rows = r.size() + static_cast<Eigen::Index>(active.size());
            Eigen::VectorXd rr(rows);
            Eigen::MatrixXd JJ(rows, dim());
            rr.head(r.size()) = r;
            JJ.topRows(r.size()) = J;
            for (std::size_t a = 0; a < active.size(); ++a) {
                const int j = active[a];
                const double edge = c_[j] + (phi[j] > c_[j] ? eta_ : -eta_);
                rr[r.size() + static_cast<Eigen::Index>(a)] = phi[j] - edge;
                JJ.row(r.size() + static_cast<Eigen::Index>(a)) = Jphi.row(j);
            }
            // Residuals measured as distances: |r_i| / |grad r_i|.
            double dist = 0.0;
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double gn = JJ.row(i).norm();
                if (gn < 1e-300) return false;
                dist = std::max(dist, std::abs(rr[i]) / gn);
            }
            if (dist <= tol && active.empty()) return true;
            if (dist <= tol && !active.empty()) {
                // Pinned exactly at the edge up to rounding.
                bool inside = true;
                for (int j : active)
                    if (std::abs(phi[j] - c_[j]) > eta_ * (1 + 1e-9) + 1e-12) inside = false;
                if (inside) return true;
            }
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(JJ);
            Eigen::VectorXd dz = cod.solve(-rr);
            if (!dz.allFinite()) return false;
            // Limit the step to the sphere scale to avoid wild jumps.
            const double cap = 0.5 * (1.0 + R_);
            if (dz.norm() > cap) dz *= cap / dz.norm();
            z += dz;
            if (z.norm() > 1e3 * (1.0 + R_)) return false;
        }
        return false;
    }

    // Orthonormal basis of the tangent space of the equality constraints.
    Eigen::MatrixXd tangent_basis(const Eigen::VectorXd& z) const {
        Eigen::VectorXd r, phi;
        Eigen::MatrixXd J, Jphi;
        eval(z, r, J, phi, Jphi);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
        return svd.matrixV().rightCols(dim() - J.rows());
    }

    double nu(const Eigen::VectorXd& z) const {
        if (spec_.kind == FamilyKind::MapGraph) return nu_of_graph_projection(map_jacobian(spec_, z));
        const Eigen::VectorXd g = evaluate_gradient(spec_.polys[0], z);
        if (g.norm() < 1e-9) return 0.0;
        TangentFrame fr;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(dim(), dim());
        fr.tangent = Q.rightCols(dim() - 1);
        return fiber_rabier(spec_, fr);
    }

    double radius() const { return R_; }

private:
    const FamilySpec& spec_;
    Eigen::VectorXd c_;
    double eta_;
    double R_;
};

struct Minimum {
    bool feasible = false;
    bool converged = false;
    double nu = std::numeric_limits<double>::infinity();
    Eigen::VectorXd z;
};

// Pattern search on the feasible set along a tangent basis, with step doubling
// after a success and halving after a failure.
Minimum pattern_search(const BandSphere& set, Eigen::VectorXd z) {
    Minimum m;
    if (!set.restore(z)) return m;
    m.feasible = true;
    m.z = z;
    m.nu = set.nu(z);
    const double R = set.radius();
    double step = 0.05 * (1.0 + R);
    const double min_step = 1e-13 * (1.0 + R);
    int evals = 0;
    const int max_evals = 4000;
    while (step > min_step && evals < max_evals) {
        const Eigen::MatrixXd T = set.tangent_basis(m.z);
        if (T.cols() == 0) {
            step = 0.0;
            break;
        }
        bool improved = false;
        for (Eigen::Index i = 0; i < T.cols() && !improved; ++i) {
            for (double sgn : {1.0, -1.0}) {
                Eigen::VectorXd trial = m.z + sgn * step * T.col(i);
                ++evals;
                if (!set.restore(trial)) continue;
                const double v = set.nu(trial);
                if (v < m.nu) {
                    m.nu = v;
                    m.z = trial;
                    improved = true;
                    break;
                }
            }
        }
        step = improved ? std::min(2.0 * step, 0.5 * (1.0 + R)) : 0.5 * step;
    }
    m.converged = step <= min_step;
    return m;
}

}  // namespace

InfimumProfile infimum_profile(const FamilySpec& spec, const Eigen::VectorXd& c, const RadiusSchedule& schedule,
                               const ProfileOptions& options, std::uint64_t seed, std::uint64_t node) {
    if (c.size() != spec.s) throw std::invalid_argument("parameter value has wrong dimension");
    schedule.validate();
    InfimumProfile prof;
    prof.c = c;
    prof.eta = options.eta;
    const auto radii = schedule.radii();
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        const double R = radii[ri];
        BandSphere set(spec, c, options.eta, R);
        Minimum best;
        bool any_converged = false;
        for (int st = 0; st < options.starts; ++st) {
            Rng rng = make_rng({seed, node, ri, static_cast<std::uint64_t>(st)});
            Eigen::VectorXd z;
            if (spec.kind == FamilyKind::MapGraph) {
                z = R * uniform_on_sphere(rng, spec.n);
            } else {
                z.resize(spec.n + spec.s);
                z.head(spec.n) = uniform_on_sphere(rng, spec.n) * std::sqrt(std::max(R * R - c.squaredNorm(), 0.0));
                z.tail(spec.s) = c;
            }
            const Minimum m = pattern_search(set, z);
            if (!m.feasible) continue;
            any_converged = any_converged || m.converged;
            if (m.nu < best.nu) best = m;
        }
        ProfileEntry e;
        e.radius = R;
        if (!best.feasible) {
            e.fiber_bounded = true;
            e.converged = true;
        } else {
            e.witness = set.point(best.z);
            e.inf_m = (1.0 + e.witness.norm()) * best.nu;
            e.converged = best.converged;
        }
        prof.entries.push_back(std::move(e));
    }
    return prof;
}

Classification classify_value(const InfimumProfile& profile, const ClassifyOptions& options) {
    Classification cl;
    std::vector<int> finite;
    for (int i = 0; i < static_cast<int>(profile.entries.size()); ++i)
        if (!profile.entries[static_cast<std::size_t>(i)].fiber_bounded) finite.push_back(i);
    if (finite.empty() || profile.entries.back().fiber_bounded) {
        cl.value_class = ValueClass::FiberBounded;
        return cl;
    }
    cl.lower_bound = std::numeric_limits<double>::infinity();
    for (int i : finite) cl.lower_bound = std::min(cl.lower_bound, profile.entries[static_cast<std::size_t>(i)].inf_m);

    const int k = std::min<int>(options.fit_points, static_cast<int>(finite.size()));
    if (k >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int used = 0;
        for (int j = static_cast<int>(finite.size()) - k; j < static_cast<int>(finite.size()); ++j) {
            const auto& e = profile.entries[static_cast<std::size_t>(finite[static_cast<std::size_t>(j)])];
            const double lx = std::log(e.radius);
            const double ly = std::log(std::max(e.inf_m, 1e-300));
            sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
            ++used;
        }
        const double den = used * sxx - sx * sx;
        cl.slope = den > 0 ? (used * sxy - sx * sy) / den : 0.0;
    }
    const double first = profile.entries[static_cast<std::size_t>(finite.front())].inf_m;
    const double last = profile.entries[static_cast<std::size_t>(finite.back())].inf_m;
    if (finite.size() >= 3 && last < options.decay_ratio * first && cl.slope < options.slope_threshold) {
        cl.value_class = ValueClass::ACVSuspect;
        // Longest strictly decreasing run ending at the last entry.
        std::vector<int> run{finite.back()};
        for (int j = static_cast<int>(finite.size()) - 2; j >= 0; --j) {
            const int i = finite[static_cast<std::size_t>(j)];
            if (profile.entries[static_cast<std::size_t>(i)].inf_m > profile.entries[static_cast<std::size_t>(run.back())].inf_m)
                run.push_back(i);
            else
                break;
        }
        std::reverse(run.begin(), run.end());
        cl.witness_indices = std::move(run);
    } else {
        cl.value_class = ValueClass::MRRegular;
    }
    return cl;
}

namespace {

std::vector<std::vector<int>> grid_indices(const std::vector<GridAxis>& grid) {
    std::vector<std::vector<int>> out;
    if (grid.size() == 1) {
        for (int i = 0; i < grid[0].steps; ++i) out.push_back({i});
    } else {
        for (int i = 0; i < grid[0].steps; ++i)
            for (int j = 0; j < grid[1].steps; ++j) out.push_back({i, j});
    }
    return out;
}

}  // namespace

AcvReport estimate_K(const FamilySpec& spec, const std::vector<GridAxis>& grid, const RadiusSchedule& schedule,
                     std::uint64_t seed, const AcvOptions& options) {
    if (spec.s > 2) throw std::invalid_argument("estimate_K supports s = 1 or 2");
    if (static_cast<int>(grid.size()) != spec.s) throw std::invalid_argument("grid needs one axis per parameter");
    AcvReport rep;
    rep.grid = grid;
    rep.schedule = schedule;
    rep.options = options;

    SearchBox box;
    box.lower.resize(spec.n + spec.s);
    box.upper.resize(spec.n + spec.s);
    box.lower.head(spec.n).setConstant(-options.x_bound);
    box.upper.head(spec.n).setConstant(options.x_bound);
    for (int j = 0; j < spec.s; ++j) {
        box.lower[spec.n + j] = grid[static_cast<std::size_t>(j)].min;
        box.upper[spec.n + j] = grid[static_cast<std::size_t>(j)].max;
    }
    rep.k0 = critical_values(spec, box, options.critical_starts, seed);

    const auto idx = grid_indices(grid);
    rep.nodes.resize(idx.size());
    parallel_for(idx.size(), [&](std::size_t i) {
        NodeReport& nr = rep.nodes[i];
        nr.index = idx[i];
        nr.y.resize(spec.s);
        for (int j = 0; j < spec.s; ++j) nr.y[j] = grid[static_cast<std::size_t>(j)].node(idx[i][static_cast<std::size_t>(j)]);
        try {
            nr.profile = infimum_profile(spec, nr.y, schedule, options.profile, seed, i + 1);
            nr.classification = classify_value(nr.profile, options.classify);
        } catch (const std::exception& e) {
            nr.error = e.what();
        }
    });

    // Merge suspect nodes connected through grid neighbours.
    std::vector<int> label(idx.size(), -1);
    auto node_of = [&](const std::vector<int>& m) -> long {
        if (grid.size() == 1) return m[0];
        return static_cast<long>(m[0]) * grid[1].steps + m[1];
    };
    auto suspect = [&](std::size_t i) {
        return rep.nodes[i].error.empty() && rep.nodes[i].classification.value_class == ValueClass::ACVSuspect;
    };
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (!suspect(i) || label[i] >= 0) continue;
        const int comp = static_cast<int>(rep.kinf.size());
        KComponent kc;
        kc.source = "Kinf";
        kc.lower = rep.nodes[i].y;
        kc.upper = rep.nodes[i].y;
        std::vector<std::size_t> stack{i};
        label[i] = comp;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            kc.lower = kc.lower.cwiseMin(rep.nodes[cur].y);
            kc.upper = kc.upper.cwiseMax(rep.nodes[cur].y);
            for (std::size_t a = 0; a < grid.size(); ++a) {
                for (int d : {-1, 1}) {
                    auto nb = idx[cur];
                    nb[a] += d;
                    if (nb[a] < 0 || nb[a] >= grid[a].steps) continue;
                    const auto ni = static_cast<std::size_t>(node_of(nb));
                    if (suspect(ni) && label[ni] < 0) {
                        label[ni] = comp;
                        stack.push_back(ni);
                    }
                }
            }
        }
        rep.kinf.push_back(std::move(kc));
    }
    for (const auto& cp : rep.k0.points) rep.k.push_back(KComponent{cp.value, cp.value, "K0"});
    for (const auto& kc : rep.kinf) rep.k.push_back(kc);
    return rep;
}

bool near_K(const AcvReport& report, const Eigen::VectorXd& y, double cells) {
    for (const auto& kc : report.k) {
        bool inside = true;
        for (Eigen::Index j = 0; j < y.size(); ++j) {
            const double h = report.grid[static_cast<std::size_t>(j)].spacing();
            const double slack = cells * h + 1e-12;
            if (y[j] < kc.lower[j] - slack || y[j] > kc.upper[j] + slack) inside = false;
        }
        if (inside) return true;
    }
    return false;
}

FamilySpec restrict_family(const FamilySpec& spec, const Eigen::MatrixXd& basis) {
    if (basis.rows() != spec.n) throw std::invalid_argument("plane basis must live in x-space");
    FamilySpec out = spec;
    out.n = static_cast<int>(basis.cols());
    out.polys.clear();
    const auto xs = numbered_variables("x", static_cast<std::size_t>(out.n));
    for (const auto& p : spec.polys) {
        Polynomial q = spec.kind == FamilyKind::MapGraph ? restrict_to_plane(p, basis)
                                                         : restrict_leading_variables(p, basis);
        // Rename u1..um to x1..xm so the result is a family in standard form.
        auto vars = xs;
        for (std::size_t j = static_cast<std::size_t>(out.n); j < q.arity(); ++j) vars.push_back(q.variables()[j]);
        Polynomial renamed(vars);
        for (const auto& [e, c] : q.terms()) renamed.add_term(e, c);
        out.polys.push_back(std::move(renamed));
    }
    out.validate();
    return out;
}

SectionTestResult section_MR_test(const FamilySpec& spec, const Eigen::VectorXd& c, int k, int planes,
                                  std::uint64_t seed, const RadiusSchedule& schedule, const AcvOptions& options) {
    const int m = k - spec.s;
    if (k < spec.n + spec.s - spec.total_dimension() || m < 1 || m > spec.n)
        throw std::invalid_argument("section dimension out of range");
    const auto base = classify_value(infimum_profile(spec, c, schedule, options.profile, seed, 0), options.classify);
    if (base.value_class != ValueClass::MRRegular && base.value_class != ValueClass::FiberBounded)
        throw std::invalid_argument("precondition: c is not MR-regular for the family");

    struct Outcome {
        ValueClass cls = ValueClass::MRRegular;
        int resampled = 0;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(std::max(planes, 0)));
    parallel_for(outcomes.size(), [&](std::size_t i) {
        Outcome& o = outcomes[i];
        for (int attempt = 0;; ++attempt) {
            Rng rng = make_rng({seed, 0x5EC7ULL, i, static_cast<std::uint64_t>(attempt)});
            const Eigen::MatrixXd B = random_orthonormal_frame(rng, spec.n, m);
            const FamilySpec sub = restrict_family(spec, B);
            bool degenerate = false;
            for (const auto& p : sub.polys)
                if (p.degree() < 1) degenerate = true;
            if (degenerate && attempt < 20) {
                ++o.resampled;
                continue;
            }
            const auto prof = infimum_profile(sub, c, schedule, options.profile, seed, 0x10000 + i);
            o.cls = classify_value(prof, options.classify).value_class;
            break;
        }
    });
    SectionTestResult res;
    res.planes = planes;
    for (const auto& o : outcomes) {
        res.resampled += o.resampled;
        if (o.cls == ValueClass::FiberBounded) ++res.fiber_bounded;
        if (o.cls != ValueClass::ACVSuspect) ++res.passed;
    }
    res.pass_fraction = planes > 0 ? static_cast<double>(res.passed) / planes : 0.0;
    return res;
}

}  // namespace infinitas
