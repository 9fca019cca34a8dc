#include "infinitas/density.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "infinitas/level_geometry.hpp"
#include "infinitas/parallel.hpp"

namespace infinitas {

GeometricConstants geometric_constants(int l) {
    if (l < 0 || l > 16) throw std::invalid_argument("geometric constants need 0 <= l <= 16");
    const double s = 2.0 * std::pow(M_PI, (l + 1) / 2.0) / std::tgamma((l + 1) / 2.0);
    const double b = std::pow(M_PI, l / 2.0) / std::tgamma(l / 2.0 + 1.0);
    return {s, b};
}

Extrapolation extrapolate(const std::vector<double>& radii, const std::vector<double>& values,
                          const ExtrapolateOptions& options) {
    if (radii.size() != values.size()) throw std::invalid_argument("extrapolate needs matching radii and values");
    std::vector<double> R, v;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (std::isfinite(values[i]) && radii[i] > 0) {
            R.push_back(radii[i]);
            v.push_back(values[i]);
        }
    if (v.size() < 3) throw std::invalid_argument("extrapolate needs at least 3 finite entries");
    if (R.size() > 4) {
        R.erase(R.begin(), R.end() - 4);
        v.erase(v.begin(), v.end() - 4);
    }
    const std::size_t m = v.size();
    const double last = v[m - 1], prev = v[m - 2];
    const double scale = std::max(1.0, std::abs(last));
    const double tol = options.tolerance * scale;

    Extrapolation out;
    std::vector<double> d(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) d[i] = v[i + 1] - v[i];
    const double dmax = std::max(std::abs(*std::max_element(d.begin(), d.end())), std::abs(*std::min_element(d.begin(), d.end())));
    if (dmax <= 1e-12 * scale) {
        out.limit = last;
        out.error = dmax;
        out.rule = "constant";
        out.converged = true;
        return out;
    }

    bool monotone = true, shrinking = true;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] == 0.0 || (d[i] > 0) != (d[0] > 0)) monotone = false;
        if (i > 0 && std::abs(d[i]) >= std::abs(d[i - 1])) shrinking = false;
    }
    if (monotone && shrinking) {
        // log|d_i| against log of the geometric mean of the radii pair.
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double k = static_cast<double>(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double x = 0.5 * (std::log(R[i]) + std::log(R[i + 1]));
            const double y = std::log(std::abs(d[i]));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double alpha = -(k * sxy - sx * sy) / (k * sxx - sx * sx);
        if (std::isfinite(alpha) && alpha > 0.05 && alpha < 10.0) {
            auto limit_from = [&](std::size_t a, std::size_t b) {
                const double denom = std::pow(R[b], -alpha) - std::pow(R[a], -alpha);
                const double coef = (v[b] - v[a]) / denom;
                return v[b] - coef * std::pow(R[b], -alpha);
            };
            const double La = limit_from(m - 2, m - 1);
            const double Lb = limit_from(m - 3, m - 2);
            out.limit = La;
            out.error = std::abs(La - Lb);
            out.alpha = alpha;
            out.rule = "power-law";
            out.converged = out.error <= tol;
            if (out.converged) return out;
        }
    }
    out.limit = last;
    out.error = std::abs(last - prev);
    out.alpha = 0.0;
    out.rule = "last-value";
    out.converged = out.error <= tol;
    return out;
}

std::string to_string(DensityTarget t) {
    switch (t) {
        case DensityTarget::Kappa: return "kappa";
        case DensityTarget::Sigma: return "sigma";
        case DensityTarget::Theta: return "theta";
        case DensityTarget::Lambda: return "lambda";
    }
    return "?";
}

std::string DensityEstimate::label() const {
    if (target == DensityTarget::Theta) return "theta";
    return to_string(target) + ":" + std::to_string(index);
}

namespace {

// Per-radius integrals of linear mesh functionals. Curves are traced once per
// radius; surfaces are meshed shell by shell (R_{k-1} <= |x| <= R_k) with a
// grid scaled to each shell, and the shells are summed.
void mesh_integrals(const Polynomial& f, const RadiusSchedule& schedule, int mesh_level,
                    const std::vector<std::function<double(const LevelMesh&)>>& functionals,
                    std::vector<double>& radii, std::vector<std::vector<double>>& raw,
                    std::vector<std::string>& errors) {
    schedule.validate();
    radii = schedule.radii();
    const int n = static_cast<int>(f.arity());
    if (n != 2 && n != 3) throw std::invalid_argument("densities need a hypersurface in R^2 or R^3");
    raw.assign(functionals.size(), std::vector<double>(radii.size(), 0.0));
    errors.assign(radii.size(), std::string());
    parallel_for(radii.size(), [&](std::size_t i) {
        try {
            LevelMesh mesh;
            if (n == 2) {
                TraceOptions o;
                o.coarse_grid = 128 * mesh_level;
                mesh = trace_curve(f, radii[i], o);
            } else {
                SurfaceOptions o;
                o.resolution = 16 * mesh_level;
                o.inner_radius = i == 0 ? 0.0 : radii[i - 1];
                mesh = mesh_surface(f, radii[i], o);
            }
            for (std::size_t q = 0; q < functionals.size(); ++q)
                raw[q][i] = (n == 3 && mesh.empty()) ? 0.0 : functionals[q](mesh);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    if (n == 3) {
        for (std::size_t i = 1; i < radii.size(); ++i) {
            for (auto& r : raw) r[i] += r[i - 1];
            if (errors[i].empty() && !errors[i - 1].empty()) errors[i] = errors[i - 1];
        }
    }
}

void mesh_integrals(const Polynomial& f, const RadiusSchedule& schedule, int mesh_level,
                    const std::function<double(const LevelMesh&)>& functional, std::vector<double>& radii,
                    std::vector<double>& raw, std::vector<std::string>& errors) {
    std::vector<std::vector<double>> all;
    mesh_integrals(f, schedule, mesh_level, {functional}, radii, all, errors);
    raw = std::move(all.front());
}

// Fills the table from per-radius raw values and a normalising exponent, then
// extrapolates.
void finish(DensityEstimate& est, const std::vector<double>& radii, const std::vector<double>& raw,
            const std::vector<std::string>& errors, const std::function<double(double)>& norm,
            const ExtrapolateOptions& opt) {
    std::vector<double> values;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const double nv = errors[i].empty() ? raw[i] / norm(radii[i]) : std::numeric_limits<double>::quiet_NaN();
        est.table.push_back({radii[i], errors[i].empty() ? raw[i] : std::numeric_limits<double>::quiet_NaN(), nv});
        values.push_back(nv);
        if (!errors[i].empty()) est.flags.push_back("R=" + std::to_string(radii[i]) + ": " + errors[i]);
    }
    try {
        const Extrapolation ex = extrapolate(radii, values, opt);
        est.limit = ex.limit;
        est.error = ex.error;
        est.rule = ex.rule;
        est.status = ex.converged ? "converged" : "non-convergent";
    } catch (const std::invalid_argument&) {
        est.limit = std::numeric_limits<double>::quiet_NaN();
        est.error = std::numeric_limits<double>::quiet_NaN();
        est.rule = "none";
        est.status = "non-convergent";
    }
}

template <typename RawFn>
void per_radius(const RadiusSchedule& schedule, RawFn&& fn, std::vector<double>& radii, std::vector<double>& raw,
                std::vector<std::string>& errors) {
    schedule.validate();
    radii = schedule.radii();
    raw.assign(radii.size(), 0.0);
    errors.assign(radii.size(), std::string());
    parallel_for(radii.size(), [&](std::size_t i) {
        try {
            raw[i] = fn(radii[i], i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
}

}  // namespace

DensityEstimate kappa_density(const Polynomial& f, int i, const RadiusSchedule& schedule, const DensityOptions& options) {
    const int n = static_cast<int>(f.arity());
    if (n < 2 || n > 3) throw std::invalid_argument("kappa density needs a hypersurface in R^2 or R^3");
    const int d = n - 1;
    if (i < 0 || i > d) throw std::invalid_argument("kappa index out of range");
    DensityEstimate est;
    est.target = DensityTarget::Kappa;
    est.index = i;
    if (i % 2 == 1) {
        schedule.validate();
        for (double R : schedule.radii()) est.table.push_back({R, 0.0, 0.0});
        est.rule = "odd-index";
        est.status = "exact";
        return est;
    }
    const double s0 = sphere_volume(0);
    std::vector<double> radii, raw;
    std::vector<std::string> errors;
    mesh_integrals(
        f, schedule, options.mesh_level,
        [&](const LevelMesh& mesh) {
            return integrate_over_level(mesh, [&](const Jet2& j) { return lk_curvatures(shape_operator(j), 1)[i] / s0; });
        },
        radii, raw, errors);
    finish(est, radii, raw, errors, [&](double R) { return std::pow(R, d - i); }, options.extrapolation);
    return est;
}

DensityEstimate sigma_density(const Polynomial& f, int i, const RadiusSchedule& schedule, const DensityOptions& options) {
    const int n = static_cast<int>(f.arity());
    if (n < 2 || n > 3) throw std::invalid_argument("sigma density needs a hypersurface in R^2 or R^3");
    if (i < 0 || i > n - 1) throw std::invalid_argument("sigma index out of range");
    DensityEstimate est;
    est.target = DensityTarget::Sigma;
    est.index = i;
    std::vector<double> radii, raw;
    std::vector<std::string> errors;
    mesh_integrals(
        f, schedule, options.mesh_level,
        [&](const LevelMesh& mesh) { return integrate_over_level(mesh, [&](const Jet2& j) { return shape_operator(j).sigma[i]; }); },
        radii, raw, errors);
    finish(est, radii, raw, errors, [&](double R) { return std::pow(R, n - 1 - i); }, options.extrapolation);
    return est;
}

DensityEstimate theta_density(const Polynomial& f, const RadiusSchedule& schedule, const DensityOptions& options) {
    const int n = static_cast<int>(f.arity());
    if (n < 1 || n > 3) throw std::invalid_argument("theta density needs n <= 3");
    DensityEstimate est;
    est.target = DensityTarget::Theta;
    est.index = n;
    est.flags.push_back("theta-normalization=ball");
    std::vector<double> radii, raw;
    std::vector<std::string> errors;
    per_radius(
        schedule,
        [&](double R, std::size_t k) {
            return sublevel_volume(f, R, options.samples, substream_seed({options.seed, 0x7E7AULL, k})).value;
        },
        radii, raw, errors);
    const double bn = ball_volume(n);
    finish(est, radii, raw, errors, [&](double R) { return bn * std::pow(R, n); }, options.extrapolation);
    return est;
}

DensityEstimate lambda_infinity(const DefinableSet& set, int k, const RadiusSchedule& schedule,
                                const DensityOptions& options) {
    const int n = set.ambient();
    if (n < 2 || n > 3) throw std::invalid_argument("Lambda densities need R^2 or R^3");
    const int dim = set.kind == SetKind::Fiber ? n - 1 : n;
    if (k < 0 || k > dim) throw std::invalid_argument("Lambda index out of range");
    if (set.kind == SetKind::Sublevel && k == n) {
        DensityEstimate est = theta_density(set.f, schedule, options);
        est.target = DensityTarget::Lambda;
        est.index = k;
        return est;
    }
    DensityEstimate est;
    est.target = DensityTarget::Lambda;
    est.index = k;
    std::vector<double> radii, raw;
    std::vector<std::string> errors;
    mesh_integrals(
        set.f, schedule, options.mesh_level,
        [&](const LevelMesh& mesh) {
            if (mesh.empty()) return 0.0;
            return set.kind == SetKind::Fiber ? manifold_lambda(mesh, k) : boundary_lambda(mesh, k);
        },
        radii, raw, errors);
    const double bk = ball_volume(k);
    finish(est, radii, raw, errors, [&](double R) { return k == 0 ? 1.0 : bk * std::pow(R, k); },
           options.extrapolation);
    return est;
}

std::vector<DensityEstimate> mesh_densities(const DefinableSet& set, const std::vector<DensityRequest>& requests,
                                           const RadiusSchedule& schedule, const DensityOptions& options) {
    const int n = set.ambient();
    if (n < 2 || n > 3) throw std::invalid_argument("densities need R^2 or R^3");
    const int dim = set.kind == SetKind::Fiber ? n - 1 : n;
    std::vector<DensityEstimate> out(requests.size());
    std::vector<std::function<double(const LevelMesh&)>> functionals;
    std::vector<std::size_t> meshed;
    const double s0 = sphere_volume(0);
    for (std::size_t r = 0; r < requests.size(); ++r) {
        const int i = requests[r].index;
        switch (requests[r].target) {
            case DensityTarget::Kappa:
                if (i < 0 || i > n - 1) throw std::invalid_argument("kappa index out of range");
                if (i % 2 == 1) {
                    out[r] = kappa_density(set.f, i, schedule, options);
                    continue;
                }
                functionals.push_back([i, s0](const LevelMesh& mesh) {
                    return integrate_over_level(mesh, [&](const Jet2& j) { return lk_curvatures(shape_operator(j), 1)[i] / s0; });
                });
                break;
            case DensityTarget::Sigma:
                if (i < 0 || i > n - 1) throw std::invalid_argument("sigma index out of range");
                functionals.push_back([i](const LevelMesh& mesh) {
                    return integrate_over_level(mesh, [&](const Jet2& j) { return shape_operator(j).sigma[i]; });
                });
                break;
            case DensityTarget::Theta:
                out[r] = theta_density(set.f, schedule, options);
                continue;
            case DensityTarget::Lambda:
                if (i < 0 || i > dim) throw std::invalid_argument("Lambda index out of range");
                if (set.kind == SetKind::Sublevel && i == n) {
                    out[r] = lambda_infinity(set, i, schedule, options);
                    continue;
                }
                functionals.push_back([i, kind = set.kind](const LevelMesh& mesh) {
                    if (mesh.empty()) return 0.0;
                    return kind == SetKind::Fiber ? manifold_lambda(mesh, i) : boundary_lambda(mesh, i);
                });
                break;
        }
        meshed.push_back(r);
    }
    if (functionals.empty()) return out;
    std::vector<double> radii;
    std::vector<std::vector<double>> raw;
    std::vector<std::string> errors;
    mesh_integrals(set.f, schedule, options.mesh_level, functionals, radii, raw, errors);
    for (std::size_t q = 0; q < meshed.size(); ++q) {
        const DensityRequest& req = requests[meshed[q]];
        DensityEstimate& est = out[meshed[q]];
        est.target = req.target;
        est.index = req.index;
        const int i = req.index;
        std::function<double(double)> norm;
        if (req.target == DensityTarget::Kappa)
            norm = [i, n](double R) { return std::pow(R, n - 1 - i); };
        else if (req.target == DensityTarget::Sigma)
            norm = [i, n](double R) { return std::pow(R, n - 1 - i); };
        else
            norm = [i, bk = ball_volume(i)](double R) { return i == 0 ? 1.0 : bk * std::pow(R, i); };
        finish(est, radii, raw[q], errors, norm, options.extrapolation);
    }
    return out;
}

DensityOptions density_options(const FamilySpec& spec) {
    DensityOptions o;
    o.mesh_level = spec.sampling.mesh_level;
    o.seed = spec.seed;
    return o;
}

DensityEstimate kappa_density(const FamilySpec& spec, const Eigen::VectorXd& y, int i, const RadiusSchedule& schedule,
                              const DensityOptions& options) {
    return kappa_density(spec.fiber_polynomial(y), i, schedule, options);
}

DensityEstimate sigma_density(const FamilySpec& spec, const Eigen::VectorXd& y, int i, const RadiusSchedule& schedule,
                              const DensityOptions& options) {
    return sigma_density(spec.fiber_polynomial(y), i, schedule, options);
}

DensityEstimate theta_density(const FamilySpec& spec, const Eigen::VectorXd& y, const RadiusSchedule& schedule,
                              const DensityOptions& options) {
    return theta_density(spec.fiber_polynomial(y), schedule, options);
}

}  // namespace infinitas
