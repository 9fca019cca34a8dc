#include "infinitas/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "infinitas/level_geometry.hpp"
#include "infinitas/parallel.hpp"

namespace infinitas {

std::string IdentityResidual::label() const { return index >= 0 ? id + "[" + std::to_string(index) + "]" : id; }

std::string identity_verdict(double left, double right, double error, bool stabilized) {
    if (!stabilized || !std::isfinite(left) || !std::isfinite(right) || !std::isfinite(error)) return "inconclusive";
    return std::abs(left - right) <= std::max(kIdentityFloor, 3.0 * error) ? "pass" : "fail";
}

Eigen::MatrixXi gauss_bonnet_matrix(int n) {
    if (n < 1) throw std::invalid_argument("Gauss-Bonnet matrix needs n >= 1");
    // Column 0 is chi(X); column j >= 1 is chi_{n-j+1}.
    Eigen::MatrixXi L = Eigen::MatrixXi::Zero(n + 1, n + 1);
    L(0, 0) = 1;
    if (n >= 1) L(0, 1) = -1;
    if (n >= 2) L(0, 2) = -1;
    for (int k = 1; k <= n - 2; ++k) {
        L(k, k) = 1;
        L(k, k + 2) = -1;
    }
    for (int k = std::max(1, n - 1); k <= n; ++k) L(k, k) = 1;
    return L;
}

namespace {

// Linear combination of ingredients with its combined error.
struct Combination {
    double value = 0.0;
    double error = 0.0;
    bool stabilized = true;
    std::string detail;

    Combination& add(double coef, const Ingredient& in) {
        value += coef * in.value;
        error += std::abs(coef) * in.error;
        if (!in.stabilized) {
            stabilized = false;
            if (detail.empty()) detail = in.detail;
        }
        return *this;
    }
};

Combination single(const Ingredient& in, double coef = 1.0) { return Combination{}.add(coef, in); }

IdentityResidual residual(const std::string& id, int index, const Combination& left, const Combination& right) {
    IdentityResidual r;
    r.id = id;
    r.index = index;
    r.left = left.value;
    r.right = right.value;
    r.error = left.error + right.error;
    const bool stable = left.stabilized && right.stabilized;
    r.verdict = identity_verdict(r.left, r.right, r.error, stable);
    if (!stable) r.detail = !left.detail.empty() ? left.detail : right.detail;
    return r;
}

Ingredient from_density(const DensityEstimate& est) {
    Ingredient in;
    in.value = est.limit;
    in.error = est.error;
    in.stabilized = est.converged() && std::isfinite(est.limit);
    if (!in.stabilized) in.detail = est.label() + " did not converge";
    return in;
}

Ingredient failed(const std::string& what) {
    Ingredient in;
    in.value = std::numeric_limits<double>::quiet_NaN();
    in.error = std::numeric_limits<double>::quiet_NaN();
    in.stabilized = false;
    in.detail = what;
    return in;
}

Ingredient euler_ingredient(const DefinableSet& set, std::optional<int> hint, const GbOptions& options) {
    try {
        const EulerResult e = euler_global(set, options.euler_radius, options.euler_resolution, hint);
        return Ingredient{static_cast<double>(e.chi), 0.0, true, e.hint_used ? "chi from hint" : ""};
    } catch (const std::exception& e) {
        return failed(std::string("chi(X): ") + e.what());
    }
}

Ingredient chi_ingredient(const DefinableSet& set, int l, const GbOptions& options) {
    try {
        const ChiEstimate c =
            chi_l_infty(set, l, options.planes, substream_seed({options.seed, 0xC41ULL, static_cast<std::uint64_t>(l)}),
                        options.link_schedule);
        Ingredient in{c.value, c.std_error, c.stabilized, ""};
        if (!c.stabilized) in.detail = "chi_" + std::to_string(l) + " link did not stabilize";
        return in;
    } catch (const std::exception& e) {
        return failed("chi_" + std::to_string(l) + ": " + e.what());
    }
}

DensityOptions seeded(const GbOptions& options) {
    DensityOptions d = options.density;
    d.seed = options.seed;
    return d;
}

}  // namespace

GbIngredients gb_ingredients(const DefinableSet& set, std::optional<int> chi_hint, const GbOptions& options) {
    const int n = set.ambient();
    if (n < 2 || n > 3) throw std::invalid_argument("Gauss-Bonnet checks need a set in R^2 or R^3");
    const int dim = set.kind == SetKind::Fiber ? n - 1 : n;
    GbIngredients g;
    g.n = n;
    g.lambda.assign(static_cast<std::size_t>(n + 1), Ingredient{});
    std::vector<DensityRequest> req;
    for (int k = 0; k <= dim; ++k) req.push_back({DensityTarget::Lambda, k});
    try {
        const auto est = mesh_densities(set, req, options.density_schedule, seeded(options));
        for (int k = 0; k <= dim; ++k) g.lambda[static_cast<std::size_t>(k)] = from_density(est[static_cast<std::size_t>(k)]);
    } catch (const std::exception& e) {
        for (int k = 0; k <= dim; ++k) g.lambda[static_cast<std::size_t>(k)] = failed(std::string("Lambda: ") + e.what());
    }
    g.chi.assign(static_cast<std::size_t>(n + 1), Ingredient{});
    g.chi[0] = euler_ingredient(set, chi_hint, options);
    for (int l = 1; l <= n; ++l) g.chi[static_cast<std::size_t>(l)] = chi_ingredient(set, l, options);
    return g;
}

std::vector<IdentityResidual> gb_identity_check(const GbIngredients& g) {
    const int n = g.n;
    auto lam = [&](int k) { return g.lambda[static_cast<std::size_t>(k)]; };
    auto chi = [&](int l) { return g.chi[static_cast<std::size_t>(l)]; };
    std::vector<IdentityResidual> out;
    out.push_back(residual("GB-0", -1, single(lam(0)), single(chi(0)).add(-1, chi(n)).add(-1, chi(n - 1))));
    for (int k = 1; k <= n - 2; ++k)
        out.push_back(residual("GB-k", k, single(lam(k)), single(chi(n - k - 1), -1).add(1, chi(n - k + 1))));
    out.push_back(residual("GB-(n-1)", -1, single(lam(n - 1)), single(chi(2))));
    out.push_back(residual("GB-n", -1, single(lam(n)), single(chi(1))));

    // Lambda_* against L chi_{-*}, reporting the worst row.
    const Eigen::MatrixXi L = gauss_bonnet_matrix(n);
    std::vector<Ingredient> column(static_cast<std::size_t>(n + 1));
    column[0] = chi(0);
    for (int j = 1; j <= n; ++j) column[static_cast<std::size_t>(j)] = chi(n - j + 1);
    IdentityResidual worst;
    double worst_ratio = -1.0;
    bool all_pass = true, any_inconclusive = false;
    for (int k = 0; k <= n; ++k) {
        Combination right;
        for (int j = 0; j <= n; ++j)
            if (L(k, j) != 0) right.add(L(k, j), column[static_cast<std::size_t>(j)]);
        const IdentityResidual r = residual("matrix-L", k, single(lam(k)), right);
        const double ratio = std::abs(r.left - r.right) / std::max(kIdentityFloor, 3.0 * r.error);
        if (r.verdict == "inconclusive") any_inconclusive = true;
        if (r.verdict == "fail") all_pass = false;
        if (!(ratio <= worst_ratio) || worst_ratio < 0) {
            worst = r;
            worst_ratio = std::isfinite(ratio) ? ratio : std::numeric_limits<double>::infinity();
        }
    }
    worst.verdict = !all_pass ? "fail" : any_inconclusive ? "inconclusive" : "pass";
    out.push_back(worst);
    return out;
}

std::vector<IdentityResidual> gb_identity_check(const DefinableSet& set, std::optional<int> chi_hint,
                                                const GbOptions& options) {
    return gb_identity_check(gb_ingredients(set, chi_hint, options));
}

std::vector<IdentityResidual> gb_identity_check(const FamilySpec& spec, const Eigen::VectorXd& y, SetKind kind,
                                                const GbOptions& options) {
    return gb_identity_check(DefinableSet::from_spec(spec, y, kind), chi_hint(spec, kind), options);
}

std::vector<IdentityResidual> hypersurface_gb_check(const Polynomial& f, std::optional<int> chi_hint,
                                                    const GbOptions& options) {
    const int n = static_cast<int>(f.arity());
    if (n < 2 || n > 3) throw std::invalid_argument("hypersurface checks need R^2 or R^3");
    const DefinableSet sub{SetKind::Sublevel, f};

    std::vector<DensityRequest> req;
    for (int i = 0; i < n; ++i) req.push_back({DensityTarget::Sigma, i});
    for (int i = 0; i < n; ++i) req.push_back({DensityTarget::Lambda, i});
    req.push_back({DensityTarget::Theta, n});
    std::vector<Ingredient> sigma(static_cast<std::size_t>(n)), lambda(static_cast<std::size_t>(n));
    Ingredient theta;
    try {
        const auto est = mesh_densities(sub, req, options.density_schedule, seeded(options));
        for (int i = 0; i < n; ++i) {
            sigma[static_cast<std::size_t>(i)] = from_density(est[static_cast<std::size_t>(i)]);
            lambda[static_cast<std::size_t>(i)] = from_density(est[static_cast<std::size_t>(n + i)]);
        }
        theta = from_density(est.back());
    } catch (const std::exception& e) {
        for (auto& s : sigma) s = failed(e.what());
        for (auto& s : lambda) s = failed(e.what());
        theta = failed(e.what());
    }
    std::vector<Ingredient> chi(static_cast<std::size_t>(n + 1));
    chi[0] = euler_ingredient(sub, chi_hint, options);
    for (int l = 1; l <= n; ++l) chi[static_cast<std::size_t>(l)] = chi_ingredient(sub, l, options);
    // chi_0 at infinity: G(0, n) is the origin, whose link at infinity is empty.
    auto chi_inf = [&](int l) { return l == 0 ? Ingredient{} : chi[static_cast<std::size_t>(l)]; };
    auto sig = [&](int i) { return sigma[static_cast<std::size_t>(i)]; };

    std::vector<IdentityResidual> out;
    out.push_back(residual("GB-hyp-n", -1, single(theta), single(chi_inf(1))));
    out.push_back(residual("GB-hyp-(n-1)", -1, single(sig(n - 1), 1.0 / sphere_volume(n - 1)),
                           single(chi[0]).add(-1, chi_inf(n)).add(-1, chi_inf(n - 1))));
    for (int i = 0; i <= n - 2; ++i)
        out.push_back(residual("GB-hyp-i", i, single(sig(i), 1.0 / (sphere_volume(i) * ball_volume(n - i - 1))),
                               single(chi_inf(i), -1).add(1, chi_inf(i + 2))));
    for (int i = 0; i < n; ++i)
        out.push_back(residual("sigma-lambda-bridge", i, single(sig(n - 1 - i)),
                               single(lambda[static_cast<std::size_t>(i)], sphere_volume(n - 1 - i) * ball_volume(i))));
    return out;
}

std::vector<IdentityResidual> hypersurface_gb_check(const FamilySpec& spec, const Eigen::VectorXd& y,
                                                    const GbOptions& options) {
    return hypersurface_gb_check(spec.fiber_polynomial(y), chi_hint(spec, SetKind::Sublevel), options);
}

const InvariantEntry* InvariantVector::find(const std::string& quantity) const {
    for (const auto& e : entries)
        if (e.quantity == quantity) return &e;
    return nullptr;
}

std::vector<std::string> invariant_quantities(int n) {
    if (n < 2 || n > 3) throw std::invalid_argument("invariant vectors need R^2 or R^3");
    const int d = n - 1;
    std::vector<std::string> q;
    for (int l = 1; l <= n; ++l) q.push_back("chi:" + std::to_string(l));
    for (int k = 0; k <= d; ++k) q.push_back("lambda:" + std::to_string(k));
    for (int i = 0; i <= d; i += 2) q.push_back("kappa:" + std::to_string(i));
    for (int i = 0; i < n; ++i) q.push_back("sigma:" + std::to_string(i));
    q.push_back("theta");
    return q;
}

namespace {

std::vector<std::string> selected_quantities(int n, const std::vector<std::string>& wanted) {
    const auto all = invariant_quantities(n);
    if (wanted.empty()) return all;
    for (const auto& w : wanted)
        if (std::find(all.begin(), all.end(), w) == all.end())
            throw std::invalid_argument("unknown invariant quantity '" + w + "'");
    std::vector<std::string> out;
    for (const auto& q : all)
        if (std::find(wanted.begin(), wanted.end(), q) != wanted.end()) out.push_back(q);
    return out;
}

InvariantEntry failed_entry(const std::string& q, const std::string& why) {
    InvariantEntry e;
    e.quantity = q;
    e.error = std::numeric_limits<double>::quiet_NaN();
    e.status = "failed";
    e.detail = why;
    return e;
}

InvariantEntry density_entry(const std::string& q, const DensityEstimate& est) {
    InvariantEntry e;
    e.quantity = q;
    if (!std::isfinite(est.limit)) {
        e = failed_entry(q, est.flags.empty() ? "no finite values" : est.flags.back());
        return e;
    }
    e.value = est.limit;
    e.error = est.error;
    e.status = est.converged() ? "ok" : "non-convergent";
    return e;
}

std::string split_index(const std::string& q, int& index) {
    const auto colon = q.find(':');
    index = colon == std::string::npos ? -1 : std::stoi(q.substr(colon + 1));
    return q.substr(0, colon);
}

}  // namespace

ScanOptions scan_options(const FamilySpec& spec) {
    ScanOptions o;
    o.density_schedule = spec.schedule;
    o.acv_schedule = spec.schedule;
    o.planes = spec.sampling.planes;
    o.seed = spec.seed;
    o.density = density_options(spec);
    return o;
}

InvariantVector invariant_vector(const FamilySpec& spec, const Eigen::VectorXd& y, const ScanOptions& options) {
    const auto quantities = selected_quantities(spec.n, options.quantities);
    InvariantVector iv;
    iv.y = y;
    Polynomial f;
    try {
        f = spec.fiber_polynomial(y);
    } catch (const std::exception& e) {
        for (const auto& q : quantities) iv.entries.push_back(failed_entry(q, e.what()));
        return iv;
    }
    const DefinableSet fiber{SetKind::Fiber, f};

    std::vector<DensityRequest> req;
    std::vector<std::size_t> req_slot;
    iv.entries.resize(quantities.size());
    for (std::size_t j = 0; j < quantities.size(); ++j) {
        int index = -1;
        const std::string kind = split_index(quantities[j], index);
        if (kind == "chi") {
            InvariantEntry e;
            e.quantity = quantities[j];
            try {
                const ChiEstimate c = chi_l_infty(
                    fiber, index, options.planes,
                    substream_seed({options.seed, 0xC41ULL, static_cast<std::uint64_t>(index)}), options.link_schedule);
                e.value = c.value;
                e.error = c.std_error;
                e.status = c.stabilized ? "ok" : "non-convergent";
            } catch (const std::exception& ex) {
                e = failed_entry(quantities[j], ex.what());
            }
            iv.entries[j] = e;
            continue;
        }
        DensityTarget t = DensityTarget::Theta;
        if (kind == "lambda") t = DensityTarget::Lambda;
        if (kind == "kappa") t = DensityTarget::Kappa;
        if (kind == "sigma") t = DensityTarget::Sigma;
        req.push_back({t, t == DensityTarget::Theta ? spec.n : index});
        req_slot.push_back(j);
    }
    if (!req.empty()) {
        DensityOptions dopt = options.density;
        dopt.seed = options.seed;
        try {
            const auto est = mesh_densities(fiber, req, options.density_schedule, dopt);
            for (std::size_t r = 0; r < req.size(); ++r) iv.entries[req_slot[r]] = density_entry(quantities[req_slot[r]], est[r]);
        } catch (const std::exception& e) {
            for (std::size_t r = 0; r < req.size(); ++r) iv.entries[req_slot[r]] = failed_entry(quantities[req_slot[r]], e.what());
        }
    }
    try {
        iv.components = mesh_level(f, options.density_schedule.r0).component_count;
    } catch (const std::exception&) {
        iv.components = -1;
    }
    return iv;
}

std::vector<std::optional<double>> ScanResult::trace(const std::string& quantity) const {
    std::vector<std::optional<double>> out;
    for (const auto& node : nodes) {
        const InvariantEntry* e = node.find(quantity);
        out.push_back(e ? e->value : std::nullopt);
    }
    return out;
}

namespace {

bool boxes_meet(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const KComponent& k) {
    for (Eigen::Index j = 0; j < lo.size(); ++j)
        if (hi[j] < k.lower[j] - 1e-12 || lo[j] > k.upper[j] + 1e-12) return false;
    return true;
}

}  // namespace

ScanResult continuity_scan(const FamilySpec& spec, const std::vector<GridAxis>& grid, const ScanOptions& options) {
    if (grid.empty() || grid.size() > 2) throw std::invalid_argument("continuity scans need a 1- or 2-dimensional grid");
    if (static_cast<int>(grid.size()) != spec.s) throw std::invalid_argument("grid dimension must equal the parameter count");
    for (const auto& a : grid)
        if (a.steps < 1) throw std::invalid_argument("grid axes need at least one node");
    ScanResult out;
    out.grid = grid;
    out.quantities = selected_quantities(spec.n, options.quantities);
    out.k = estimate_K(spec, grid, options.acv_schedule, options.seed, options.acv);

    const int n0 = grid[0].steps;
    const int n1 = grid.size() == 2 ? grid[1].steps : 1;
    const std::size_t count = static_cast<std::size_t>(n0) * static_cast<std::size_t>(n1);
    out.nodes.resize(count);
    parallel_for(count, [&](std::size_t idx) {
        const int i0 = static_cast<int>(idx) / n1;
        const int i1 = static_cast<int>(idx) % n1;
        Eigen::VectorXd y(spec.s);
        y[0] = grid[0].node(i0);
        if (grid.size() == 2) y[1] = grid[1].node(i1);
        InvariantVector iv = invariant_vector(spec, y, options);
        iv.index = grid.size() == 2 ? std::vector<int>{i0, i1} : std::vector<int>{i0};
        out.nodes[idx] = std::move(iv);
    });
    for (auto& node : out.nodes) {
        node.near_k = near_K(out.k, node.y, options.near_cells);
        if (node.near_k)
            for (auto& e : node.entries)
                if (e.status != "failed") e.status = "near-K";
    }

    auto compare = [&](const std::string& q, std::size_t a, std::size_t b) {
        const InvariantEntry* ea = out.nodes[a].find(q);
        const InvariantEntry* eb = out.nodes[b].find(q);
        const double pooled = std::sqrt(ea->error * ea->error + eb->error * eb->error);
        const double threshold = std::max(0.1, 5.0 * pooled);
        if (std::abs(*ea->value - *eb->value) <= threshold) return;
        Jump j;
        j.quantity = q;
        j.from = a;
        j.to = b;
        j.lower = out.nodes[a].y.cwiseMin(out.nodes[b].y);
        j.upper = out.nodes[a].y.cwiseMax(out.nodes[b].y);
        j.left = *ea->value;
        j.right = *eb->value;
        j.threshold = threshold;
        for (const auto& kc : out.k.k)
            if (boxes_meet(j.lower, j.upper, kc)) j.contains_k = true;
        out.jumps.push_back(j);
    };
    auto has_value = [&](std::size_t idx, const std::string& q) {
        const InvariantEntry* e = out.nodes[idx].find(q);
        return e && e->value.has_value() && std::isfinite(e->error);
    };
    for (const auto& q : out.quantities) {
        if (grid.size() == 1) {
            // Consecutive nodes carrying a value; a missing node widens the cell.
            std::optional<std::size_t> prev;
            for (std::size_t i = 0; i < count; ++i) {
                if (!has_value(i, q)) continue;
                if (prev) compare(q, *prev, i);
                prev = i;
            }
        } else {
            for (int i0 = 0; i0 < n0; ++i0)
                for (int i1 = 0; i1 < n1; ++i1) {
                    const std::size_t a = static_cast<std::size_t>(i0 * n1 + i1);
                    if (!has_value(a, q)) continue;
                    if (i0 + 1 < n0) {
                        const std::size_t b = static_cast<std::size_t>((i0 + 1) * n1 + i1);
                        if (has_value(b, q)) compare(q, a, b);
                    }
                    if (i1 + 1 < n1) {
                        const std::size_t b = a + 1;
                        if (has_value(b, q)) compare(q, a, b);
                    }
                }
        }
    }
    for (const auto& j : out.jumps)
        if (!j.contains_k) out.containment = false;
    return out;
}

}  // namespace infinitas
