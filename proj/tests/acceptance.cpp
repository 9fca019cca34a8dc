// Acceptance checks, one per criterion. Usage: acceptance [N ...]; without
// arguments every criterion runs. Prints one PASS/FAIL line per criterion and
// exits non-zero when any of them fails.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "infinitas/acv.hpp"
#include "infinitas/density.hpp"
#include "infinitas/rabier.hpp"
#include "infinitas/report.hpp"
#include "infinitas/topology.hpp"
#include "infinitas/verify.hpp"
#include "test_main.hpp"

using namespace infinitas;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

Polynomial poly(const std::string& s, int n = 2) {
    return parse_polynomial(s, numbered_variables("x", static_cast<std::size_t>(n)));
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int r, int c) {
    Eigen::MatrixXd m(r, c);
    std::normal_distribution<double> g;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = g(rng);
    return m;
}

std::string fmt(double v) { return format_number(v); }

// Minimum of f over the unit sphere of R^q: random sampling followed by a
// shrinking coordinate pattern search.
template <typename F>
double sphere_min(F&& f, int q, std::mt19937_64& rng) {
    Eigen::VectorXd best;
    double fb = 1e300;
    const int samples = q == 1 ? 2 : 4000;
    for (int i = 0; i < samples; ++i) {
        Eigen::VectorXd x = q == 1 ? vec1(i ? -1.0 : 1.0) : testutil::random_vector(rng, q).normalized();
        const double v = f(x);
        if (v < fb) fb = v, best = x;
    }
    for (double h = 0.1; h > 1e-11;) {
        bool moved = false;
        for (int i = 0; i < q; ++i)
            for (double sgn : {1.0, -1.0}) {
                Eigen::VectorXd x = best;
                x[i] += sgn * h;
                x.normalize();
                const double v = f(x);
                if (v < fb) fb = v, best = x, moved = true;
            }
        if (!moved) h *= 0.5;
    }
    return fb;
}

Outcome rabier_equivalences() {
    Outcome o;
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> dim(1, 6);
    double eq = 0, homog = 0, normal = 0, mono = 0;
    for (int t = 0; t < 200; ++t) {
        const int q = dim(rng), p = dim(rng);
        const Eigen::MatrixXd A = random_matrix(rng, q, p);
        eq = std::max(eq, check_rabier_equivalences(A).discrepancy);
        const double nu = rabier_number(A);
        const double lambda = std::uniform_real_distribution<double>(-5, 5)(rng);
        homog = std::max(homog, std::abs(rabier_number(lambda * A) - std::abs(lambda) * nu));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
        const Eigen::MatrixXd N = svd.matrixV().leftCols(std::min(p, q));
        normal = std::max(normal, std::abs(rabier_number(A * N) - nu));
        const int k = std::uniform_int_distribution<int>(1, p)(rng);
        const Eigen::MatrixXd P = testutil::random_orthonormal(rng, p, k);
        mono = std::max(mono, rabier_number(A * P) - nu);
    }
    o.detail << "200 maps: equivalence discrepancy " << fmt(eq) << ", homogeneity " << fmt(homog)
             << ", normal restriction " << fmt(normal) << ", subspace excess " << fmt(std::max(mono, 0.0));
    o.require(eq <= 1e-4, "equivalences within 1e-4");
    o.require(homog <= 1e-8, "homogeneity within 1e-8");
    o.require(normal <= 1e-8 && mono <= 1e-8, "subspace monotonicity within 1e-8");
    return o;
}

Outcome graph_projection() {
    Outcome o;
    std::mt19937_64 rng(77);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        const int q = std::uniform_int_distribution<int>(1, 3)(rng);
        const int p = std::uniform_int_distribution<int>(q, 4)(rng);
        const Eigen::MatrixXd A = random_matrix(rng, q, p);
        Eigen::MatrixXd G(p + q, p);
        G << Eigen::MatrixXd::Identity(p, p), A;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
        const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(p + q, p);
        const double brute = sphere_min(
            [&](const Eigen::VectorXd& phi) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(p + q);
                e.tail(q) = phi;
                return (Q.transpose() * e).norm();
            },
            q, rng);
        worst = std::max(worst, std::abs(nu_of_graph_projection(A) - brute));
    }
    o.detail << "100 maps: largest difference " << fmt(worst);
    o.require(worst <= 1e-4, "agreement within 1e-4");
    return o;
}

double flow_residual(const FamilySpec& spec, const FlowResult& r, const Eigen::VectorXd& c, const Eigen::VectorXd& y) {
    double worst = 0;
    for (std::size_t i = 0; i < r.times.size(); ++i)
        worst = std::max(worst, (map_values(spec, r.trajectory[i]) - c - r.times[i] * (y - c)).norm());
    return worst;
}

Outcome flow_identity() {
    Outcome o;
    const auto line = FamilySpec::map_graph({"x1"}, 2);
    const auto circ = FamilySpec::map_graph({"x1^2 + x2^2"}, 2);
    const auto br = FamilySpec::map_graph({"x1 + x1^2*x2"}, 2);

    const auto r1 = transport_fiber(line, Eigen::Vector2d(0, 5), vec1(2));
    const double e1 = flow_residual(line, r1, vec1(0), vec1(2));
    o.require((r1.endpoint - Eigen::Vector2d(2, 5)).norm() <= 1e-6, "line endpoint (2,5)");

    const Eigen::Vector2d x0(1, 0);
    const auto r2 = transport_fiber(circ, x0, vec1(4));
    const double e2 = flow_residual(circ, r2, vec1(1), vec1(4));
    double radius = 0;
    for (std::size_t i = 0; i < r2.times.size(); ++i)
        radius = std::max(radius, std::abs(r2.trajectory[i].norm() - std::sqrt(1 + 3 * r2.times[i])));
    o.require(radius <= 1e-6, "circle radius sqrt(1+3t)");
    o.require(std::abs(r2.endpoint.norm() - 2) <= 1e-6 && (r2.endpoint.normalized() - x0).norm() <= 1e-6,
              "circle endpoint radius 2 on the starting ray");

    const auto r3 = transport_fiber(br, Eigen::Vector2d(1, 0), vec1(1.5));
    const double e3 = flow_residual(br, r3, vec1(1), vec1(1.5));
    o.require(std::abs(map_values(br, r3.endpoint)[0] - 1.5) <= 1e-6, "Broughton endpoint on G = 1.5");

    const double worst = std::max({e1, e2, e3});
    o.detail << "identity residual line " << fmt(e1) << ", circle " << fmt(e2) << ", Broughton " << fmt(e3)
             << "; circle radius deviation " << fmt(radius);
    o.require(worst <= 1e-6, "flow identity within 1e-6");
    return o;
}

bool within_cells_of_zero(const AcvReport& rep, double cell) {
    for (const auto& kc : rep.k)
        if (kc.lower[0] < -cell - 1e-12 || kc.upper[0] > cell + 1e-12) return false;
    return true;
}

Outcome acv_detection() {
    Outcome o;
    const std::vector<GridAxis> grid{GridAxis{-1, 1, 41}};
    const double cell = grid[0].spacing();
    const RadiusSchedule sched;

    const auto lin = estimate_K(FamilySpec::map_graph({"x1"}, 2), grid, sched, 7);
    o.require(lin.k.empty(), "x1 gives an empty K");

    const auto xy = estimate_K(FamilySpec::map_graph({"x1*x2"}, 2), grid, sched, 7);
    o.require(xy.k0.points.size() == 1 && std::abs(xy.k0.points[0].value[0]) <= cell, "x1 x2 has K0 = {0}");
    o.require(!xy.k.empty() && within_cells_of_zero(xy, cell), "x1 x2 components within a cell of 0");

    const auto br = estimate_K(FamilySpec::map_graph({"x1 + x1^2*x2"}, 2), grid, sched, 7);
    o.require(br.k0.points.empty(), "Broughton K0 empty");
    o.require(br.kinf.size() == 1 && within_cells_of_zero(br, cell), "Broughton Kinf = {0} within a cell");
    double slope = std::nan("");
    for (const auto& node : br.nodes)
        if (std::abs(node.y[0]) < 1e-12) slope = node.classification.slope;
    o.require(std::abs(slope + 1) <= 0.2, "Broughton log-log slope -1 +- 0.2");

    const auto circ = estimate_K(FamilySpec::hypersurface("x1^2 + x2^2 - y1", 2, 1), grid, sched, 7);
    o.require(circ.k0.points.size() == 1 && std::abs(circ.k0.points[0].value[0]) <= cell, "circle family K0 = {0}");
    o.require(!circ.k.empty() && within_cells_of_zero(circ, cell), "circle family components within a cell of 0");

    o.detail << "x1: " << lin.k.size() << " components; x1x2: " << xy.k0.points.size() << " K0 point(s); Broughton: "
             << br.kinf.size() << " Kinf component(s), slope " << fmt(slope) << "; circle family: "
             << circ.k0.points.size() << " K0 point(s)";
    return o;
}

Outcome plane_sections() {
    Outcome o;
    const auto br = FamilySpec::map_graph({"x1 + x1^2*x2"}, 2);
    const auto res = section_MR_test(br, vec1(1), 2, 100, 5, RadiusSchedule{});
    o.detail << "Broughton at c = 1: " << res.passed << "/" << res.planes << " planes pass (" << res.fiber_bounded
             << " fiber-bounded)";
    o.require(res.planes == 100 && res.pass_fraction >= 0.95, "pass fraction >= 0.95");
    return o;
}

Outcome links_and_chi() {
    Outcome o;
    const DefinableSet hyp{SetKind::Fiber, poly("x1*x2 - 1")};
    const DefinableSet bro{SetKind::Fiber, poly("x1 + x1^2*x2")};
    const DefinableSet half{SetKind::Sublevel, poly("x1")};
    const auto lh = stable_link(hyp, default_link_schedule());
    const auto lb = stable_link(bro, default_link_schedule());
    const auto lp = stable_link(half, default_link_schedule());
    o.require(lh.stabilized && lh.chi == 4, "hyperbola link chi 4");
    o.require(lb.stabilized && lb.chi == 6, "Broughton zero fiber link chi 6");
    o.require(lp.stabilized && lp.chi == 1, "half-plane link chi 1");
    const auto c2 = chi_l_infty(hyp, 2, 0, 1);
    o.require(c2.exact && c2.value == 2.0, "chi_2 of the hyperbola exactly 2");
    const auto c1 = chi_l_infty(hyp, 1, 500, 11);
    o.require(c1.planes == 500 && std::abs(c1.value) <= 0.05, "chi_1 of the hyperbola 0 +- 0.05");
    o.detail << "link chi hyperbola " << lh.chi << ", Broughton " << lb.chi << ", half-plane " << lp.chi << "; chi_2 "
             << fmt(c2.value) << ", chi_1 " << fmt(c1.value) << " over " << c1.planes << " planes";
    return o;
}

Outcome densities() {
    Outcome o;
    const RadiusSchedule sched{4, 2, 7};
    DensityOptions opts;
    opts.seed = 17;
    const auto rel = [](double v, double target, double tol) { return std::abs(v - target) <= tol * std::abs(target); };

    const double k0 = kappa_density(poly("x2"), 0, sched, opts).limit;
    const double sc = sigma_density(poly("x1^2 + x2^2 - 1"), 1, sched, opts).limit;
    const double sp = sigma_density(poly("x2 - x1^2"), 1, sched, opts).limit;
    const double th = theta_density(poly("x1"), sched, opts).limit;
    o.require(rel(k0, 2.0, 0.01), "kappa_0(line) = 2 +- 1%");
    o.require(rel(sc, 2 * std::numbers::pi, 0.01), "sigma_1(circle) = 2 pi +- 1%");
    o.require(rel(sp, -std::numbers::pi, 0.02), "sigma_1(parabola) = -pi +- 2%");
    o.require(std::abs(th - 0.5) <= 0.02, "Theta(half-plane) = 0.5 +- 0.02");

    // Compact fibers: every density whose radius exponent is positive.
    double compact = 0;
    const Polynomial circle = poly("x1^2 + x2^2 - 1");
    const Polynomial oval = poly("x1^4 + x2^2 - 2");
    const Polynomial sphere = poly("x1^2 + x2^2 + x3^2 - 1", 3);
    for (const Polynomial* f : {&circle, &oval}) {
        compact = std::max(compact, std::abs(kappa_density(*f, 0, sched, opts).limit));
        compact = std::max(compact, std::abs(sigma_density(*f, 0, sched, opts).limit));
        compact = std::max(compact, std::abs(theta_density(*f, sched, opts).limit));
    }
    compact = std::max(compact, std::abs(kappa_density(sphere, 0, sched, opts).limit));
    compact = std::max(compact, std::abs(sigma_density(sphere, 0, sched, opts).limit));
    compact = std::max(compact, std::abs(sigma_density(sphere, 1, sched, opts).limit));
    compact = std::max(compact, std::abs(theta_density(sphere, sched, opts).limit));
    o.require(compact <= 0.01, "compact fiber densities 0 +- 0.01");

    o.detail << "kappa_0(line) " << fmt(k0) << ", sigma_1(circle) " << fmt(sc) << ", sigma_1(parabola) " << fmt(sp)
             << ", Theta(half-plane) " << fmt(th) << ", largest compact density " << fmt(compact);
    return o;
}

Outcome gauss_bonnet() {
    Outcome o;
    struct Item {
        const char* name;
        SetKind kind;
        const char* expr;
        int chi;
    };
    const std::vector<Item> catalog{
        {"line", SetKind::Fiber, "x2", 1},
        {"circle", SetKind::Fiber, "x1^2 + x2^2 - 1", 0},
        {"parabola", SetKind::Fiber, "x2 - x1^2", 1},
        {"hyperbola", SetKind::Fiber, "x1*x2 - 1", 2},
        {"half-plane", SetKind::Sublevel, "x1", 1},
        {"disk", SetKind::Sublevel, "x1^2 + x2^2 - 1", 1},
        {"below-parabola", SetKind::Sublevel, "x2 - x1^2", 1},
    };
    int total = 0, passed = 0, matrix_rows = 0;
    for (const auto& item : catalog) {
        const DefinableSet set{item.kind, poly(item.expr)};
        auto residuals = gb_identity_check(set, item.chi);
        if (item.kind == SetKind::Sublevel) {
            const auto hyp = hypersurface_gb_check(set.f, item.chi);
            residuals.insert(residuals.end(), hyp.begin(), hyp.end());
        }
        for (const auto& r : residuals) {
            ++total;
            if (r.id == "matrix-L") ++matrix_rows;
            if (r.passed()) {
                ++passed;
            } else {
                o.require(false, std::string(item.name) + " " + r.label() + ": " + fmt(r.left) + " vs " + fmt(r.right) +
                                     " (" + r.verdict + ")");
            }
        }
    }
    o.detail << passed << "/" << total << " residuals pass over " << catalog.size() << " sets, including " << matrix_rows
             << " matrix-L rows";
    o.require(matrix_rows >= static_cast<int>(catalog.size()), "matrix-L checked on every set");
    return o;
}

FamilySpec load_example(const std::string& name) { return load_family_spec(std::string(INFINITAS_SPECS) + "/" + name); }

Outcome continuity() {
    Outcome o;
    for (const char* name : {"circle-family.yaml", "broughton.yaml", "hyperbola-family.yaml"}) {
        const FamilySpec spec = load_example(name);
        const ScanResult scan = continuity_scan(spec, spec.grid, scan_options(spec));
        int outside = 0;
        for (const auto& j : scan.jumps)
            if (!j.contains_k) ++outside;
        o.detail << name << ": " << scan.nodes.size() << " nodes, " << scan.jumps.size() << " jumps, " << outside
                 << " outside K; ";
        o.require(outside == 0 && scan.containment, std::string(name) + " jumps confined to K cells");

        if (std::string(name) == "broughton.yaml") {
            const auto chi2 = scan.trace("chi:2");
            bool ok = !chi2.empty();
            std::size_t zero = chi2.size();
            for (std::size_t i = 0; i < scan.nodes.size(); ++i)
                if (std::abs(scan.nodes[i].y[0]) < 1e-12) zero = i;
            ok = ok && zero > 0 && zero + 1 < chi2.size();
            for (std::size_t i = 0; ok && i < chi2.size(); ++i) {
                if (!chi2[i]) continue;
                ok = *chi2[i] == (i == zero ? 3.0 : 2.0);
            }
            ok = ok && chi2[zero] && chi2[zero - 1] && chi2[zero + 1];
            if (ok) o.detail << "chi_2 trace (...,2,3,2,...) across y = 0; ";
            o.require(ok, "Broughton chi_2 trace (...,2,3,2,...)");
        }
    }
    return o;
}

Outcome determinism() {
    Outcome o;
    FamilySpec spec = load_example("broughton.yaml");
    const std::vector<GridAxis> grid{GridAxis{-0.2, 0.2, 5}};
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "4", "8"}) {
        setenv("INFINITAS_THREADS", threads, 1);
        const ScanResult scan = continuity_scan(spec, grid, scan_options(spec));
        const DefinableSet set = DefinableSet::from_spec(spec, vec1(0.5), SetKind::Fiber);
        GbOptions gb;
        gb.seed = spec.seed;
        outputs.push_back(scan_csv(scan) + identity_csv(gb_identity_check(set, chi_hint(spec, SetKind::Fiber), gb)));
    }
    unsetenv("INFINITAS_THREADS");
    const bool same = outputs[0] == outputs[1] && outputs[1] == outputs[2];
    o.detail << "scan and identity CSV, " << outputs[0].size() << " bytes, threads 1/4/8 "
             << (same ? "byte-identical" : "differ");
    o.require(same, "byte-identical outputs");
    return o;
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list{
        {"rabier-equivalences", rabier_equivalences},
        {"graph-projection", graph_projection},
        {"flow-identity", flow_identity},
        {"acv-detection", acv_detection},
        {"plane-sections", plane_sections},
        {"links-and-chi", links_and_chi},
        {"densities", densities},
        {"gauss-bonnet", gauss_bonnet},
        {"continuity-scans", continuity},
        {"determinism", determinism},
    };
    return list;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    if (selected.empty())
        for (int i = 1; i <= static_cast<int>(criteria().size()); ++i) selected.push_back(i);

    int failures = 0;
    for (int id : selected) {
        if (id < 1 || id > static_cast<int>(criteria().size())) {
            std::cout << "FAIL " << id << " unknown criterion\n";
            ++failures;
            continue;
        }
        const auto& c = criteria()[static_cast<std::size_t>(id - 1)];
        bool pass = false;
        std::string detail;
        try {
            Outcome o = c.run();
            pass = o.pass;
            detail = o.detail.str();
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cout << (pass ? "PASS " : "FAIL ") << id << " " << c.name << ": " << detail << std::endl;
        if (!pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
