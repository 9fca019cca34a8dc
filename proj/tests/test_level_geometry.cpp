#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "infinitas/level_geometry.hpp"
#include "test_main.hpp"

using namespace infinitas;

namespace {

Polynomial poly2(const std::string& s) { return parse_polynomial(s, numbered_variables("x", 2)); }
Polynomial poly3(const std::string& s) { return parse_polynomial(s, numbered_variables("x", 3)); }

Eigen::VectorXd pt(std::initializer_list<double> v) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) p[i++] = x;
    return p;
}

// Composite Simpson rule.
template <typename F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

// Length of x1 x2 = 1 inside B_R from the graph x2 = 1/x1 over both branches.
double hyperbola_length(double R) {
    const double d = std::sqrt(R * R * R * R - 4.0);
    const double a = std::sqrt((R * R - d) / 2.0);
    const double b = std::sqrt((R * R + d) / 2.0);
    const double half = simpson([](double t) { return std::sqrt(1.0 + 1.0 / (t * t * t * t)); }, a, b);
    return 2.0 * half;
}

double sigma_integral(const LevelMesh& mesh, int i) {
    return integrate_over_level(mesh, [i](const Jet2& j) { return shape_operator(j).sigma[i]; });
}

}  // namespace

TEST_CASE("constants") {
    CHECK(sphere_volume(0) == doctest::Approx(2.0));
    CHECK(sphere_volume(1) == doctest::Approx(2 * M_PI));
    CHECK(sphere_volume(2) == doctest::Approx(4 * M_PI));
    CHECK(ball_volume(1) == doctest::Approx(2.0));
    CHECK(ball_volume(2) == doctest::Approx(M_PI));
    CHECK(ball_volume(3) == doctest::Approx(4 * M_PI / 3));
}

TEST_CASE("trace_curve examples") {
    const LevelMesh circle = trace_curve(poly2("x1^2 + x2^2 - 1"), 5.0);
    CHECK(circle.dimension == 1);
    CHECK(circle.component_count == 1);
    REQUIRE(circle.closed.size() == 1);
    CHECK(circle.closed[0]);
    CHECK(std::abs(circle.total_measure() - 2 * M_PI) < 1e-4);
    CHECK(euler_characteristic(circle) == 0);

    const LevelMesh hyp = trace_curve(poly2("x1*x2 - 1"), 10.0);
    CHECK(hyp.component_count == 2);
    for (bool c : hyp.closed) CHECK_FALSE(c);
    const double oracle = hyperbola_length(10.0);
    CHECK(std::abs(hyp.total_measure() - oracle) < 0.01 * oracle);
    CHECK(euler_characteristic(hyp) == 2);

    CHECK(trace_curve(poly2("x1^2 + x2^2 + 1"), 5.0).empty());
}

TEST_CASE("trace_curve vertex invariants") {
    const Polynomial f = poly2("x1^3 - 3*x1 + x2^2 - 0.5");
    const LevelMesh m = trace_curve(f, 6.0);
    REQUIRE_FALSE(m.empty());
    for (const auto& v : m.vertices) {
        CHECK(std::abs(v.value) <= 1e-8 * (1 + v.gradient.norm()));
        CHECK(v.gradient.norm() >= kRegularityFloor);
        CHECK(v.point.norm() <= 6.0 * (1 + 1e-9));
    }
    CHECK(m.total_measure() > 0);
}

TEST_CASE("trace_curve aborts at a singular sample") {
    CHECK_THROWS_AS(trace_curve(poly2("x1*x2"), 1.0), SingularLevel);
    try {
        trace_curve(poly2("x1*x2"), 1.0);
    } catch (const SingularLevel& e) {
        CHECK(e.location().norm() < 1e-2);
    }
}

TEST_CASE("mesh_surface examples") {
    const LevelMesh sphere = mesh_surface(poly3("x1^2 + x2^2 + x3^2 - 1"), 2.0, {64});
    CHECK(sphere.dimension == 2);
    CHECK(std::abs(sphere.total_measure() - 4 * M_PI) < 0.01 * 4 * M_PI);
    CHECK(sphere.component_count == 1);
    CHECK(euler_characteristic(sphere) == 2);
    for (const auto& v : sphere.vertices) CHECK(std::abs(v.value) <= 1e-8 * (1 + v.gradient.norm()));

    const LevelMesh disk = mesh_surface(poly3("x3"), 1.0, {64});
    CHECK(std::abs(disk.total_measure() - M_PI) < 0.01 * M_PI);
    CHECK(euler_characteristic(disk) == 1);

    CHECK(mesh_surface(poly3("x1^2 + x2^2 + x3^2 + 1"), 2.0, {32}).empty());
}

TEST_CASE("mesh_level dispatches by arity") {
    CHECK(mesh_level(poly2("x1"), 1.0).dimension == 1);
    CHECK(mesh_level(poly3("x1"), 1.0, 16).dimension == 2);
    CHECK(mesh_level(poly2("x1"), 1.0).total_measure() == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("shape_operator examples") {
    const auto circle = shape_operator(evaluate_jet(poly2("x1^2 + x2^2 - 1"), pt({1, 0})));
    CHECK(circle.principal[0] == doctest::Approx(1.0));
    CHECK(circle.sigma[1] == doctest::Approx(1.0));

    const double r = 1.7;
    const auto sph = shape_operator(evaluate_jet(poly3("x1^2 + x2^2 + x3^2 - 2.89"), pt({0, r, 0})));
    CHECK(sph.principal[0] == doctest::Approx(1 / r));
    CHECK(sph.principal[1] == doctest::Approx(1 / r));
    CHECK(sph.sigma[1] == doctest::Approx(2 / r));
    CHECK(sph.sigma[2] == doctest::Approx(1 / (r * r)));

    const auto plane = shape_operator(evaluate_jet(poly3("x3"), pt({0.3, -2, 0})));
    CHECK(plane.sigma[0] == 1.0);
    CHECK(std::abs(plane.sigma[1]) < 1e-15);
    CHECK(std::abs(plane.sigma[2]) < 1e-15);

    const auto parab = shape_operator(evaluate_jet(poly2("x2 - x1^2"), pt({0, 0})));
    CHECK(std::abs(parab.sigma[1] + 2.0) < 1e-6);

    CHECK_THROWS_AS(shape_operator(evaluate_jet(poly2("x1^2 + x2^2"), pt({0, 0}))), SingularLevel);
}

TEST_CASE("convex boundaries have positive curvature") {
    std::mt19937_64 rng(7);
    const Polynomial ell = poly3("x1^2 + 2*x2^2 + 3*x3^2 - 1");
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd u = testutil::random_vector(rng, 3);
        const double q = u[0] * u[0] + 2 * u[1] * u[1] + 3 * u[2] * u[2];
        u /= std::sqrt(q);
        const auto s = shape_operator(evaluate_jet(ell, u));
        CHECK(s.principal.minCoeff() > 0);
    }
}

TEST_CASE("sigma re-expansion recovers the principal curvatures") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 4;
        const Eigen::VectorXd k = testutil::random_vector(rng, d);
        const Eigen::VectorXd s = elementary_symmetric(k);
        REQUIRE(s.size() == d + 1);
        CHECK(s[0] == 1.0);
        // prod (t - k_j) = sum (-1)^i sigma_i t^{d-i}
        for (int j = 0; j < d; ++j) {
            double p = 0.0;
            for (int i = 0; i <= d; ++i) p += ((i % 2) ? -1.0 : 1.0) * s[i] * std::pow(k[j], d - i);
            CHECK(std::abs(p) < 1e-8 * (1 + s.cwiseAbs().sum()));
        }
    }
}

TEST_CASE("lk_curvatures examples") {
    const auto circle = shape_operator(evaluate_jet(poly2("x1^2 + x2^2 - 1"), pt({0, 1})));
    const Eigen::VectorXd kc = lk_curvatures(circle, 1);
    CHECK(kc[0] == doctest::Approx(2.0));
    CHECK(kc[1] == 0.0);

    const double r = 2.0;
    const auto sph = shape_operator(evaluate_jet(poly3("x1^2 + x2^2 + x3^2 - 4"), pt({0, 0, r})));
    const Eigen::VectorXd ks = lk_curvatures(sph, 1);
    CHECK(ks[0] == doctest::Approx(2.0));
    CHECK(ks[1] == 0.0);
    CHECK(ks[2] == doctest::Approx(2 / (r * r)));

    const auto line = curve_sample(evaluate_jet(poly3("x1"), pt({0, 0, 3})), evaluate_jet(poly3("x2"), pt({0, 0, 3})));
    const Eigen::VectorXd kl = lk_curvatures(line, 2);
    CHECK(kl[0] == doctest::Approx(2 * M_PI));
    CHECK(std::abs(kl[1]) < 1e-12);

    // Unit circle in the plane x3 = 0: the normal-circle average of the odd
    // term vanishes, K_0 is the normal-circle length.
    const auto ring = curve_sample(evaluate_jet(poly3("x1^2 + x2^2 - 1"), pt({1, 0, 0})),
                                   evaluate_jet(poly3("x3"), pt({1, 0, 0})));
    CHECK(ring.curvature_vector.norm() == doctest::Approx(1.0));
    const Eigen::VectorXd kr = lk_curvatures(ring, 2);
    CHECK(kr[0] == doctest::Approx(2 * M_PI));
    CHECK(std::abs(kr[1]) < 1e-12);

    CHECK_THROWS_AS(lk_curvatures(circle, 3), std::invalid_argument);
}

TEST_CASE("integrate_over_level examples") {
    const LevelMesh circle = trace_curve(poly2("x1^2 + x2^2 - 1"), 5.0);
    CHECK(std::abs(sigma_integral(circle, 1) - 2 * M_PI) < 0.01 * 2 * M_PI);
    const LevelMesh hyp = trace_curve(poly2("x1*x2 - 1"), 10.0);
    const double len = integrate_over_level(hyp, [](const Jet2&) { return 1.0; });
    CHECK(len == doctest::Approx(hyp.total_measure()).epsilon(1e-12));
    CHECK(std::abs(len - hyperbola_length(10.0)) < 0.01 * hyperbola_length(10.0));
    std::vector<double> ones(hyp.vertices.size(), 1.0);
    CHECK(integrate_over_level(hyp, ones) == doctest::Approx(hyp.total_measure()).epsilon(1e-12));
    CHECK(integrate_over_level(LevelMesh{}, [](const Jet2&) { return 1.0; }) == 0.0);
}

TEST_CASE("Lambda_d is the mesh measure") {
    const LevelMesh hyp = trace_curve(poly2("x1*x2 - 1"), 10.0);
    CHECK(manifold_lambda(hyp, 1) == hyp.total_measure());
    const LevelMesh disk = mesh_surface(poly3("x3"), 1.0, {32});
    CHECK(manifold_lambda(disk, 2) == disk.total_measure());
}

TEST_CASE("sublevel_volume examples") {
    const auto half = sublevel_volume(poly2("x1"), 1.0, 200000, 3);
    CHECK(std::abs(half.value - M_PI / 2) < 3 * half.std_error);
    CHECK(half.std_error > 0);
    const auto disk = sublevel_volume(poly2("x1^2 + x2^2 - 1"), 2.0, 200000, 3);
    CHECK(std::abs(disk.value - M_PI) < 3 * disk.std_error);
    const auto none = sublevel_volume(poly2("1"), 2.0, 1000, 3);
    CHECK(none.value == 0.0);
    const auto again = sublevel_volume(poly2("x1^2 + x2^2 - 1"), 2.0, 200000, 3);
    CHECK(again.value == disk.value);
}

TEST_CASE("boundary_lambda examples") {
    const LevelMesh circle = trace_curve(poly2("x1^2 + x2^2 - 1"), 2.0);
    CHECK(boundary_lambda(circle, 0) == doctest::Approx(1.0).epsilon(1e-3));
    const LevelMesh line = trace_curve(poly2("x1"), 3.0);
    CHECK(std::abs(boundary_lambda(line, 0)) < 1e-12);
    CHECK(boundary_lambda(line, 1) == doctest::Approx(3.0).epsilon(1e-6));
    const LevelMesh sphere = mesh_surface(poly3("x1^2 + x2^2 + x3^2 - 1"), 2.0, {48});
    // Intrinsic volumes of the unit ball in R^3: 1, 4, 2 pi.
    CHECK(boundary_lambda(sphere, 0) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(boundary_lambda(sphere, 1) == doctest::Approx(4.0).epsilon(0.01));
    CHECK(boundary_lambda(sphere, 2) == doctest::Approx(2 * M_PI).epsilon(0.01));
}

TEST_CASE("mesh refinement changes integrals by under 0.5%") {
    for (const char* e : {"x1^2 + x2^2 - 1", "x1*x2 - 1", "x2 - x1^2"}) {
        const Polynomial f = poly2(e);
        TraceOptions coarse;
        coarse.max_step = 10.0 / 250;
        TraceOptions fine;
        fine.max_step = 10.0 / 500;
        const LevelMesh a = trace_curve(f, 10.0, coarse);
        const LevelMesh b = trace_curve(f, 10.0, fine);
        CHECK(std::abs(a.total_measure() - b.total_measure()) < 0.005 * b.total_measure());
        const double ka = sigma_integral(a, 1), kb = sigma_integral(b, 1);
        CHECK(std::abs(ka - kb) < 0.005 * std::max(std::abs(kb), 1.0));
    }
    const Polynomial s = poly3("x1^2 + x2^2 + x3^2 - 1");
    const LevelMesh a = mesh_surface(s, 2.0, {32});
    const LevelMesh b = mesh_surface(s, 2.0, {64});
    CHECK(std::abs(a.total_measure() - b.total_measure()) < 0.005 * b.total_measure());
}

TEST_CASE("circle_roots") {
    const CircleRoots h = circle_roots(poly2("x1*x2 - 1"), 10.0);
    CHECK(h.angles.size() == 4);
    CHECK_FALSE(h.tangency);
    for (double t : h.angles) CHECK(std::abs(100 * std::cos(t) * std::sin(t) - 1) < 1e-9);
    CHECK(circle_roots(poly2("x1^2 + x2^2 + 1"), 3.0).angles.empty());
    CHECK(circle_roots(poly2("x1"), 2.0).angles.size() == 2);
    CHECK(circle_roots(poly2("x1 - 2"), 2.0).tangency);
}

TEST_CASE("to_obj") {
    const LevelMesh line = trace_curve(poly2("x1"), 1.0);
    const std::string obj = line.to_obj();
    CHECK(obj.find("v ") == 0);
    CHECK(obj.find("\nl ") != std::string::npos);
}

TEST_CASE("surface shells between two radii") {
    SurfaceOptions o;
    o.resolution = 64;
    o.inner_radius = 1.0;
    const LevelMesh ring = mesh_surface(poly3("x3"), 2.0, o);
    CHECK(std::abs(ring.total_measure() - 3 * M_PI) < 0.01 * 3 * M_PI);
    for (const auto& v : ring.vertices) CHECK(v.point.norm() >= 1.0 - 1e-9);
    o.inner_radius = 0.5;
    const LevelMesh sphere = mesh_surface(poly3("x1^2 + x2^2 + x3^2 - 1"), 2.0, o);
    CHECK(std::abs(sphere.total_measure() - 4 * M_PI) < 0.01 * 4 * M_PI);
    o.inner_radius = 2.5;
    CHECK_THROWS_AS(mesh_surface(poly3("x3"), 2.0, o), std::invalid_argument);
}
