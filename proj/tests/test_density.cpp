#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "infinitas/density.hpp"
#include "infinitas/level_geometry.hpp"

using namespace infinitas;

namespace {

Polynomial poly(const std::string& s, int n = 2) { return parse_polynomial(s, numbered_variables("x", static_cast<std::size_t>(n))); }

const RadiusSchedule kSchedule{4, 2, 7};

bool within_rel(double v, double target, double rel) { return std::abs(v - target) <= rel * std::abs(target); }

}  // namespace

TEST_CASE("geometric_constants") {
    CHECK(geometric_constants(0).s == doctest::Approx(2.0));
    CHECK(geometric_constants(0).b == doctest::Approx(1.0));
    CHECK(geometric_constants(1).s == doctest::Approx(2 * M_PI));
    CHECK(geometric_constants(1).b == doctest::Approx(2.0));
    CHECK(geometric_constants(2).s == doctest::Approx(4 * M_PI));
    CHECK(geometric_constants(2).b == doctest::Approx(M_PI));
    for (int l = 0; l <= 16; ++l) {
        CHECK(geometric_constants(l).s == doctest::Approx(sphere_volume(l)));
        CHECK(geometric_constants(l).b == doctest::Approx(ball_volume(l)));
        // s_{l-1} = l b_l
        if (l >= 1) CHECK(geometric_constants(l - 1).s == doctest::Approx(l * geometric_constants(l).b));
    }
    CHECK_THROWS_AS(geometric_constants(17), std::invalid_argument);
}

TEST_CASE("extrapolate examples") {
    const std::vector<double> R{4, 8, 16, 32};
    const auto c = extrapolate(R, {2, 2, 2, 2});
    CHECK(c.limit == 2.0);
    CHECK(c.error == 0.0);
    CHECK(c.converged);

    std::vector<double> v;
    for (double r : R) v.push_back(2 + 1 / r);
    const auto p = extrapolate(R, v);
    CHECK(std::abs(p.limit - 2) <= 0.01);
    CHECK(p.alpha == doctest::Approx(1.0).epsilon(0.01));
    CHECK(p.rule == "power-law");

    const auto a = extrapolate(R, {1, -1, 1, -1});
    CHECK_FALSE(a.converged);

    CHECK_THROWS_AS(extrapolate({4, 8}, {1, 1}), std::invalid_argument);
    CHECK(extrapolate({4, 8, 16, 32}, {NAN, 1, 1, 1}).limit == 1.0);
}

TEST_CASE("extrapolate recovers synthetic power laws") {
    for (double alpha : {0.5, 1.0, 2.0})
        for (double L : {-3.0, 0.0, 4.0}) {
            std::vector<double> R, v;
            for (int j = 0; j < 7; ++j) {
                R.push_back(4 * std::pow(2, j));
                v.push_back(L + 3 * std::pow(R.back(), -alpha));
            }
            const auto e = extrapolate(R, v);
            CHECK(e.converged);
            CHECK(std::abs(e.limit - L) < 1e-6);
            CHECK(e.alpha == doctest::Approx(alpha).epsilon(1e-6));
        }
}

TEST_CASE("kappa_density examples") {
    const auto line = kappa_density(poly("x2"), 0, kSchedule);
    CHECK(within_rel(line.limit, 2.0, 0.01));
    const auto circle = kappa_density(poly("x1^2 + x2^2 - 1"), 0, kSchedule);
    CHECK(std::abs(circle.limit) <= 0.01);
    const auto hyp = kappa_density(poly("x1*x2 - 1"), 0, kSchedule);
    CHECK(within_rel(hyp.limit, 4.0, 0.01));
    CHECK(hyp.converged());
    CHECK(hyp.table.size() == 7);
}

TEST_CASE("odd kappa is exactly zero without meshing") {
    // A singular fiber would abort meshing; odd indices never mesh.
    const auto k = kappa_density(poly("x1*x2"), 1, kSchedule);
    CHECK(k.limit == 0.0);
    CHECK(k.status == "exact");
    const auto s = kappa_density(poly("x1*x2 - x3", 3), 1, kSchedule);
    CHECK(s.limit == 0.0);
}

TEST_CASE("sigma_density examples") {
    CHECK(within_rel(sigma_density(poly("x1^2 + x2^2 - 1"), 1, kSchedule).limit, 2 * M_PI, 0.01));
    CHECK(within_rel(sigma_density(poly("x2 - x1^2"), 1, kSchedule).limit, -M_PI, 0.02));
    CHECK(std::abs(sigma_density(poly("x3", 3), 1, kSchedule).limit) < 1e-12);
    CHECK(std::abs(sigma_density(poly("x3", 3), 2, kSchedule).limit) < 1e-12);
}

TEST_CASE("theta_density examples") {
    DensityOptions o;
    o.seed = 17;
    const auto hp = theta_density(poly("x1"), kSchedule, o);
    CHECK(std::abs(hp.limit - 0.5) <= 0.02);
    CHECK(hp.flags.front() == "theta-normalization=ball");
    CHECK(std::abs(theta_density(poly("x1^2 + x2^2 - 1"), kSchedule, o).limit) <= 0.01);
    const auto bp = theta_density(poly("x2 - x1^2"), kSchedule, o);
    CHECK(std::abs(bp.limit - 1.0) <= 0.02);
    const auto again = theta_density(poly("x2 - x1^2"), kSchedule, o);
    CHECK(again.limit == bp.limit);
}

TEST_CASE("lambda_infinity examples") {
    CHECK(within_rel(lambda_infinity({SetKind::Fiber, poly("x1*x2 - 1")}, 1, kSchedule).limit, 2.0, 0.01));
    CHECK(std::abs(lambda_infinity({SetKind::Fiber, poly("x2")}, 0, kSchedule).limit) < 1e-12);
    CHECK(within_rel(lambda_infinity({SetKind::Sublevel, poly("x1^2 + x2^2 - 1")}, 0, kSchedule).limit, 1.0, 0.01));
    CHECK(within_rel(lambda_infinity({SetKind::Sublevel, poly("x1")}, 1, kSchedule).limit, 0.5, 0.01));
    CHECK(within_rel(lambda_infinity({SetKind::Sublevel, poly("x2 - x1^2")}, 0, kSchedule).limit, -0.5, 0.02));
    CHECK_THROWS_AS(lambda_infinity({SetKind::Fiber, poly("x2")}, 2, kSchedule), std::invalid_argument);
}

TEST_CASE("compact fibers have vanishing positive-exponent densities") {
    for (const char* e : {"x1^2 + x2^2 - 1", "x1^4 + x2^2 - 2"}) {
        CHECK(std::abs(kappa_density(poly(e), 0, kSchedule).limit) <= 0.01);
        CHECK(std::abs(sigma_density(poly(e), 0, kSchedule).limit) <= 0.01);
        CHECK(std::abs(lambda_infinity({SetKind::Fiber, poly(e)}, 1, kSchedule).limit) <= 0.01);
    }
    const Polynomial sphere = poly("x1^2 + x2^2 + x3^2 - 1", 3);
    CHECK(std::abs(kappa_density(sphere, 0, kSchedule).limit) <= 0.01);
    CHECK(std::abs(sigma_density(sphere, 0, kSchedule).limit) <= 0.01);
    CHECK(std::abs(sigma_density(sphere, 1, kSchedule).limit) <= 0.01);
}

TEST_CASE("kappa_0 of a dilated line is invariant") {
    const double base = kappa_density(poly("x2"), 0, kSchedule).limit;
    for (const char* e : {"x2 - 0.5", "x2 - 3", "x2 + 10"})
        CHECK(within_rel(kappa_density(poly(e), 0, kSchedule).limit, base, 0.01));
}

TEST_CASE("sigma-lambda bridge on sub-levels") {
    // sigma_{n-1-i} = s_{n-1-i} b_i Lambda_i, n = 2
    for (const char* e : {"x1^2 + x2^2 - 1", "x1", "x2 - x1^2"}) {
        const Polynomial f = poly(e);
        for (int i = 0; i <= 1; ++i) {
            const auto sig = sigma_density(f, 1 - i, kSchedule);
            const auto lam = lambda_infinity({SetKind::Sublevel, f}, i, kSchedule);
            const double rhs = geometric_constants(1 - i).s * geometric_constants(i).b * lam.limit;
            const double err = sig.error + geometric_constants(1 - i).s * geometric_constants(i).b * lam.error;
            CHECK(std::abs(sig.limit - rhs) <= std::max(0.05, 3 * err));
        }
    }
}

TEST_CASE("family wrappers evaluate the fiber at y") {
    const auto spec = FamilySpec::hypersurface("x1^2 + x2^2 - y1", 2, 1);
    Eigen::VectorXd y(1);
    y << 4.0;
    CHECK(within_rel(sigma_density(spec, y, 1, kSchedule).limit, 2 * M_PI, 0.01));
    CHECK(std::abs(kappa_density(spec, y, 0, kSchedule).limit) <= 0.01);
    CHECK(std::abs(theta_density(spec, y, kSchedule).limit) <= 0.01);
}

TEST_CASE("mesh_densities agrees with the single-target functions") {
    DensityOptions o;
    o.seed = 5;
    const DefinableSet set{SetKind::Sublevel, poly("x2 - x1^2")};
    const std::vector<DensityRequest> req{{DensityTarget::Kappa, 0}, {DensityTarget::Kappa, 1}, {DensityTarget::Sigma, 1},
                                          {DensityTarget::Sigma, 0}, {DensityTarget::Lambda, 0}, {DensityTarget::Lambda, 2},
                                          {DensityTarget::Theta, 2}};
    const auto all = mesh_densities(set, req, kSchedule, o);
    REQUIRE(all.size() == req.size());
    CHECK(all[0].limit == kappa_density(set.f, 0, kSchedule, o).limit);
    CHECK(all[1].status == "exact");
    CHECK(all[2].limit == sigma_density(set.f, 1, kSchedule, o).limit);
    CHECK(all[3].limit == sigma_density(set.f, 0, kSchedule, o).limit);
    CHECK(all[4].limit == lambda_infinity(set, 0, kSchedule, o).limit);
    CHECK(all[5].limit == lambda_infinity(set, 2, kSchedule, o).limit);
    CHECK(all[6].limit == theta_density(set.f, kSchedule, o).limit);
    CHECK(all[4].label() == "lambda:0");
    CHECK_THROWS_AS(mesh_densities({SetKind::Fiber, set.f}, {{DensityTarget::Lambda, 2}}, kSchedule), std::invalid_argument);
}
