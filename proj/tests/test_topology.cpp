#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "infinitas/topology.hpp"

using namespace infinitas;

namespace {

Polynomial poly(const std::string& s, int n) { return parse_polynomial(s, numbered_variables("x", static_cast<std::size_t>(n))); }
DefinableSet fiber(const std::string& s, int n = 2) { return {SetKind::Fiber, poly(s, n)}; }
DefinableSet sublevel(const std::string& s, int n = 2) { return {SetKind::Sublevel, poly(s, n)}; }

// Asymptotic Kolmogorov distribution tail with the Stephens correction.
double ks_p_value(double D, int N) {
    const double sn = std::sqrt(static_cast<double>(N));
    const double lam = (sn + 0.12 + 0.11 / sn) * D;
    double p = 0.0;
    for (int k = 1; k < 200; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
    return std::clamp(p, 0.0, 1.0);
}

// Number of sign changes of f on a fine angular scan of the circle of radius R.
int brute_force_circle_count(const Polynomial& f, double R, int samples = 200000) {
    Eigen::VectorXd p(2);
    int count = 0;
    p << R * std::cos(1e-7), R * std::sin(1e-7);
    double first = f(p), prev = first;
    for (int i = 1; i <= samples; ++i) {
        const double t = 1e-7 + 2 * M_PI * i / samples;
        p << R * std::cos(t), R * std::sin(t);
        const double v = f(p);
        if ((v >= 0) != (prev >= 0)) ++count;
        prev = v;
    }
    return count;
}

}  // namespace

TEST_CASE("sample_grassmannian") {
    CHECK(sample_grassmannian(1, 2, 0, 1).empty());
    for (const auto& P : sample_grassmannian(3, 3, 20, 5)) {
        CHECK((P.basis * P.basis.transpose() - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
    }
    for (const auto& P : sample_grassmannian(2, 5, 50, 9)) {
        CHECK(P.basis.rows() == 5);
        CHECK(P.basis.cols() == 2);
        CHECK((P.basis.transpose() * P.basis - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    }
    const auto a = sample_grassmannian(2, 4, 10, 77), b = sample_grassmannian(2, 4, 10, 77);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].basis == b[i].basis);
    CHECK_THROWS_AS(sample_grassmannian(3, 2, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(sample_grassmannian(1, 7, 1, 0), std::invalid_argument);
}

TEST_CASE("line directions are uniform (Kolmogorov-Smirnov)") {
    const int N = 10000;
    std::vector<double> u;
    for (const auto& P : sample_grassmannian(1, 2, N, 2024)) {
        double th = std::atan2(P.basis(1, 0), P.basis(0, 0));
        if (th < 0) th += M_PI;
        if (th >= M_PI) th -= M_PI;
        u.push_back(th / M_PI);
    }
    std::sort(u.begin(), u.end());
    double D = 0.0;
    for (int i = 0; i < N; ++i) D = std::max({D, (i + 1.0) / N - u[static_cast<std::size_t>(i)], u[static_cast<std::size_t>(i)] - static_cast<double>(i) / N});
    CHECK(ks_p_value(D, N) > 0.01);
}

TEST_CASE("section_set examples") {
    PlaneSample diag{1, Eigen::MatrixXd(2, 1), 0, 0};
    diag.basis << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    const auto h = section_set(fiber("x1*x2 - 1"), diag);
    CHECK_FALSE(h.degenerate);
    Eigen::VectorXd u(1);
    for (double t : {-3.0, 0.0, 0.7, 2.0}) {
        u[0] = t;
        CHECK(h.set.f(u) == doctest::Approx(t * t / 2 - 1));
    }
    CHECK(link_euler(h.set, 10.0).chi == 0);

    PlaneSample e2{1, Eigen::MatrixXd(2, 1), 0, 0};
    e2.basis << 0, 1;
    CHECK(section_set(sublevel("x1"), e2).degenerate);

    const auto P = sample_grassmannian(2, 3, 1, 4)[0];
    const auto s = section_set(fiber("x1^2 + x2^2 + x3^2 - 1", 3), P);
    CHECK_FALSE(s.degenerate);
    Eigen::VectorXd v(2);
    for (int i = 0; i < 5; ++i) {
        v << 0.3 * i, 1.0 - 0.2 * i;
        CHECK(s.set.f(v) == doctest::Approx(v.squaredNorm() - 1));
    }
}

TEST_CASE("link_euler examples") {
    const auto hyp = link_euler(fiber("x1*x2 - 1"), 10.0);
    CHECK(hyp.chi == 4);
    CHECK(hyp.count == 4);
    CHECK(brute_force_circle_count(poly("x1*x2 - 1", 2), 10.0) == 4);
    for (double R : {0.5, 1.0, 3.0, 100.0}) CHECK(link_euler(sublevel("x1"), R).chi == 1);
    CHECK(link_euler(fiber("x1^2 + x2^2 + x3^2 - 1", 3), 2.0).chi == 0);
    CHECK(link_euler(sublevel("x1^2 + x2^2 + x3^2 - 1", 3), 2.0).chi == 0);
    CHECK(link_euler(sublevel("x3", 3), 2.0).chi == 1);
    CHECK(link_euler(sublevel("x1^2 + x2^2 - 1", 3), 4.0).chi == 2);
    CHECK(link_euler(sublevel("1 - x1^2 - x2^2", 3), 4.0).chi == 0);  // band around the equator
    CHECK(link_euler(sublevel("x1", 1), 3.0).chi == 1);
    CHECK(link_euler(sublevel("x1^2 - 1", 1), 3.0).chi == 0);
    CHECK(link_euler(sublevel("1 - x1^2", 1), 3.0).chi == 2);
}

TEST_CASE("link_euler agrees with a brute-force angular scan") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const auto vars = numbered_variables("x", 2);
    for (int trial = 0; trial < 30; ++trial) {
        Polynomial f(vars);
        for (int a = 0; a <= 3; ++a)
            for (int b = 0; a + b <= 3; ++b) f.add_term(Exponent{a, b}, g(rng));
        const double R = 2.0 + trial % 5;
        const auto s = link_euler({SetKind::Fiber, f}, R);
        CHECK(s.chi == brute_force_circle_count(f, s.radius));
        const auto sub = link_euler({SetKind::Sublevel, f}, R);
        CHECK(2 * sub.chi == brute_force_circle_count(f, sub.radius));
    }
}

TEST_CASE("tangent radius is perturbed") {
    const auto s = link_euler(fiber("x1 - 2"), 2.0);
    CHECK(s.jitter > 0);
    CHECK(s.chi == 2);
}

TEST_CASE("stable_link examples") {
    const RadiusSchedule sched{4, 2, 7};
    const auto hyp = stable_link(fiber("x1*x2 - 1"), sched);
    CHECK(hyp.stabilized);
    CHECK(hyp.chi == 4);
    CHECK(hyp.first_stable == 0);
    CHECK(hyp.stable_radius() == 4.0);

    const auto br = stable_link(fiber("x1 + x1^2*x2"), sched);
    CHECK(br.stabilized);
    CHECK(br.chi == 6);

    const auto circ = stable_link(fiber("x1^2 + x2^2 - 1"), sched);
    CHECK(circ.stabilized);
    CHECK(circ.chi == 0);

    const auto hp = stable_link(sublevel("x1"), default_link_schedule());
    CHECK(hp.stabilized);
    CHECK(hp.chi == 1);
}

TEST_CASE("stable chi is unchanged by extending the schedule") {
    for (const auto& set : {fiber("x1*x2 - 1"), fiber("x1 + x1^2*x2"), fiber("x1^2 + x2^2 - 1"), sublevel("x1"),
                            sublevel("x1^2 + x2^2 - 1"), sublevel("x2 - x1^2"), fiber("x2")}) {
        const auto a = stable_link(set, RadiusSchedule{4, 2, 7});
        const auto b = stable_link(set, RadiusSchedule{4, 2, 9});
        REQUIRE(a.stabilized);
        CHECK(b.stabilized);
        CHECK(a.chi == b.chi);
    }
}

TEST_CASE("link chi parity for closed links") {
    for (const char* e : {"x1^2 + x2^2 + x3^2 - 1", "x3", "x1*x2*x3 - 1", "x1^2 + x2^2 - x3^2 - 1"}) {
        const auto rep = stable_link(fiber(e, 3), RadiusSchedule{4, 2, 5});
        CHECK(rep.stabilized);
        CHECK(rep.chi == 0);
    }
}

TEST_CASE("chi_l_infty examples") {
    const auto h2 = chi_l_infty(fiber("x1*x2 - 1"), 2, 0, 1);
    CHECK(h2.exact);
    CHECK(h2.value == 2.0);

    const auto h1 = chi_l_infty(fiber("x1*x2 - 1"), 1, 500, 11);
    CHECK(std::abs(h1.value) <= 0.05);
    CHECK(h1.planes == 500);

    CHECK(chi_l_infty(fiber("x1 - x2"), 2, 0, 1).value == 1.0);
    CHECK(chi_l_infty(fiber("x1^2 + x2^2 + 1"), 2, 0, 1).value == 0.0);
    CHECK(chi_l_infty(fiber("x1^2 + x2^2 + 1"), 1, 50, 1).value == 0.0);

    const auto hp = chi_l_infty(sublevel("x1"), 1, 200, 5);
    CHECK(hp.value == doctest::Approx(0.5));
    CHECK(hp.std_error == 0.0);

    const auto bp = chi_l_infty(sublevel("x2 - x1^2"), 1, 400, 5);
    CHECK(std::abs(bp.value - 1.0) <= std::max(0.05, 3 * bp.std_error));

    CHECK_THROWS_AS(chi_l_infty(fiber("x1"), 3, 10, 1), std::invalid_argument);
}

TEST_CASE("chi_l_infty: l = n equals half the stable link chi") {
    for (const auto& set : {fiber("x1*x2 - 1"), fiber("x1 + x1^2*x2"), fiber("x2"), sublevel("x1"),
                            sublevel("x2 - x1^2"), sublevel("x1^2 + x2^2 - 1")}) {
        const auto rep = stable_link(set, default_link_schedule());
        REQUIRE(rep.stabilized);
        CHECK(chi_l_infty(set, 2, 0, 1).value == 0.5 * rep.chi);
    }
}

TEST_CASE("doubling the plane count stays within two pooled standard errors") {
    for (const auto& set : {fiber("x1*x2 - 1"), sublevel("x2 - x1^2"), fiber("x1 + x1^2*x2")}) {
        const auto a = chi_l_infty(set, 1, 200, 21);
        const auto b = chi_l_infty(set, 1, 400, 22);
        const double pooled = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
        CHECK(std::abs(a.value - b.value) <= std::max(2 * pooled, 1e-12));
    }
}

TEST_CASE("chi_l_infty is deterministic across thread counts") {
    setenv("INFINITAS_THREADS", "1", 1);
    const auto a = chi_l_infty(sublevel("x2 - x1^2"), 1, 100, 8);
    setenv("INFINITAS_THREADS", "4", 1);
    const auto b = chi_l_infty(sublevel("x2 - x1^2"), 1, 100, 8);
    unsetenv("INFINITAS_THREADS");
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("cubical_euler") {
    CHECK(cubical_euler({1}, 1, 2) == 1);
    CHECK(cubical_euler({1, 0, 1}, 3, 1) == 2);
    CHECK(cubical_euler({1, 1, 1, 1, 0, 1, 1, 1, 1}, 3, 2) == 0);
    CHECK(cubical_euler({1, 0, 0, 1}, 2, 2) == 1);  // squares touching at a corner
    std::vector<char> shell(27, 1);
    shell[13] = 0;
    CHECK(cubical_euler(shell, 3, 3) == 2);
}

TEST_CASE("euler_global examples") {
    CHECK(euler_global(fiber("x1*x2 - 1"), 8, 256).chi == 2);
    CHECK(euler_global(fiber("x1 + x1^2*x2"), 8, 256).chi == 3);
    CHECK(euler_global(fiber("x1^2 + x2^2 - 1"), 8, 256).chi == 0);
    CHECK(euler_global(sublevel("x1^2 + x2^2 - 1"), 4, 128).chi == 1);
    CHECK(euler_global(sublevel("x1"), 4, 128).chi == 1);
    CHECK(euler_global(sublevel("x2 - x1^2"), 4, 128).chi == 1);
    CHECK(euler_global(sublevel("(x1^2 + x2^2 - 1)*(x1^2 + x2^2 - 4)"), 6, 128).chi == 0);
    CHECK(euler_global(sublevel("(x1^2 + x2^2 - 1)*(4 - x1^2 - x2^2)"), 6, 128).chi == 1);
    CHECK(euler_global(fiber("x1^2 + x2^2 + x3^2 - 1", 3), 2, 24).chi == 2);
    CHECK(euler_global(sublevel("x1^2 + x2^2 + x3^2 - 1", 3), 2, 24).chi == 1);
    CHECK(euler_global(fiber("x1 - 0.3", 1), 2, 64).chi == 1);

    const auto far = sublevel("(x1 - 7)^2 + x2^2 - 1");
    CHECK_THROWS_AS(euler_global(far, 4, 64), std::runtime_error);
    const auto hinted = euler_global(far, 4, 64, 1);
    CHECK(hinted.hint_used);
    CHECK(hinted.chi == 1);
}

TEST_CASE("chi hints from a family file") {
    const auto spec = parse_family_spec("family: {kind: map-graph, n: 2, s: 1, expr: \"x1\"}\nhints: {chi: {fiber: 1}}\n");
    CHECK(chi_hint(spec, SetKind::Fiber) == 1);
    CHECK_FALSE(chi_hint(spec, SetKind::Sublevel).has_value());
}

TEST_CASE("grassmannian_volume") {
    CHECK(grassmannian_volume(1, 2) == doctest::Approx(M_PI));
    CHECK(grassmannian_volume(1, 3) == doctest::Approx(2 * M_PI));
    CHECK(grassmannian_volume(3, 3) == doctest::Approx(1.0));
    CHECK(grassmannian_volume(2, 4) == doctest::Approx(grassmannian_volume(2, 4)));
    CHECK(grassmannian_volume(1, 4) == doctest::Approx(grassmannian_volume(3, 4)));
}
