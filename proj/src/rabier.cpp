#include "infinitas/rabier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "infinitas/parallel.hpp"

namespace infinitas {

namespace {

double max_row_norm(const Eigen::MatrixXd& A) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) m = std::max(m, A.row(i).norm());
    return m;
}

Eigen::VectorXd random_unit(Rng& rng, Eigen::Index q) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(q);
    do {
        for (Eigen::Index i = 0; i < q; ++i) v[i] = g(rng);
    } while (v.norm() < 1e-12);
    return v.normalized();
}

// Riemannian gradient descent on the Rayleigh quotient phi^T M phi over the sphere.
double sphere_descent_infimum(const Eigen::MatrixXd& A) {
    const Eigen::Index q = A.rows();
    const Eigen::MatrixXd M = A * A.transpose();
    const double scale = std::max(M.cwiseAbs().rowwise().sum().maxCoeff(), 1e-300);
    Rng rng = make_rng({0x5eedULL, static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(A.cols())});
    Eigen::VectorXd best;
    double best_val = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 32; ++s) {
        Eigen::VectorXd phi = random_unit(rng, q);
        const double v = phi.dot(M * phi);
        if (v < best_val) {
            best_val = v;
            best = phi;
        }
    }
    Eigen::VectorXd phi = best;
    const double step = 1.0 / scale;
    for (int it = 0; it < 20000; ++it) {
        const Eigen::VectorXd Mphi = M * phi;
        const double rq = phi.dot(Mphi);
        const Eigen::VectorXd grad = Mphi - rq * phi;
        if (grad.norm() <= 1e-15 * scale) break;
        phi = (phi - step * grad).normalized();
    }
    return std::sqrt(std::max(0.0, phi.dot(M * phi)));
}

// Support function of A(B^p) in direction phi, evaluated at its maximiser.
double support(const Eigen::MatrixXd& A, const Eigen::VectorXd& phi) {
    const Eigen::VectorXd at = A.transpose() * phi;
    const double n = at.norm();
    if (n == 0.0) return 0.0;
    const Eigen::VectorXd v = at / n;
    return phi.dot(A * v);
}

// Largest r with B(0, r) inside A(B^p): the minimum of the support function.
double support_inner_radius(const Eigen::MatrixXd& A) {
    const Eigen::Index q = A.rows();
    Rng rng = make_rng({0x1aaeULL, static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(A.cols())});
    double best = std::numeric_limits<double>::infinity();
    for (int start = 0; start < 16; ++start) {
        Eigen::VectorXd phi = random_unit(rng, q);
        double val = support(A, phi);
        double step = 0.5;
        while (step > 1e-10) {
            bool improved = false;
            for (Eigen::Index i = 0; i < q && !improved; ++i) {
                for (double sgn : {1.0, -1.0}) {
                    Eigen::VectorXd trial = phi;
                    trial[i] += sgn * step;
                    trial.normalize();
                    const double tv = support(A, trial);
                    if (tv < val) {
                        val = tv;
                        phi = trial;
                        improved = true;
                        break;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        best = std::min(best, val);
    }
    return best;
}

}  // namespace

double rabier_number(const Eigen::MatrixXd& A) {
    const Eigen::Index q = A.rows();
    const Eigen::Index p = A.cols();
    if (q == 0) return 0.0;
    if (q > p) return 0.0;
    if (!A.allFinite()) throw std::invalid_argument("linear map has non-finite entries");
    const double scale = max_row_norm(A);
    if (scale == 0.0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A / scale);
    const double smallest = svd.singularValues()[q - 1];
    if (smallest < kSurjectivityThreshold) return 0.0;
    return smallest * scale;
}

RabierEquivalence check_rabier_equivalences(const Eigen::MatrixXd& A) {
    RabierEquivalence r;
    if (A.rows() > A.cols()) return r;
    r.infimum = sphere_descent_infimum(A);
    r.inner_radius = support_inner_radius(A);
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
        r.singular_distance = svd.singularValues()[A.rows() - 1];
    }
    r.discrepancy = std::max({std::abs(r.infimum - r.inner_radius), std::abs(r.infimum - r.singular_distance),
                              std::abs(r.inner_radius - r.singular_distance)});
    return r;
}

double nu_of_graph_projection(const Eigen::MatrixXd& A) {
    const double nu = rabier_number(A);
    return nu / std::sqrt(1.0 + nu * nu);
}

double delta_distance(const Eigen::VectorXd& u, const Eigen::MatrixXd& E) {
    if (std::abs(u.norm() - 1.0) > 1e-10) throw std::invalid_argument("delta_distance needs a unit vector");
    if (E.cols() == 0) return 1.0;
    const Eigen::VectorXd perp = u - E * (E.transpose() * u);
    return std::min(1.0, perp.norm());
}

Eigen::VectorXd map_values(const FamilySpec& spec, const Eigen::VectorXd& x) {
    Eigen::VectorXd g(spec.s);
    for (int i = 0; i < spec.s; ++i) g[i] = spec.polys[static_cast<std::size_t>(i)](x);
    return g;
}

Eigen::MatrixXd map_jacobian(const FamilySpec& spec, const Eigen::VectorXd& x) {
    Eigen::MatrixXd J(spec.s, spec.n);
    for (int i = 0; i < spec.s; ++i) J.row(i) = evaluate_gradient(spec.polys[static_cast<std::size_t>(i)], x).transpose();
    return J;
}

Eigen::VectorXd graph_point(const FamilySpec& spec, const Eigen::VectorXd& x) {
    if (spec.kind != FamilyKind::MapGraph) throw std::invalid_argument("graph_point needs a map-graph family");
    Eigen::VectorXd w(spec.n + spec.s);
    w << x, map_values(spec, x);
    return w;
}

double defining_residual(const FamilySpec& spec, const Eigen::VectorXd& w) {
    if (spec.kind == FamilyKind::MapGraph) return (map_values(spec, w.head(spec.n)) - w.tail(spec.s)).norm();
    return std::abs(spec.polys[0](w));
}

namespace {

// Orthonormal basis of the column span of M (full column rank), completed to
// the whole space. Signs make the triangular factor's diagonal positive.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> span_and_complement(const Eigen::MatrixXd& M) {
    const Eigen::Index m = M.rows();
    const Eigen::Index k = M.cols();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < k; ++j)
        if (R(j, j) < 0) Q.col(j) *= -1.0;
    return {Q.leftCols(k), Q.rightCols(m - k)};
}

}  // namespace

TangentFrame fiber_tangent_frame(const FamilySpec& spec, const Eigen::VectorXd& w, double tol) {
    if (w.size() != spec.n + spec.s) throw std::invalid_argument("point has wrong dimension");
    TangentFrame frame;
    frame.point = w;
    if (spec.kind == FamilyKind::MapGraph) {
        const Eigen::VectorXd x = w.head(spec.n);
        Eigen::MatrixXd M(spec.n + spec.s, spec.n);
        M << Eigen::MatrixXd::Identity(spec.n, spec.n), map_jacobian(spec, x);
        auto [t, nrm] = span_and_complement(M);
        frame.tangent = std::move(t);
        frame.normal = std::move(nrm);
        return frame;
    }
    const Eigen::VectorXd g = evaluate_gradient(spec.polys[0], w);
    const double gn = g.norm();
    if (gn < 1e-9) throw std::domain_error("singular point of W");
    if (std::abs(spec.polys[0](w)) > tol * (1.0 + gn)) throw std::invalid_argument("point is not on W");
    auto [nrm, t] = span_and_complement(g);
    frame.normal = std::move(nrm);
    frame.tangent = std::move(t);
    return frame;
}

double fiber_rabier(const FamilySpec& spec, const TangentFrame& frame) {
    return rabier_number(frame.tangent.bottomRows(spec.s));
}

double fiber_rabier(const FamilySpec& spec, const Eigen::VectorXd& w) {
    return fiber_rabier(spec, fiber_tangent_frame(spec, w));
}

double malgrange_functional(const FamilySpec& spec, const Eigen::VectorXd& w) {
    return (1.0 + w.norm()) * fiber_rabier(spec, w);
}

double spherical_deviation(const FamilySpec& spec, const Eigen::VectorXd& w) {
    const double r = w.norm();
    if (r == 0.0) throw std::invalid_argument("spherical deviation is undefined at the origin");
    const TangentFrame frame = fiber_tangent_frame(spec, w);
    const Eigen::MatrixXd P = frame.tangent.bottomRows(spec.s);
    if (rabier_number(P) == 0.0) throw std::domain_error("critical point of the projection");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeFullV);
    const Eigen::Index d = frame.tangent.cols();
    const Eigen::MatrixXd kernel = svd.matrixV().rightCols(d - spec.s);
    const Eigen::MatrixXd E = frame.tangent * kernel;
    return delta_distance(w / r, E);
}

Eigen::MatrixXd right_inverse(const Eigen::MatrixXd& A) {
    if (rabier_number(A) == 0.0) throw std::domain_error("right inverse of a non-surjective map");
    const Eigen::MatrixXd AAt = A * A.transpose();
    return A.transpose() * AAt.ldlt().solve(Eigen::MatrixXd::Identity(A.rows(), A.rows()));
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

FlowResult transport_fiber(const FamilySpec& spec, const Eigen::VectorXd& x0, const Eigen::VectorXd& target,
                           const FlowOptions& opt) {
    if (spec.kind != FamilyKind::MapGraph) throw std::invalid_argument("transport_fiber needs a map-graph family");
    if (x0.size() != spec.n || target.size() != spec.s) throw std::invalid_argument("flow endpoints have wrong size");
    const Eigen::VectorXd c = map_values(spec, x0);
    const Eigen::VectorXd dy = target - c;

    // Velocity; fails when DG loses rank along the way.
    auto velocity = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        const Eigen::MatrixXd J = map_jacobian(spec, x);
        if (rabier_number(J) == 0.0) return false;
        out = right_inverse(J) * dy;
        return out.allFinite();
    };
    auto malgrange_at = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd w = graph_point(spec, x);
        return (1.0 + w.norm()) * nu_of_graph_projection(map_jacobian(spec, x));
    };

    FlowResult res;
    Eigen::VectorXd x = x0;
    double t = 0.0;
    double h = std::min(opt.initial_step, 1.0);
    res.min_malgrange = malgrange_at(x);
    res.times.push_back(0.0);
    res.trajectory.push_back(x);
    Eigen::VectorXd k1, k2, k3, k4, k5, k6, k7;
    if (!velocity(x, k1)) throw FlowBlocked("flow blocked: suspected generalized critical value on segment");

    for (int step = 0; t < 1.0; ++step) {
        if (step >= opt.max_steps) throw FlowBlocked("flow blocked: step budget exhausted");
        if (h < opt.min_step) throw FlowBlocked("flow blocked: suspected generalized critical value on segment");
        h = std::min(h, 1.0 - t);
        bool ok = velocity(x + h * a21 * k1, k2) &&
                  velocity(x + h * (a31 * k1 + a32 * k2), k3) &&
                  velocity(x + h * (a41 * k1 + a42 * k2 + a43 * k3), k4) &&
                  velocity(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5) &&
                  velocity(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
        Eigen::VectorXd xn;
        double err = std::numeric_limits<double>::infinity();
        if (ok) {
            xn = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            ok = velocity(xn, k7);
            if (ok) {
                const Eigen::VectorXd e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
                err = 0.0;
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const double sc = opt.atol + opt.rtol * std::max(std::abs(x[i]), std::abs(xn[i]));
                    err = std::max(err, std::abs(e[i]) / sc);
                }
            }
        }
        if (!ok || !(err <= 1.0)) {
            ++res.rejected_steps;
            h *= ok ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.5) : 0.25;
            continue;
        }
        const double tn = (1.0 - t - h <= 1e-15) ? 1.0 : t + h;
        // Keep the iterate on the level G = c + t (y - c).
        const Eigen::VectorXd level = c + tn * dy;
        Eigen::VectorXd r = map_values(spec, xn) - level;
        for (int it = 0; it < 5 && r.norm() > 0.5 * opt.identity_tol; ++it) {
            const Eigen::MatrixXd J = map_jacobian(spec, xn);
            if (rabier_number(J) == 0.0) break;
            xn -= right_inverse(J) * r;
            r = map_values(spec, xn) - level;
            ++res.corrections;
        }
        if (r.norm() > opt.identity_tol || !velocity(xn, k7)) {
            ++res.rejected_steps;
            h *= 0.25;
            continue;
        }
        res.max_identity_residual = std::max(res.max_identity_residual, r.norm());
        x = xn;
        t = tn;
        k1 = k7;
        ++res.accepted_steps;
        res.times.push_back(t);
        res.trajectory.push_back(x);
        res.min_malgrange = std::min(res.min_malgrange, malgrange_at(x));
        h *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
    }
    res.endpoint = x;
    return res;
}

}  // namespace infinitas
