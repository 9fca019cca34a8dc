#include "infinitas/level_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "infinitas/parallel.hpp"
#include "infinitas/sampling.hpp"

namespace infinitas {

namespace {

std::string describe(const Eigen::VectorXd& p) {
    std::ostringstream os;
    os << "singular sample at (";
    for (Eigen::Index i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
    os << ")";
    return os.str();
}

constexpr double kPi = std::numbers::pi;

}  // namespace

SingularLevel::SingularLevel(const Eigen::VectorXd& where) : std::domain_error(describe(where)), where_(where) {}

double LevelMesh::total_measure() const { return std::accumulate(measure.begin(), measure.end(), 0.0); }

std::string LevelMesh::to_obj() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& v : vertices) {
        os << "v";
        for (Eigen::Index i = 0; i < v.point.size(); ++i) os << ' ' << v.point[i];
        os << '\n';
    }
    for (const auto& e : elements) {
        if (dimension == 1) os << "l " << e[0] + 1 << ' ' << e[1] + 1 << '\n';
        else os << "f " << e[0] + 1 << ' ' << e[1] + 1 << ' ' << e[2] + 1 << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Constants

double ball_volume(int l) {
    if (l < 0) throw std::invalid_argument("ball dimension must be non-negative");
    if (l == 0) return 1.0;
    if (l == 1) return 2.0;
    return 2.0 * kPi / l * ball_volume(l - 2);
}

double sphere_volume(int l) {
    if (l < 0) throw std::invalid_argument("sphere dimension must be non-negative");
    return (l + 1) * ball_volume(l + 1);
}

// ---------------------------------------------------------------------------
// Curvature

Eigen::VectorXd elementary_symmetric(const Eigen::VectorXd& k) {
    const Eigen::Index d = k.size();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d + 1);
    e[0] = 1.0;
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = j + 1; i >= 1; --i) e[i] += k[j] * e[i - 1];
    return e;
}

namespace {

Eigen::MatrixXd tangent_basis(const Eigen::VectorXd& g) {
    const Eigen::Index n = g.size();
    const Eigen::MatrixXd G = g;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return Q.rightCols(n - 1);
}

}  // namespace

CurvatureSample shape_operator(const Jet2& jet) {
    const double gn = jet.gradient.norm();
    if (gn < kRegularityFloor) throw SingularLevel(jet.point);
    CurvatureSample s;
    s.point = jet.point;
    const Eigen::MatrixXd T = tangent_basis(jet.gradient);
    const Eigen::MatrixXd S = T.transpose() * jet.hessian * T / gn;
    if (S.rows() == 1) {
        s.principal = Eigen::VectorXd::Constant(1, S(0, 0));
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
        s.principal = es.eigenvalues();
    }
    s.sigma = elementary_symmetric(s.principal);
    return s;
}

CurvatureSample curve_sample(const Jet2& f1, const Jet2& f2) {
    if (f1.point.size() != 3) throw std::invalid_argument("curve_sample expects a curve in R^3");
    const Eigen::Vector3d g1 = f1.gradient, g2 = f2.gradient;
    const Eigen::Vector3d cross = g1.cross(g2);
    if (cross.norm() < kRegularityFloor) throw SingularLevel(f1.point);
    const Eigen::Vector3d t = cross.normalized();
    Eigen::Matrix<double, 3, 2> N;
    N << g1, g2;
    const Eigen::Vector2d q(t.dot(f1.hessian * t), t.dot(f2.hessian * t));
    const Eigen::Vector2d c = (N.transpose() * N).ldlt().solve(-q);
    CurvatureSample s;
    s.point = f1.point;
    s.curvature_vector = N * c;
    s.principal = Eigen::VectorXd::Constant(1, s.curvature_vector.norm());
    s.sigma = elementary_symmetric(s.principal);
    return s;
}

Eigen::VectorXd lk_curvatures(const CurvatureSample& sample, int codim) {
    if (codim == 1) {
        Eigen::VectorXd K = 2.0 * sample.sigma;
        for (Eigen::Index i = 1; i < K.size(); i += 2) K[i] = 0.0;
        return K;
    }
    if (codim == 2) {
        if (sample.curvature_vector.size() != 3)
            throw std::invalid_argument("codimension-two curvatures need a curve sample in R^3");
        // Unit normal circle of the curve: orthogonal complement of the tangent.
        const Eigen::Vector3d kv = sample.curvature_vector;
        Eigen::Vector3d e1, e2;
        if (sample.point.size() == 3 && kv.norm() > 0) {
            e1 = kv.normalized();
        } else {
            e1 = Eigen::Vector3d::UnitX();
        }
        // Any orthonormal frame of the normal plane gives the same integrals;
        // the plane contains the curvature vector.
        e2 = Eigen::Vector3d::UnitZ().cross(e1);
        if (e2.norm() < 0.5) e2 = Eigen::Vector3d::UnitY().cross(e1);
        e2.normalize();
        const int nodes = 64;
        Eigen::VectorXd K = Eigen::VectorXd::Zero(2);
        for (int m = 0; m < nodes; ++m) {
            const double phi = 2 * kPi * m / nodes;
            const Eigen::Vector3d v = std::cos(phi) * e1 + std::sin(phi) * e2;
            K[0] += 1.0;
            K[1] += kv.dot(v);
        }
        return K * (2 * kPi / nodes);
    }
    throw std::invalid_argument("unsupported codimension");
}

double integrate_over_level(const LevelMesh& mesh, const std::vector<double>& values) {
    if (values.size() != mesh.vertices.size()) throw std::invalid_argument("one value per mesh vertex expected");
    double total = 0.0;
    const int k = mesh.element_size();
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        double avg = 0.0;
        for (int j = 0; j < k; ++j) avg += values[static_cast<std::size_t>(mesh.elements[e][static_cast<std::size_t>(j)])];
        total += mesh.measure[e] * avg / k;
    }
    return total;
}

double integrate_over_level(const LevelMesh& mesh, const std::function<double(const Jet2&)>& integrand) {
    std::vector<double> values(mesh.vertices.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = integrand(mesh.vertices[i]);
    return integrate_over_level(mesh, values);
}

double boundary_lambda(const LevelMesh& mesh, int k) {
    const int n = mesh.ambient;
    if (mesh.empty()) return 0.0;
    if (mesh.dimension != n - 1) throw std::invalid_argument("boundary_lambda needs a hypersurface mesh");
    if (k < 0 || k > n - 1) throw std::invalid_argument("boundary_lambda index out of range");
    const int idx = n - 1 - k;
    const double integral =
        integrate_over_level(mesh, [&](const Jet2& j) { return shape_operator(j).sigma[idx]; });
    return integral / sphere_volume(n - k - 1);
}

double manifold_lambda(const LevelMesh& mesh, int k) {
    if (mesh.empty()) return 0.0;
    const int n = mesh.ambient;
    const int d = mesh.dimension;
    if (k < 0 || k > d) throw std::invalid_argument("manifold_lambda index out of range");
    if (k == d) return mesh.total_measure();
    if (n - d != 1) throw std::invalid_argument("manifold_lambda supports hypersurface meshes");
    const int idx = d - k;
    const double integral =
        integrate_over_level(mesh, [&](const Jet2& j) { return lk_curvatures(shape_operator(j), 1)[idx]; });
    return integral / sphere_volume(n - k - 1);
}

int euler_characteristic(const LevelMesh& mesh) {
    std::vector<char> used(mesh.vertices.size(), 0);
    std::map<std::pair<int, int>, int> edges;
    for (const auto& e : mesh.elements) {
        const int k = mesh.element_size();
        for (int j = 0; j < k; ++j) used[static_cast<std::size_t>(e[static_cast<std::size_t>(j)])] = 1;
        if (mesh.dimension == 2)
            for (int j = 0; j < 3; ++j) {
                int a = e[static_cast<std::size_t>(j)], b = e[static_cast<std::size_t>((j + 1) % 3)];
                edges[{std::min(a, b), std::max(a, b)}] = 1;
            }
    }
    const int V = static_cast<int>(std::count(used.begin(), used.end(), 1));
    if (mesh.dimension == 1) return V - static_cast<int>(mesh.elements.size());
    return V - static_cast<int>(edges.size()) + static_cast<int>(mesh.elements.size());
}

// ---------------------------------------------------------------------------
// Circle roots

CircleRoots circle_roots(const Polynomial& f, double R) {
    if (f.arity() != 2) throw std::invalid_argument("circle_roots needs a polynomial in two variables");
    CircleRoots out;
    if (f.is_zero()) {
        out.tangency = true;
        return out;
    }
    const int D = f.degree();
    if (D == 0) return out;
    double bound = 0.0;
    for (const auto& [e, c] : f.terms()) bound += std::abs(c) * std::pow(R, e[0] + e[1]);
    const double B2 = static_cast<double>(D) * D * bound;

    auto point = [&](double th) { return Eigen::Vector2d(R * std::cos(th), R * std::sin(th)); };
    auto g = [&](double th) { return f(Eigen::VectorXd(point(th))); };
    auto dg = [&](double th, double* gradnorm = nullptr) {
        const Eigen::VectorXd gr = evaluate_gradient(f, Eigen::VectorXd(point(th)));
        if (gradnorm) *gradnorm = gr.norm();
        return gr[0] * (-R * std::sin(th)) + gr[1] * (R * std::cos(th));
    };
    auto positive = [](double v) { return v >= 0.0; };

    const double h_min = 1e-15;
    const double theta0 = 1e-3 * std::numbers::sqrt2;  // avoids roots at symmetric angles
    struct Interval {
        double a, b;
    };
    std::vector<Interval> stack;
    const int pieces = 64;
    for (int i = pieces - 1; i >= 0; --i)
        stack.push_back({theta0 + 2 * kPi * i / pieces, theta0 + 2 * kPi * (i + 1) / pieces});

    while (!stack.empty()) {
        const Interval iv = stack.back();
        stack.pop_back();
        const double m = 0.5 * (iv.a + iv.b);
        const double h = 0.5 * (iv.b - iv.a);
        const double gm = g(m);
        const double dgm = dg(m);
        if (std::abs(gm) > h * std::abs(dgm) + 0.5 * h * h * B2) continue;
        if (std::abs(dgm) > h * B2) {
            // Monotone on the interval: at most one root.
            double a = iv.a, b = iv.b;
            const bool pa = positive(g(a));
            if (pa == positive(g(b))) continue;
            for (int it = 0; it < 200 && b - a > 4e-16 * (1 + std::abs(a)); ++it) {
                const double c = 0.5 * (a + b);
                if (positive(g(c)) == pa) a = c; else b = c;
            }
            double th = 0.5 * (a + b);
            double gn = 0.0;
            const double d = dg(th, &gn);
            if (std::abs(d) < 1e-6 * R * gn) out.tangency = true;
            th = std::fmod(th, 2 * kPi);
            if (th < 0) th += 2 * kPi;
            out.angles.push_back(th);
            continue;
        }
        if (h < h_min) {
            out.tangency = true;
            continue;
        }
        stack.push_back({m, iv.b});
        stack.push_back({iv.a, m});
    }
    std::sort(out.angles.begin(), out.angles.end());
    return out;
}

// ---------------------------------------------------------------------------
// Curve tracing

namespace {

struct SegmentHash {
    double cell;
    std::unordered_map<long long, std::vector<int>> cells;

    long long key(long long i, long long j) const { return (i << 32) ^ (j & 0xffffffffLL); }
    std::pair<long long, long long> index(const Eigen::Vector2d& p) const {
        return {static_cast<long long>(std::floor(p[0] / cell)), static_cast<long long>(std::floor(p[1] / cell))};
    }
    void insert(int id, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        const auto [i0, j0] = index(a.cwiseMin(b));
        const auto [i1, j1] = index(a.cwiseMax(b));
        for (long long i = i0; i <= i1; ++i)
            for (long long j = j0; j <= j1; ++j) cells[key(i, j)].push_back(id);
    }
    template <typename F>
    void visit_near(const Eigen::Vector2d& p, F&& fn) const {
        const auto [i, j] = index(p);
        for (long long di = -1; di <= 1; ++di)
            for (long long dj = -1; dj <= 1; ++dj) {
                auto it = cells.find(key(i + di, j + dj));
                if (it == cells.end()) continue;
                for (int id : it->second) fn(id);
            }
    }
};

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const Eigen::Vector2d ab = b - a;
    const double L2 = ab.squaredNorm();
    double t = L2 > 0 ? (p - a).dot(ab) / L2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

class CurveTracer {
public:
    CurveTracer(const Polynomial& f, double R, const TraceOptions& opt)
        : f_(f), R_(R), max_step_(opt.max_step > 0 ? opt.max_step : R / 500.0), max_turn_(opt.max_turn),
          hash_{std::max(max_step_, 1e-12), {}} {}

    Jet2 jet(const Eigen::Vector2d& p) const { return evaluate_jet(f_, Eigen::VectorXd(p)); }

    // Newton projection along the gradient.
    bool project(Eigen::Vector2d& p) const {
        for (int it = 0; it < 12; ++it) {
            const double v = f_(Eigen::VectorXd(p));
            const Eigen::Vector2d g = evaluate_gradient(f_, Eigen::VectorXd(p));
            const double g2 = g.squaredNorm();
            if (g2 < kRegularityFloor * kRegularityFloor) return false;
            if (std::abs(v) <= 1e-13 * (1.0 + std::sqrt(g2)) * (1.0 + p.norm())) return true;
            p -= v * g / g2;
        }
        const double v = f_(Eigen::VectorXd(p));
        const double gn = evaluate_gradient(f_, Eigen::VectorXd(p)).norm();
        return std::abs(v) <= 1e-9 * (1.0 + gn);
    }

    // Point of {f = 0, |x| = R} near p.
    Eigen::Vector2d boundary_point(Eigen::Vector2d p) const {
        for (int it = 0; it < 30; ++it) {
            const Jet2 j = jet(p);
            Eigen::Vector2d r(j.value, p.norm() - R_);
            Eigen::Matrix2d J;
            J.row(0) = j.gradient.transpose();
            J.row(1) = (p / p.norm()).transpose();
            if (r.cwiseAbs().maxCoeff() <= 1e-14 * (1 + R_) * (1 + j.gradient.norm())) break;
            const Eigen::Vector2d dp = J.colPivHouseholderQr().solve(-r);
            if (!dp.allFinite()) break;
            p += dp;
        }
        return p;
    }

    bool consumed(const Eigen::Vector2d& p) const {
        bool hit = false;
        hash_.visit_near(p, [&](int id) {
            if (hit) return;
            const auto& s = segments_[static_cast<std::size_t>(id)];
            if (point_segment_distance(p, points_[static_cast<std::size_t>(s.a)], points_[static_cast<std::size_t>(s.b)]) <= s.tol)
                hit = true;
        });
        return hit;
    }

    enum class End { Boundary, Closed };

    // Walks from p0 in direction sign; returns points after p0 and how it ended.
    End walk(const Eigen::Vector2d& p0, double sign, std::vector<Eigen::Vector2d>& out) const {
        Eigen::Vector2d x = p0;
        double travelled = 0.0;
        int steps = 0;
        const double h_floor = 1e-12 * (1.0 + R_);
        double h = max_step_;
        const int max_steps = 50'000'000;
        while (steps < max_steps) {
            const Jet2 j = jet(x);
            const double gn = j.gradient.norm();
            if (gn < kRegularityFloor) throw SingularLevel(j.point);
            const Eigen::Vector2d t = sign * Eigen::Vector2d(-j.gradient[1], j.gradient[0]) / gn;
            const double kappa = std::abs(t.dot(j.hessian * t)) / gn;
            h = std::min({max_step_, kappa > 0 ? max_turn_ / kappa : max_step_, 2.0 * h});
            // Closing a loop: the start lies just ahead.
            if (steps > 2) {
                const Eigen::Vector2d d = p0 - x;
                if (d.norm() <= 1.01 * h && d.dot(t) > 0) return End::Closed;
            }
            Eigen::Vector2d y;
            for (;;) {
                if (h < h_floor) throw SingularLevel(j.point);
                y = x + h * t;
                bool ok = project(y);
                if (ok) {
                    const Eigen::Vector2d gy = evaluate_gradient(f_, Eigen::VectorXd(y));
                    const Eigen::Vector2d ty = sign * Eigen::Vector2d(-gy[1], gy[0]) / gy.norm();
                    ok = ty.dot(t) > std::cos(10 * max_turn_ + 1e-3) && (y - x).norm() < 1.5 * h;
                }
                if (ok) break;
                h *= 0.5;
            }
            if (y.norm() > R_) {
                Eigen::Vector2d b = boundary_point(x + (y - x) * std::clamp((R_ - x.norm()) / ((y - x).norm() + 1e-300), 0.0, 1.0));
                if ((b - x).norm() > 2 * h || std::abs(b.norm() - R_) > 1e-9 * (1 + R_)) b = boundary_point(y);
                out.push_back(b);
                return End::Boundary;
            }
            out.push_back(y);
            travelled += (y - x).norm();
            x = y;
            ++steps;
        }
        throw std::runtime_error("curve tracing exceeded its step budget");
    }

    void trace_from(const Eigen::Vector2d& seed, LevelMesh& mesh) {
        if (consumed(seed)) return;
        std::vector<Eigen::Vector2d> fwd, bwd;
        const End ef = walk(seed, 1.0, fwd);
        std::vector<Eigen::Vector2d> pts;
        bool closed = false;
        if (ef == End::Closed) {
            pts.push_back(seed);
            pts.insert(pts.end(), fwd.begin(), fwd.end());
            closed = true;
        } else {
            walk(seed, -1.0, bwd);
            for (auto it = bwd.rbegin(); it != bwd.rend(); ++it) pts.push_back(*it);
            pts.push_back(seed);
            pts.insert(pts.end(), fwd.begin(), fwd.end());
            // Drop zero-length pieces produced when the seed sits on S_R.
            std::vector<Eigen::Vector2d> clean;
            for (const auto& p : pts)
                if (clean.empty() || (p - clean.back()).norm() > 1e-12 * (1 + R_)) clean.push_back(p);
            pts.swap(clean);
            if (pts.size() < 2) return;
        }
        const int comp = mesh.component_count++;
        mesh.closed.push_back(closed);
        const int base = static_cast<int>(mesh.vertices.size());
        std::vector<double> kappa(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            Jet2 j = jet(pts[i]);
            const double gn = j.gradient.norm();
            if (gn < kRegularityFloor) throw SingularLevel(j.point);
            const Eigen::Vector2d t(-j.gradient[1] / gn, j.gradient[0] / gn);
            kappa[i] = std::abs(t.dot(j.hessian * t)) / gn;
            mesh.vertices.push_back(std::move(j));
        }
        const std::size_t nseg = closed ? pts.size() : pts.size() - 1;
        for (std::size_t i = 0; i < nseg; ++i) {
            const std::size_t k = (i + 1) % pts.size();
            const double chord = (pts[k] - pts[i]).norm();
            const double kap = 0.5 * (kappa[i] + kappa[k]);
            mesh.elements.push_back({base + static_cast<int>(i), base + static_cast<int>(k), -1});
            mesh.measure.push_back(chord * (1.0 + kap * kap * chord * chord / 24.0));
            mesh.component.push_back(comp);
            const bool on_sphere = pts[i].norm() >= R_ * (1 - 1e-9) || pts[k].norm() >= R_ * (1 - 1e-9);
            mesh.boundary.push_back(on_sphere);
            // Register for seed consumption, with tolerance above the chord sagitta.
            const int a = static_cast<int>(points_.size());
            points_.push_back(pts[i]);
            points_.push_back(pts[k]);
            segments_.push_back({a, a + 1, 2.0 * kap * chord * chord / 8.0 + 1e-9 * (1 + R_)});
            hash_.insert(static_cast<int>(segments_.size()) - 1, pts[i], pts[k]);
        }
    }

    // Roots on grid edges with a sign change, inside the ball.
    std::vector<Eigen::Vector2d> grid_seeds(double half, int cells) const {
        std::vector<Eigen::Vector2d> seeds;
        const double h = 2 * half / cells;
        const Eigen::Vector2d off(0.3183098861837907 * h, 0.2718281828459045 * h);
        const int N = cells + 1;
        std::vector<double> val(static_cast<std::size_t>(N) * N);
        auto node = [&](int i, int j) -> Eigen::Vector2d { return Eigen::Vector2d(-half + i * h, -half + j * h) + off; };
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) val[static_cast<std::size_t>(i) * N + j] = f_(Eigen::VectorXd(node(i, j)));
        auto edge = [&](int i0, int j0, int i1, int j1) {
            const double a = val[static_cast<std::size_t>(i0) * N + j0], b = val[static_cast<std::size_t>(i1) * N + j1];
            if ((a >= 0) == (b >= 0)) return;
            Eigen::Vector2d pa = node(i0, j0), pb = node(i1, j1);
            if (std::min(pa.norm(), pb.norm()) > R_) return;
            const bool ppos = a >= 0;
            for (int it = 0; it < 60; ++it) {
                const Eigen::Vector2d pm = 0.5 * (pa + pb);
                if ((f_(Eigen::VectorXd(pm)) >= 0) == ppos) pa = pm; else pb = pm;
            }
            Eigen::Vector2d p = 0.5 * (pa + pb);
            if (!project(p)) return;
            if (p.norm() < R_) seeds.push_back(p);
        };
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                if (i + 1 < N) edge(i, j, i + 1, j);
                if (j + 1 < N) edge(i, j, i, j + 1);
            }
        return seeds;
    }

private:
    struct Segment {
        int a, b;
        double tol;
    };
    const Polynomial& f_;
    double R_;
    double max_step_;
    double max_turn_;
    SegmentHash hash_;
    std::vector<Eigen::Vector2d> points_;
    std::vector<Segment> segments_;
};

}  // namespace

LevelMesh trace_curve(const Polynomial& f, double R, const TraceOptions& opt) {
    if (f.arity() != 2) throw std::invalid_argument("trace_curve needs a polynomial in two variables");
    if (!(R > 0)) throw std::invalid_argument("radius must be positive");
    LevelMesh mesh;
    mesh.ambient = 2;
    mesh.dimension = 1;
    mesh.radius = R;
    if (f.is_zero()) throw std::invalid_argument("the zero polynomial has no regular level");
    if (f.degree() <= 0) return mesh;

    CurveTracer tracer(f, R, opt);
    std::vector<Eigen::Vector2d> seeds;
    for (double th : circle_roots(f, R).angles) seeds.emplace_back(R * std::cos(th), R * std::sin(th));
    for (auto& s : seeds) s = tracer.boundary_point(s);
    const int coarse = opt.coarse_grid > 0 ? opt.coarse_grid : 512;
    const auto cs = tracer.grid_seeds(R, coarse);
    seeds.insert(seeds.end(), cs.begin(), cs.end());
    const double r = std::min(R, 4.0);
    const auto fs = tracer.grid_seeds(r, opt.fine_grid);
    seeds.insert(seeds.end(), fs.begin(), fs.end());

    for (const auto& s : seeds) tracer.trace_from(s, mesh);
    if (mesh.elements.empty()) mesh.dimension = 0;
    return mesh;
}

// ---------------------------------------------------------------------------
// Surface meshing

namespace {

struct SurfaceBuilder {
    const Polynomial& f;
    LevelMesh& mesh;
    std::map<std::pair<long long, long long>, int> edge_vertex;

    int add_vertex(const Eigen::Vector3d& p) {
        Jet2 j = evaluate_jet(f, Eigen::VectorXd(p));
        if (j.gradient.norm() < kRegularityFloor) throw SingularLevel(j.point);
        mesh.vertices.push_back(std::move(j));
        return static_cast<int>(mesh.vertices.size()) - 1;
    }

    Eigen::Vector3d snap(Eigen::Vector3d p, double limit) const {
        const Eigen::Vector3d p0 = p;
        for (int it = 0; it < 20; ++it) {
            const double v = f(Eigen::VectorXd(p));
            const Eigen::Vector3d g = evaluate_gradient(f, Eigen::VectorXd(p));
            const double g2 = g.squaredNorm();
            if (g2 < kRegularityFloor * kRegularityFloor) break;
            if (std::abs(v) <= 1e-14 * (1 + std::sqrt(g2)) * (1 + p.norm())) break;
            p -= v * g / g2;
        }
        if ((p - p0).norm() > limit) return p0;
        return p;
    }

    // Point of {f = 0, |x| = R} near p by minimum-norm Gauss-Newton.
    Eigen::Vector3d sphere_snap(Eigen::Vector3d p, double radius) const {
        for (int it = 0; it < 30; ++it) {
            const Jet2 j = evaluate_jet(f, Eigen::VectorXd(p));
            Eigen::Vector2d r(j.value, p.norm() - radius);
            if (r.cwiseAbs().maxCoeff() <= 1e-14 * (1 + radius) * (1 + j.gradient.norm())) break;
            Eigen::Matrix<double, 2, 3> J;
            J.row(0) = j.gradient.transpose();
            J.row(1) = (p / p.norm()).transpose();
            const Eigen::Vector3d dp = J.completeOrthogonalDecomposition().solve(-r);
            if (!dp.allFinite()) break;
            p += dp;
        }
        return p;
    }
};

}  // namespace

LevelMesh mesh_surface(const Polynomial& f, double R, const SurfaceOptions& opt) {
    if (f.arity() != 3) throw std::invalid_argument("mesh_surface needs a polynomial in three variables");
    if (f.is_zero()) throw std::invalid_argument("the zero polynomial has no regular level");
    LevelMesh mesh;
    mesh.ambient = 3;
    mesh.dimension = 2;
    mesh.radius = R;
    if (f.degree() <= 0) {
        mesh.dimension = 0;
        return mesh;
    }
    const int N = std::max(opt.resolution, 4);
    const double r_in = opt.inner_radius;
    if (!(r_in >= 0.0 && r_in < R)) throw std::invalid_argument("inner radius must lie in [0, R)");
    const double half = R * (1.0 + 2.0 / N);
    const double h = 2 * half / N;
    const Eigen::Vector3d off(0.1415926535 * h * 0.01, 0.7182818284 * h * 0.01, 0.4142135623 * h * 0.01);
    const int M = N + 1;
    auto id = [&](int i, int j, int k) { return (static_cast<long long>(i) * M + j) * M + k; };
    auto node = [&](long long n) -> Eigen::Vector3d {
        const int k = static_cast<int>(n % M);
        const int j = static_cast<int>((n / M) % M);
        const int i = static_cast<int>(n / (static_cast<long long>(M) * M));
        return Eigen::Vector3d(-half + i * h, -half + j * h, -half + k * h) + off;
    };
    std::vector<double> val(static_cast<std::size_t>(M) * M * M);
    parallel_for(static_cast<std::size_t>(M), [&](std::size_t i) {
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < M; ++k) {
                const long long n = id(static_cast<int>(i), j, k);
                val[static_cast<std::size_t>(n)] = f(Eigen::VectorXd(node(n)));
            }
    });

    SurfaceBuilder sb{f, mesh, {}};
    auto edge_point = [&](long long a, long long b) {
        const auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = sb.edge_vertex.find(key);
        if (it != sb.edge_vertex.end()) return it->second;
        const double va = val[static_cast<std::size_t>(a)], vb = val[static_cast<std::size_t>(b)];
        const Eigen::Vector3d pa = node(a), pb = node(b);
        const double t = va / (va - vb);
        Eigen::Vector3d p = pa + t * (pb - pa);
        p = sb.snap(p, h);
        const int v = sb.add_vertex(p);
        sb.edge_vertex.emplace(key, v);
        return v;
    };

    std::vector<std::array<int, 3>> tris;
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                // Skip cubes entirely outside the ball.
                const Eigen::Vector3d centre = node(id(i, j, k)) + Eigen::Vector3d::Constant(0.5 * h);
                if (centre.norm() > R + h || centre.norm() < r_in - h) continue;
                bool pos = false, neg = false;
                for (int c = 0; c < 8; ++c) {
                    const double v = val[static_cast<std::size_t>(id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)))];
                    (v >= 0 ? pos : neg) = true;
                }
                if (!(pos && neg)) continue;
                for (const auto& pm : perms) {
                    std::array<int, 3> cur{i, j, k};
                    std::array<long long, 4> tv;
                    tv[0] = id(cur[0], cur[1], cur[2]);
                    for (int s = 0; s < 3; ++s) {
                        cur[static_cast<std::size_t>(pm[s])] += 1;
                        tv[static_cast<std::size_t>(s) + 1] = id(cur[0], cur[1], cur[2]);
                    }
                    std::vector<long long> in, out;
                    for (long long v : tv) (val[static_cast<std::size_t>(v)] < 0 ? in : out).push_back(v);
                    if (in.empty() || out.empty()) continue;
                    if (in.size() == 1 || out.size() == 1) {
                        const auto& lone = in.size() == 1 ? in : out;
                        const auto& rest = in.size() == 1 ? out : in;
                        tris.push_back({edge_point(lone[0], rest[0]), edge_point(lone[0], rest[1]),
                                        edge_point(lone[0], rest[2])});
                    } else {
                        const int a = edge_point(in[0], out[0]);
                        const int b = edge_point(in[0], out[1]);
                        const int c = edge_point(in[1], out[1]);
                        const int d = edge_point(in[1], out[0]);
                        tris.push_back({a, b, c});
                        tris.push_back({a, c, d});
                    }
                }
            }

    // Clip against |x| <= R, then against |x| >= inner radius.
    auto area = [&](int a, int b, int c) {
        const Eigen::Vector3d pa = mesh.vertices[static_cast<std::size_t>(a)].point;
        const Eigen::Vector3d pb = mesh.vertices[static_cast<std::size_t>(b)].point;
        const Eigen::Vector3d pc = mesh.vertices[static_cast<std::size_t>(c)].point;
        return 0.5 * (pb - pa).cross(pc - pa).norm();
    };
    auto clip_pass = [&](const std::vector<std::array<int, 3>>& in_tris, const std::vector<bool>& in_flags,
                         double radius, bool keep_inside, std::vector<std::array<int, 3>>& out_tris,
                         std::vector<bool>& out_flags) {
        std::map<std::pair<int, int>, int> cache;
        auto kept = [&](int v) {
            const double r = mesh.vertices[static_cast<std::size_t>(v)].point.norm();
            return keep_inside ? r <= radius : r >= radius;
        };
        auto clip_point = [&](int a, int b) {
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = cache.find(key);
            if (it != cache.end()) return it->second;
            Eigen::Vector3d pin = mesh.vertices[static_cast<std::size_t>(a)].point;
            Eigen::Vector3d pout = mesh.vertices[static_cast<std::size_t>(b)].point;
            if (!kept(a)) std::swap(pin, pout);
            for (int it2 = 0; it2 < 60; ++it2) {
                const Eigen::Vector3d m = 0.5 * (pin + pout);
                ((m.norm() <= radius) == keep_inside ? pin : pout) = m;
            }
            const int v = sb.add_vertex(sb.sphere_snap(0.5 * (pin + pout), radius));
            cache.emplace(key, v);
            return v;
        };
        for (std::size_t ti = 0; ti < in_tris.size(); ++ti) {
            const auto& t = in_tris[ti];
            const int nin = kept(t[0]) + kept(t[1]) + kept(t[2]);
            if (nin == 0) continue;
            if (nin == 3) {
                out_tris.push_back(t);
                out_flags.push_back(in_flags[ti]);
                continue;
            }
            // Rotate so that the vertex in the minority comes first.
            std::array<int, 3> r = t;
            for (int s = 0; s < 3; ++s) {
                const bool first_in = kept(r[0]);
                if ((nin == 1 && first_in) || (nin == 2 && !first_in)) break;
                std::rotate(r.begin(), r.begin() + 1, r.end());
            }
            const int p = clip_point(r[0], r[1]);
            const int q = clip_point(r[0], r[2]);
            if (nin == 1) {
                out_tris.push_back({r[0], p, q});
                out_flags.push_back(true);
            } else {
                out_tris.push_back({p, r[1], r[2]});
                out_tris.push_back({p, r[2], q});
                out_flags.push_back(true);
                out_flags.push_back(true);
            }
        }
    };
    {
        std::vector<std::array<int, 3>> outer;
        std::vector<bool> outer_flags;
        clip_pass(tris, std::vector<bool>(tris.size(), false), R, true, outer, outer_flags);
        if (r_in > 0) {
            clip_pass(outer, outer_flags, r_in, false, mesh.elements, mesh.boundary);
        } else {
            mesh.elements = std::move(outer);
            mesh.boundary = std::move(outer_flags);
        }
    }
    {
        // Drop vertices no element refers to.
        std::vector<int> remap(mesh.vertices.size(), -1);
        std::vector<Jet2> kept;
        for (auto& e : mesh.elements)
            for (int& v : e) {
                int& slot = remap[static_cast<std::size_t>(v)];
                if (slot < 0) {
                    slot = static_cast<int>(kept.size());
                    kept.push_back(mesh.vertices[static_cast<std::size_t>(v)]);
                }
                v = slot;
            }
        mesh.vertices = std::move(kept);
    }
    for (const auto& e : mesh.elements) mesh.measure.push_back(area(e[0], e[1], e[2]));

    // Components through shared vertices.
    std::vector<int> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        return x;
    };
    for (const auto& e : mesh.elements) {
        parent[static_cast<std::size_t>(find(e[1]))] = find(e[0]);
        parent[static_cast<std::size_t>(find(e[2]))] = find(e[0]);
    }
    std::map<int, int> comp_id;
    for (const auto& e : mesh.elements) {
        const int root = find(e[0]);
        auto it = comp_id.find(root);
        if (it == comp_id.end()) it = comp_id.emplace(root, static_cast<int>(comp_id.size())).first;
        mesh.component.push_back(it->second);
    }
    mesh.component_count = static_cast<int>(comp_id.size());
    if (mesh.elements.empty()) mesh.dimension = 0;
    return mesh;
}

LevelMesh mesh_level(const Polynomial& f, double R, int resolution_hint) {
    if (f.arity() == 2) {
        TraceOptions o;
        if (resolution_hint > 0) o.coarse_grid = resolution_hint;
        return trace_curve(f, R, o);
    }
    if (f.arity() == 3) {
        SurfaceOptions o;
        if (resolution_hint > 0) o.resolution = resolution_hint;
        return mesh_surface(f, R, o);
    }
    throw std::invalid_argument("level meshing supports curves in R^2 and surfaces in R^3");
}

// ---------------------------------------------------------------------------
// Volumes

VolumeEstimate sublevel_volume(const Polynomial& f, double R, long samples, std::uint64_t seed) {
    if (samples < 1000) throw std::invalid_argument("sublevel_volume needs at least 1000 samples");
    const int n = static_cast<int>(f.arity());
    const double ball = ball_volume(n) * std::pow(R, n);
    if (f.is_constant()) {
        const double c = f.is_zero() ? 0.0 : f.coefficient(Exponent(static_cast<std::size_t>(n), 0));
        return {c <= 0 ? ball : 0.0, 0.0};
    }
    const long chunk = 8192;
    const long chunks = (samples + chunk - 1) / chunk;
    std::vector<long> hits(static_cast<std::size_t>(chunks), 0);
    parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
        Rng rng = make_rng({seed, 0x701ULL, c});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const long begin = static_cast<long>(c) * chunk;
        const long end = std::min(samples, begin + chunk);
        long h = 0;
        for (long i = begin; i < end; ++i) {
            const Eigen::VectorXd dir = uniform_on_sphere(rng, n);
            const double r = R * std::pow(u(rng), 1.0 / n);
            if (f(Eigen::VectorXd(r * dir)) <= 0.0) ++h;
        }
        hits[c] = h;
    });
    const long total = std::accumulate(hits.begin(), hits.end(), 0L);
    const double p = static_cast<double>(total) / samples;
    return {ball * p, ball * std::sqrt(p * (1 - p) / samples)};
}

}  // namespace infinitas
