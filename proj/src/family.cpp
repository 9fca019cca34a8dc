#include "infinitas/family.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace infinitas {

std::string to_string(FamilyKind kind) {
    return kind == FamilyKind::MapGraph ? "map-graph" : "hypersurface-family";
}

void RadiusSchedule::validate() const {
    if (!(r0 > 0.0)) throw std::invalid_argument("schedule r0 must be positive");
    if (!(factor > 1.0)) throw std::invalid_argument("schedule factor must exceed 1");
    if (steps < 3) throw std::invalid_argument("schedule needs at least 3 radii");
    if (!(final_radius() <= 1e9)) throw std::invalid_argument("schedule final radius exceeds 1e9");
}

std::vector<double> RadiusSchedule::radii() const {
    std::vector<double> r;
    r.reserve(static_cast<std::size_t>(std::max(steps, 0)));
    double v = r0;
    for (int i = 0; i < steps; ++i, v *= factor) r.push_back(v);
    return r;
}

double RadiusSchedule::final_radius() const { return r0 * std::pow(factor, steps - 1); }

double GridAxis::node(int i) const {
    if (steps <= 1) return min;
    return min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

FamilySpec FamilySpec::map_graph(const std::vector<std::string>& exprs, int n) {
    FamilySpec spec;
    spec.kind = FamilyKind::MapGraph;
    spec.n = n;
    spec.s = static_cast<int>(exprs.size());
    const auto xs = numbered_variables("x", static_cast<std::size_t>(n));
    for (const auto& e : exprs) spec.polys.push_back(parse_polynomial(e, xs));
    spec.grid.assign(static_cast<std::size_t>(spec.s), GridAxis{});
    spec.validate();
    return spec;
}

FamilySpec FamilySpec::hypersurface(const std::string& expr, int n, int s) {
    FamilySpec spec;
    spec.kind = FamilyKind::HypersurfaceFamily;
    spec.n = n;
    spec.s = s;
    auto vars = numbered_variables("x", static_cast<std::size_t>(n));
    for (const auto& y : numbered_variables("y", static_cast<std::size_t>(s))) vars.push_back(y);
    spec.polys.push_back(parse_polynomial(expr, vars));
    spec.grid.assign(static_cast<std::size_t>(s), GridAxis{});
    spec.validate();
    return spec;
}

int FamilySpec::total_dimension() const { return kind == FamilyKind::MapGraph ? n : n + s - 1; }

void FamilySpec::validate() const {
    if (n < 1 || s < 1) throw SpecError("family.n and family.s must be positive");
    if (kind == FamilyKind::MapGraph) {
        if (static_cast<int>(polys.size()) != s)
            throw SpecError("map-graph family needs exactly s polynomials");
        for (const auto& p : polys)
            if (static_cast<int>(p.arity()) != n) throw SpecError("map-graph polynomial must be in x1..xn");
    } else {
        if (polys.size() != 1) throw SpecError("hypersurface family needs exactly one polynomial");
        if (static_cast<int>(polys[0].arity()) != n + s)
            throw SpecError("hypersurface polynomial must be in x1..xn, y1..ys");
    }
    if (total_dimension() < s) throw SpecError("dim W must be at least s");
    if (!grid.empty() && static_cast<int>(grid.size()) != s)
        throw SpecError("scan.grid needs one axis per parameter");
    for (const auto& a : grid)
        if (a.steps < 1 || !(a.max >= a.min)) throw SpecError("scan.grid axis needs min <= max and steps >= 1");
    try {
        schedule.validate();
    } catch (const std::invalid_argument& e) {
        throw SpecError(e.what());
    }
    if (sampling.planes < 0 || sampling.mesh_level < 1) throw SpecError("sampling values out of range");
}

Polynomial FamilySpec::fiber_polynomial(const Eigen::VectorXd& y) const {
    if (y.size() != s) throw std::invalid_argument("parameter value has wrong dimension");
    const auto xs = numbered_variables("x", static_cast<std::size_t>(n));
    if (kind == FamilyKind::MapGraph) {
        if (s != 1) throw std::invalid_argument("fibers of map-graph families with s > 1 are not hypersurfaces");
        Polynomial f = polys[0];
        f.add_term(Exponent(static_cast<std::size_t>(n), 0), -y[0]);
        return f;
    }
    Polynomial f(xs);
    for (const auto& [e, c] : polys[0].terms()) {
        double coef = c;
        for (int j = 0; j < s; ++j)
            for (int k = 0; k < e[static_cast<std::size_t>(n + j)]; ++k) coef *= y[j];
        f.add_term(Exponent(e.begin(), e.begin() + n), coef);
    }
    return f;
}

Polynomial FamilySpec::fiber_polynomial(double y) const {
    Eigen::VectorXd v(1);
    v[0] = y;
    return fiber_polynomial(v);
}

namespace {

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
    if (!node.IsMap()) throw SpecError(where + " must be a table");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw SpecError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T read(const YAML::Node& node, const std::string& what) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw SpecError("bad value for " + what);
    }
}

GridAxis read_axis(const YAML::Node& node, const std::string& where) {
    check_keys(node, where, {"min", "max", "steps"});
    GridAxis a;
    if (!node["min"] || !node["max"] || !node["steps"]) throw SpecError(where + " needs min, max and steps");
    a.min = read<double>(node["min"], where + ".min");
    a.max = read<double>(node["max"], where + ".max");
    a.steps = read<int>(node["steps"], where + ".steps");
    return a;
}

}  // namespace

FamilySpec parse_family_spec(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw SpecError(std::string("malformed spec file: ") + e.what());
    }
    check_keys(root, "document", {"family", "hints", "scan", "schedule", "sampling", "seed"});
    const YAML::Node fam = root["family"];
    if (!fam) throw SpecError("missing family table");
    check_keys(fam, "family", {"kind", "n", "s", "expr"});
    if (!fam["kind"] || !fam["n"] || !fam["s"] || !fam["expr"])
        throw SpecError("family needs kind, n, s and expr");

    FamilySpec spec;
    const auto kind = read<std::string>(fam["kind"], "family.kind");
    if (kind == "map-graph") {
        spec.kind = FamilyKind::MapGraph;
    } else if (kind == "hypersurface-family") {
        spec.kind = FamilyKind::HypersurfaceFamily;
    } else {
        throw SpecError("family.kind must be map-graph or hypersurface-family");
    }
    spec.n = read<int>(fam["n"], "family.n");
    spec.s = read<int>(fam["s"], "family.s");
    if (spec.n < 1 || spec.s < 1 || spec.n > 16 || spec.s > 16) throw SpecError("family.n/s out of range");

    std::vector<std::string> exprs;
    if (fam["expr"].IsSequence()) {
        for (const auto& e : fam["expr"]) exprs.push_back(read<std::string>(e, "family.expr"));
    } else {
        exprs.push_back(read<std::string>(fam["expr"], "family.expr"));
    }
    auto vars = numbered_variables("x", static_cast<std::size_t>(spec.n));
    if (spec.kind == FamilyKind::HypersurfaceFamily)
        for (const auto& y : numbered_variables("y", static_cast<std::size_t>(spec.s))) vars.push_back(y);
    for (const auto& e : exprs) {
        try {
            spec.polys.push_back(parse_polynomial(e, vars));
        } catch (const ParseError& pe) {
            throw SpecError(std::string("family.expr: ") + pe.what());
        }
    }

    if (const YAML::Node hints = root["hints"]) {
        check_keys(hints, "hints", {"chi"});
        if (const YAML::Node chi = hints["chi"]) {
            if (!chi.IsMap()) throw SpecError("hints.chi must be a table");
            for (const auto& kv : chi)
                spec.chi_hints[kv.first.as<std::string>()] = read<int>(kv.second, "hints.chi");
        }
    }

    spec.grid.assign(static_cast<std::size_t>(spec.s), GridAxis{});
    if (const YAML::Node scan = root["scan"]) {
        check_keys(scan, "scan", {"grid"});
        if (const YAML::Node grid = scan["grid"]) {
            if (grid.IsMap()) {
                if (spec.s != 1) throw SpecError("scan.grid must list one axis per parameter");
                spec.grid[0] = read_axis(grid, "scan.grid");
            } else if (grid.IsSequence()) {
                if (static_cast<int>(grid.size()) != spec.s) throw SpecError("scan.grid must list one axis per parameter");
                for (std::size_t i = 0; i < grid.size(); ++i)
                    spec.grid[i] = read_axis(grid[i], "scan.grid[" + std::to_string(i) + "]");
            } else {
                throw SpecError("scan.grid must be a table or a list of tables");
            }
        }
    }

    if (const YAML::Node sched = root["schedule"]) {
        check_keys(sched, "schedule", {"r0", "factor", "steps"});
        if (sched["r0"]) spec.schedule.r0 = read<double>(sched["r0"], "schedule.r0");
        if (sched["factor"]) spec.schedule.factor = read<double>(sched["factor"], "schedule.factor");
        if (sched["steps"]) spec.schedule.steps = read<int>(sched["steps"], "schedule.steps");
    }
    if (const YAML::Node samp = root["sampling"]) {
        check_keys(samp, "sampling", {"planes", "mesh_level"});
        if (samp["planes"]) spec.sampling.planes = read<int>(samp["planes"], "sampling.planes");
        if (samp["mesh_level"]) spec.sampling.mesh_level = read<int>(samp["mesh_level"], "sampling.mesh_level");
    }
    if (const YAML::Node seed = root["seed"]) spec.seed = read<std::uint64_t>(seed, "seed");

    spec.validate();
    return spec;
}

FamilySpec load_family_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open spec file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_family_spec(buf.str());
}

}  // namespace infinitas
