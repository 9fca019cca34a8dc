#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "infinitas/acv.hpp"
#include "infinitas/density.hpp"
#include "infinitas/family.hpp"
#include "infinitas/level_geometry.hpp"
#include "infinitas/rabier.hpp"
#include "infinitas/report.hpp"
#include "infinitas/topology.hpp"
#include "infinitas/verify.hpp"

using namespace infinitas;
using nlohmann::json;

namespace {

constexpr int kExitIdentityFail = 2;
constexpr int kExitNotStabilized = 3;
constexpr int kExitSpecError = 4;

struct Common {
    std::string spec_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool json = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_spec = true) {
    auto* opt = cmd->add_option("--spec", c.spec_path, "family specification file (YAML)");
    if (needs_spec) opt->required();
    cmd->add_option("--seed", c.seed, "base seed (overrides the --spec file)");
    cmd->add_option("--out", c.out_dir, "directory for CSV/SVG outputs");
    cmd->add_flag("--json", c.json, "print machine-readable JSON instead of text");
}

std::vector<double> split_numbers(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw SpecError("bad number '" + token + "' in " + what);
        }
    }
    if (out.empty()) throw SpecError(what + " is empty");
    return out;
}

std::vector<double> split_colon(const std::string& text, std::size_t count, const std::string& what) {
    std::string t = text;
    for (char& ch : t)
        if (ch == ':') ch = ',';
    const auto v = split_numbers(t, what);
    if (v.size() != count) throw SpecError(what + " must have the form " + (count == 3 ? "a:b:n" : "?"));
    return v;
}

RadiusSchedule parse_schedule(const std::string& text) {
    const auto v = split_colon(text, 3, "--schedule r0:factor:steps");
    RadiusSchedule s{v[0], v[1], static_cast<int>(v[2])};
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw SpecError(std::string("--schedule: ") + e.what());
    }
    return s;
}

std::vector<GridAxis> parse_grid(const std::string& text, int s) {
    std::vector<GridAxis> grid;
    std::istringstream in(text);
    std::string axis;
    while (std::getline(in, axis, ',')) {
        const auto v = split_colon(axis, 3, "--grid a:b:n");
        if (v[2] < 1) throw SpecError("--grid needs at least one node per axis");
        grid.push_back(GridAxis{v[0], v[1], static_cast<int>(v[2])});
    }
    if (static_cast<int>(grid.size()) != s) throw SpecError("--grid needs one a:b:n axis per parameter");
    return grid;
}

Eigen::VectorXd parse_point(const std::string& text, int size, const std::string& what) {
    const auto v = split_numbers(text, what);
    if (static_cast<int>(v.size()) != size)
        throw SpecError(what + " needs " + std::to_string(size) + " comma-separated values");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), size);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string token;
    while (std::getline(in, token, ','))
        if (!token.empty()) out.push_back(token);
    return out;
}

FamilySpec load(const Common& c) {
    FamilySpec spec = load_family_spec(c.spec_path);
    if (c.seed) spec.seed = *c.seed;
    return spec;
}

std::filesystem::path out_path(const Common& c, const std::string& name) {
    const std::filesystem::path dir = c.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(c.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    return dir / name;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string vec_text(const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
    return s;
}

// Non-finite numbers are not valid JSON; they become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Eigen::MatrixXd read_matrix(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        for (char& ch : line)
            if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
        std::istringstream ls(line);
        std::vector<double> row;
        std::string tok;
        while (ls >> tok) {
            if (tok[0] == '#') break;
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw SpecError("bad matrix entry '" + tok + "'");
            }
        }
        if (!row.empty()) rows.push_back(row);
    }
    if (rows.empty()) throw SpecError("empty matrix");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw SpecError("matrix rows have different lengths");
        for (std::size_t j = 0; j < rows[i].size(); ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return A;
}

SetKind cli_set_kind(const std::string& text) {
    try {
        return parse_set_kind(text);
    } catch (const std::invalid_argument& e) {
        throw SpecError(std::string("--set: ") + e.what());
    }
}

// ---- subcommands -----------------------------------------------------------

int run_rabier(const Common& c, const std::string& matrix_path) {
    Eigen::MatrixXd A;
    if (matrix_path.empty() || matrix_path == "-") {
        A = read_matrix(std::cin);
    } else {
        std::ifstream in(matrix_path);
        if (!in) throw SpecError("cannot open matrix file " + matrix_path);
        A = read_matrix(in);
    }
    const double nu = rabier_number(A);
    const RabierEquivalence eq = check_rabier_equivalences(A);
    if (c.json) {
        std::cout << json{{"rows", A.rows()},
                          {"cols", A.cols()},
                          {"nu", num(nu)},
                          {"infimum", num(eq.infimum)},
                          {"inner_radius", num(eq.inner_radius)},
                          {"singular_distance", num(eq.singular_distance)},
                          {"discrepancy", num(eq.discrepancy)}}
                         .dump(2)
                  << "\n";
    } else {
        std::cout << "matrix: " << A.rows() << " x " << A.cols() << "\n"
                  << "nu: " << format_number(nu) << "\n"
                  << "infimum |A^T phi|: " << format_number(eq.infimum) << "\n"
                  << "inner radius of A(B): " << format_number(eq.inner_radius) << "\n"
                  << "distance to rank-deficient maps: " << format_number(eq.singular_distance) << "\n"
                  << "largest discrepancy: " << format_number(eq.discrepancy) << "\n";
    }
    return 0;
}

int run_flow(const Common& c, const std::string& from, const std::string& to, const std::string& start) {
    const FamilySpec spec = load(c);
    if (spec.kind != FamilyKind::MapGraph) throw SpecError("flow needs a map-graph family");
    const Eigen::VectorXd x0 = parse_point(start, spec.n, "--start");
    const Eigen::VectorXd y = parse_point(to, spec.s, "--to");
    if (!from.empty()) {
        const Eigen::VectorXd cval = parse_point(from, spec.s, "--from");
        const double gap = (map_values(spec, x0) - cval).norm();
        if (gap > 1e-6) throw SpecError("--start does not lie on the fiber over --from (|G(x0) - c| = " + format_number(gap) + ")");
    }
    json out;
    try {
        const FlowResult r = transport_fiber(spec, x0, y);
        out = {{"status", "ok"},
               {"endpoint", vec_json(r.endpoint)},
               {"value_at_endpoint", vec_json(map_values(spec, r.endpoint))},
               {"max_identity_residual", num(r.max_identity_residual)},
               {"min_malgrange", num(r.min_malgrange)},
               {"accepted_steps", r.accepted_steps},
               {"rejected_steps", r.rejected_steps},
               {"corrections", r.corrections}};
        if (!c.json)
            std::cout << "status: ok\nendpoint: " << vec_text(r.endpoint)
                      << "\nmax identity residual: " << format_number(r.max_identity_residual)
                      << "\nmin M along path: " << format_number(r.min_malgrange) << "\naccepted steps: " << r.accepted_steps
                      << "\nrejected steps: " << r.rejected_steps << "\n";
    } catch (const FlowBlocked& e) {
        out = {{"status", "blocked"}, {"detail", e.what()}};
        if (!c.json) std::cout << "status: blocked\ndetail: " << e.what() << "\n";
        if (c.json) std::cout << out.dump(2) << "\n";
        return 1;
    }
    if (c.json) std::cout << out.dump(2) << "\n";
    return 0;
}

int run_acv(const Common& c, const std::string& grid_text, const std::string& schedule_text) {
    const FamilySpec spec = load(c);
    const auto grid = grid_text.empty() ? spec.grid : parse_grid(grid_text, spec.s);
    const RadiusSchedule schedule = schedule_text.empty() ? spec.schedule : parse_schedule(schedule_text);
    const AcvReport rep = estimate_K(spec, grid, schedule, spec.seed);

    if (!c.out_dir.empty()) {
        std::ostringstream csv;
        csv << "# infinitas-acv-csv v1\ny,R,inf_M,class\n";
        for (const auto& node : rep.nodes)
            for (const auto& e : node.profile.entries)
                csv << format_point(node.y) << ',' << format_number(e.radius) << ','
                    << (e.fiber_bounded ? std::string("null") : format_number(e.inf_m)) << ','
                    << to_string(node.classification.value_class) << '\n';
        write_text_file(out_path(c, "acv.csv"), csv.str());
    }
    json comps = json::array();
    for (const auto& k : rep.k) comps.push_back({{"lower", vec_json(k.lower)}, {"upper", vec_json(k.upper)}, {"source", k.source}});
    if (c.json) {
        json nodes = json::array();
        for (const auto& node : rep.nodes)
            nodes.push_back({{"y", vec_json(node.y)},
                             {"class", to_string(node.classification.value_class)},
                             {"slope", num(node.classification.slope)},
                             {"lower_bound", num(node.classification.lower_bound)},
                             {"error", node.error}});
        json k0 = json::array();
        for (const auto& p : rep.k0.points) k0.push_back({{"value", vec_json(p.value)}, {"witness", vec_json(p.x)}});
        std::cout << json{{"K", comps}, {"K0", k0}, {"nodes", nodes}, {"coverage_warning", rep.k0.coverage_warning}}.dump(2)
                  << "\n";
    } else {
        std::cout << "critical values (K0): " << rep.k0.points.size() << "\n";
        for (const auto& p : rep.k0.points) std::cout << "  " << vec_text(p.value) << "\n";
        std::cout << "K components: " << rep.k.size() << "\n";
        for (const auto& k : rep.k)
            std::cout << "  [" << vec_text(k.lower) << "] .. [" << vec_text(k.upper) << "] " << k.source << "\n";
        int suspects = 0;
        for (const auto& node : rep.nodes)
            if (node.classification.value_class == ValueClass::ACVSuspect) ++suspects;
        std::cout << "grid nodes: " << rep.nodes.size() << ", ACV-suspect: " << suspects << "\n";
    }
    return 0;
}

DensityTarget parse_target(const std::string& t, int& index) {
    const auto colon = t.find(':');
    const std::string name = t.substr(0, colon);
    index = -1;
    if (colon != std::string::npos) {
        try {
            index = std::stoi(t.substr(colon + 1));
        } catch (const std::exception&) {
            throw SpecError("bad target index in '" + t + "'");
        }
    }
    if (name == "kappa") return DensityTarget::Kappa;
    if (name == "sigma") return DensityTarget::Sigma;
    if (name == "theta") return DensityTarget::Theta;
    if (name == "lambda") return DensityTarget::Lambda;
    throw SpecError("unknown density target '" + t + "'");
}

int run_density(const Common& c, const std::string& at, const std::string& targets, const std::string& schedule_text,
                const std::string& set_text, const std::string& dump_mesh) {
    const FamilySpec spec = load(c);
    const Eigen::VectorXd y = parse_point(at, spec.s, "--at");
    const RadiusSchedule schedule = schedule_text.empty() ? spec.schedule : parse_schedule(schedule_text);
    const DefinableSet set = DefinableSet::from_spec(spec, y, cli_set_kind(set_text));
    std::vector<DensityRequest> req;
    for (const auto& t : split_list(targets)) {
        int index = -1;
        const DensityTarget target = parse_target(t, index);
        if (target == DensityTarget::Theta) index = set.ambient();
        if (index < 0) throw SpecError("target '" + t + "' needs an index");
        req.push_back({target, index});
    }
    if (req.empty()) throw SpecError("--targets is empty");
    const auto est = mesh_densities(set, req, schedule, density_options(spec));

    if (!dump_mesh.empty()) write_text_file(dump_mesh, mesh_level(set.f, schedule.final_radius()).to_obj());
    if (!c.out_dir.empty()) write_text_file(out_path(c, "density.csv"), density_csv(est));
    if (c.json) {
        json arr = json::array();
        for (const auto& e : est)
            arr.push_back({{"target", e.label()},
                           {"limit", num(e.limit)},
                           {"error", num(e.error)},
                           {"rule", e.rule},
                           {"status", e.status},
                           {"flags", e.flags}});
        std::cout << json{{"y", vec_json(y)}, {"set", to_string(set.kind)}, {"estimates", arr}}.dump(2) << "\n";
    } else {
        for (const auto& e : est) {
            std::cout << e.label() << ": " << format_number(e.limit) << " +- " << format_number(e.error) << " (" << e.status
                      << ", " << e.rule << ")\n";
            for (const auto& row : e.table)
                std::cout << "  R=" << format_number(row.radius) << "  raw=" << format_number(row.raw)
                          << "  normalized=" << format_number(row.normalized) << "\n";
            for (const auto& f : e.flags) std::cout << "  flag: " << f << "\n";
        }
    }
    return 0;
}

int run_links(const Common& c, const std::string& at, const std::string& set_text, const std::string& schedule_text) {
    const FamilySpec spec = load(c);
    const Eigen::VectorXd y = parse_point(at, spec.s, "--at");
    const RadiusSchedule schedule = schedule_text.empty() ? default_link_schedule() : parse_schedule(schedule_text);
    const DefinableSet set = DefinableSet::from_spec(spec, y, cli_set_kind(set_text));
    const LinkReport rep = stable_link(set, schedule);
    const auto radii = schedule.radii();

    std::ostringstream csv;
    csv << "# infinitas-links-csv v1\nR,chi,status\n";
    json rows = json::array();
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const bool ok = rep.errors[i].empty();
        const std::string status = ok ? "ok" : rep.errors[i];
        csv << format_number(ok ? rep.samples[i].radius : radii[i]) << ',' << (ok ? std::to_string(rep.samples[i].chi) : "null")
            << ',' << (ok ? "ok" : "tangency") << '\n';
        rows.push_back({{"R", num(ok ? rep.samples[i].radius : radii[i])},
                        {"chi", ok ? json(rep.samples[i].chi) : json(nullptr)},
                        {"status", status}});
    }
    if (!c.out_dir.empty()) write_text_file(out_path(c, "links.csv"), csv.str());
    if (c.json) {
        std::cout << json{{"y", vec_json(y)},
                          {"set", to_string(set.kind)},
                          {"stabilized", rep.stabilized},
                          {"chi", rep.stabilized ? json(rep.chi) : json(nullptr)},
                          {"stable_radius", rep.stabilized ? num(rep.stable_radius()) : json(nullptr)},
                          {"samples", rows}}
                         .dump(2)
                  << "\n";
    } else {
        for (const auto& r : rows)
            std::cout << "R=" << format_number(r["R"].get<double>()) << "  chi="
                      << (r["chi"].is_null() ? std::string("-") : std::to_string(r["chi"].get<int>())) << "  "
                      << r["status"].get<std::string>() << "\n";
        if (rep.stabilized)
            std::cout << "stable link chi: " << rep.chi << " from R=" << format_number(rep.stable_radius()) << "\n";
        else
            std::cout << "verdict: not stabilized\n";
    }
    return rep.stabilized ? 0 : kExitNotStabilized;
}

int run_chi(const Common& c, const std::string& at, const std::string& set_text, int l, std::optional<int> planes,
            const std::string& schedule_text) {
    const FamilySpec spec = load(c);
    const Eigen::VectorXd y = parse_point(at, spec.s, "--at");
    const RadiusSchedule schedule = schedule_text.empty() ? default_link_schedule() : parse_schedule(schedule_text);
    const DefinableSet set = DefinableSet::from_spec(spec, y, cli_set_kind(set_text));
    const int count = planes.value_or(spec.sampling.planes);
    const ChiEstimate est = chi_l_infty(set, l, count, spec.seed, schedule);

    std::ostringstream csv;
    csv << "# infinitas-chi-csv v1\nplane,chi,status\n";
    for (std::size_t i = 0; i < est.plane_chi.size(); ++i) {
        const double v = est.plane_chi[i];
        csv << i << ',' << (std::isfinite(v) ? format_number(v) : "null") << ',' << (std::isfinite(v) ? "ok" : "not-stabilized")
            << '\n';
    }
    if (!c.out_dir.empty()) write_text_file(out_path(c, "chi.csv"), csv.str());
    if (c.json) {
        std::cout << json{{"y", vec_json(y)},
                          {"set", to_string(set.kind)},
                          {"l", l},
                          {"value", num(est.value)},
                          {"std_error", num(est.std_error)},
                          {"exact", est.exact},
                          {"stabilized", est.stabilized},
                          {"planes", est.planes},
                          {"failed", est.failed},
                          {"resampled", est.resampled}}
                         .dump(2)
                  << "\n";
    } else {
        std::cout << "chi_" << l << " at infinity: " << format_number(est.value) << " +- " << format_number(est.std_error)
                  << (est.exact ? " (exact)" : "") << "\nplanes: " << est.planes << ", failed: " << est.failed
                  << ", resampled: " << est.resampled << "\n";
        if (!est.stabilized) std::cout << "verdict: not stabilized\n";
    }
    return est.stabilized ? 0 : kExitNotStabilized;
}

int run_gb_check(const Common& c, const std::string& at, const std::string& set_text, std::optional<int> planes,
                 const std::string& schedule_text) {
    const FamilySpec spec = load(c);
    const Eigen::VectorXd y = parse_point(at, spec.s, "--at");
    GbOptions o;
    o.density_schedule = schedule_text.empty() ? spec.schedule : parse_schedule(schedule_text);
    o.planes = planes.value_or(spec.sampling.planes);
    o.seed = spec.seed;
    o.density = density_options(spec);

    std::vector<std::pair<std::string, std::vector<IdentityResidual>>> groups;
    if (set_text != "fiber" && set_text != "sublevel" && set_text != "both")
        throw SpecError("--set must be fiber, sublevel or both");
    if (set_text == "fiber" || set_text == "both")
        groups.emplace_back("fiber", gb_identity_check(spec, y, SetKind::Fiber, o));
    if (set_text == "sublevel" || set_text == "both") {
        auto rs = gb_identity_check(spec, y, SetKind::Sublevel, o);
        const auto hyp = hypersurface_gb_check(spec, y, o);
        rs.insert(rs.end(), hyp.begin(), hyp.end());
        groups.emplace_back("sublevel", rs);
    }

    bool any_fail = false, any_inconclusive = false;
    std::string csv;
    json arr = json::array();
    for (const auto& [name, rs] : groups) {
        const std::string block = identity_csv(rs, name);
        csv += csv.empty() ? block : block.substr(block.find('\n', block.find('\n') + 1) + 1);
        for (const auto& r : rs) {
            any_fail |= r.verdict == "fail";
            any_inconclusive |= r.verdict == "inconclusive";
            arr.push_back({{"set", name},
                           {"id", r.id},
                           {"index", r.index},
                           {"left", num(r.left)},
                           {"right", num(r.right)},
                           {"error", num(r.error)},
                           {"verdict", r.verdict},
                           {"detail", r.detail}});
            if (!c.json)
                std::cout << name << "  " << r.label() << ": " << format_number(r.left) << " vs " << format_number(r.right)
                          << " (err " << format_number(r.error) << ") " << r.verdict
                          << (r.detail.empty() ? "" : " [" + r.detail + "]") << "\n";
        }
    }
    if (!c.out_dir.empty()) write_text_file(out_path(c, "identities.csv"), csv);
    if (c.json) std::cout << json{{"y", vec_json(y)}, {"identities", arr}}.dump(2) << "\n";
    if (any_fail) return kExitIdentityFail;
    if (any_inconclusive) return kExitNotStabilized;
    return 0;
}

int run_scan(const Common& c, const std::string& grid_text, const std::string& schedule_text, std::optional<int> planes,
             const std::string& quantities) {
    const FamilySpec spec = load(c);
    const auto grid = grid_text.empty() ? spec.grid : parse_grid(grid_text, spec.s);
    ScanOptions o = scan_options(spec);
    if (!schedule_text.empty()) o.density_schedule = parse_schedule(schedule_text);
    if (planes) o.planes = *planes;
    o.quantities = split_list(quantities);
    const ScanResult scan = continuity_scan(spec, grid, o);
    const auto files = emit_scan_outputs(scan, c.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(c.out_dir));

    if (c.json) {
        json jumps = json::array();
        for (const auto& j : scan.jumps)
            jumps.push_back({{"quantity", j.quantity},
                             {"lower", vec_json(j.lower)},
                             {"upper", vec_json(j.upper)},
                             {"left", num(j.left)},
                             {"right", num(j.right)},
                             {"threshold", num(j.threshold)},
                             {"contains_K", j.contains_k}});
        json k = json::array();
        for (const auto& kc : scan.k.k) k.push_back({{"lower", vec_json(kc.lower)}, {"upper", vec_json(kc.upper)}, {"source", kc.source}});
        json written = json::array();
        for (const auto& f : files) written.push_back(f.string());
        std::cout << json{{"nodes", scan.nodes.size()}, {"K", k}, {"jumps", jumps}, {"containment", scan.containment}, {"files", written}}
                         .dump(2)
                  << "\n";
    } else {
        std::cout << "nodes: " << scan.nodes.size() << "\nK components: " << scan.k.k.size() << "\n";
        for (const auto& kc : scan.k.k)
            std::cout << "  [" << vec_text(kc.lower) << "] .. [" << vec_text(kc.upper) << "] " << kc.source << "\n";
        std::cout << "jumps: " << scan.jumps.size() << "\n";
        for (const auto& j : scan.jumps)
            std::cout << "  " << j.quantity << " on [" << vec_text(j.lower) << ", " << vec_text(j.upper)
                      << "]: " << format_number(j.left) << " -> " << format_number(j.right)
                      << (j.contains_k ? "  (meets K)" : "  (outside K)") << "\n";
        std::cout << "containment: " << (scan.containment ? "yes" : "no") << "\n";
        for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"infinitas: curvature and topology at infinity of polynomial families"};
    app.require_subcommand(1);
    Common common;

    std::string matrix_path;
    auto* rabier = app.add_subcommand("rabier", "Rabier number of a matrix and its three characterisations");
    add_common(rabier, common, false);
    rabier->add_option("--matrix", matrix_path, "matrix file (rows of comma/space separated numbers); '-' reads stdin");

    std::string from, to, start;
    auto* flow = app.add_subcommand("flow", "transport a fiber point from c to y along the trivialising flow");
    add_common(flow, common);
    flow->add_option("--from", from, "source value c (comma-separated); checked against G(start)");
    flow->add_option("--to", to, "target value y (comma-separated)")->required();
    flow->add_option("--start", start, "starting point x0 on the fiber over c")->required();

    std::string grid_text, schedule_text;
    auto* acv = app.add_subcommand("acv", "estimate the generalized critical values K");
    add_common(acv, common);
    acv->add_option("--grid", grid_text, "parameter grid a:b:n (one axis per parameter, comma-separated)");
    acv->add_option("--schedule", schedule_text, "radius schedule r0:factor:steps");

    std::string at, targets = "kappa:0,sigma:1,theta,lambda:0", set_text = "fiber", dump_mesh;
    auto* density = app.add_subcommand("density", "curvature densities at infinity of one fiber");
    add_common(density, common);
    density->add_option("--at", at, "parameter value y")->required();
    density->add_option("--targets", targets, "comma-separated targets: kappa:i, sigma:i, theta, lambda:k");
    density->add_option("--set", set_text, "fiber or sublevel (Lambda targets)");
    density->add_option("--schedule", schedule_text, "radius schedule r0:factor:steps");
    density->add_option("--dump-mesh", dump_mesh, "write the mesh at the final radius as OBJ-style text");

    auto* links = app.add_subcommand("links", "Euler characteristic of links on growing spheres");
    add_common(links, common);
    links->add_option("--at", at, "parameter value y")->required();
    links->add_option("--set", set_text, "fiber or sublevel");
    links->add_option("--schedule", schedule_text, "radius schedule r0:factor:steps");

    int l = 1;
    std::optional<int> planes;
    auto* chi = app.add_subcommand("chi", "Grassmannian average chi_l at infinity");
    add_common(chi, common);
    chi->add_option("--at", at, "parameter value y")->required();
    chi->add_option("--set", set_text, "fiber or sublevel");
    chi->add_option("--l", l, "plane dimension")->required();
    chi->add_option("--planes", planes, "number of sampled planes");
    chi->add_option("--schedule", schedule_text, "link radius schedule r0:factor:steps");

    std::string gb_set = "both";
    auto* gb = app.add_subcommand("gb-check", "Gauss-Bonnet identities at infinity");
    add_common(gb, common);
    gb->add_option("--at", at, "parameter value y")->required();
    gb->add_option("--set", gb_set, "fiber, sublevel or both");
    gb->add_option("--planes", planes, "planes per chi_l estimate");
    gb->add_option("--schedule", schedule_text, "density radius schedule r0:factor:steps");

    std::string quantities;
    auto* scan = app.add_subcommand("scan", "parameter-continuity scan with jump detection");
    add_common(scan, common);
    scan->add_option("--grid", grid_text, "parameter grid a:b:n (overrides the --spec file)");
    scan->add_option("--schedule", schedule_text, "density radius schedule r0:factor:steps");
    scan->add_option("--planes", planes, "planes per chi_l estimate");
    scan->add_option("--quantities", quantities, "comma-separated subset, e.g. chi:2,sigma:1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitSpecError;
    }

    try {
        if (*rabier) return run_rabier(common, matrix_path);
        if (*flow) return run_flow(common, from, to, start);
        if (*acv) return run_acv(common, grid_text, schedule_text);
        if (*density) return run_density(common, at, targets, schedule_text, set_text, dump_mesh);
        if (*links) return run_links(common, at, set_text, schedule_text);
        if (*chi) return run_chi(common, at, set_text, l, planes, schedule_text);
        if (*gb) return run_gb_check(common, at, gb_set, planes, schedule_text);
        if (*scan) return run_scan(common, grid_text, schedule_text, planes, quantities);
    } catch (const SpecError& e) {
        std::cerr << "spec error: " << e.what() << "\n";
        return kExitSpecError;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitSpecError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
