#include "infinitas/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace infinitas {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_point(const Eigen::VectorXd& y) {
    std::string out;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        if (j) out += ';';
        out += format_number(y[j]);
    }
    return out;
}

namespace {

// Quotes a CSV field when it holds a separator, quote or newline.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Fixed two-decimal coordinates keep the SVG byte-stable.
std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string scan_csv(const ScanResult& scan) {
    std::ostringstream os;
    os << "# " << kScanCsvSchema << "\n";
    os << "y,quantity,component,value,error,status\n";
    for (const auto& node : scan.nodes)
        for (const auto& e : node.entries) {
            os << format_point(node.y) << ',' << csv_field(e.quantity) << ',' << csv_field(e.component) << ','
               << (e.value ? format_number(*e.value) : "null") << ',' << (e.value ? format_number(e.error) : "null") << ','
               << e.status << '\n';
        }
    return os.str();
}

std::string scan_svg(const ScanResult& scan, const std::string& quantity) {
    const double W = 640, H = 400, left = 70, right = 20, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;

    double xmin = 0, xmax = 1;
    if (!scan.grid.empty()) {
        xmin = scan.grid[0].min;
        xmax = scan.grid[0].max;
    }
    if (!(xmax > xmin)) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    for (const auto& node : scan.nodes)
        if (const InvariantEntry* e = node.find(quantity); e && e->value && std::isfinite(*e->value)) {
            vmin = std::min(vmin, *e->value);
            vmax = std::max(vmax, *e->value);
        }
    if (!std::isfinite(vmin)) {
        vmin = 0;
        vmax = 1;
    }
    if (vmax - vmin < 1e-9) {
        vmin -= 1;
        vmax += 1;
    } else {
        const double pad = 0.08 * (vmax - vmin);
        vmin -= pad;
        vmax += pad;
    }
    auto X = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto Y = [&](double v) { return top + (vmax - v) / (vmax - vmin) * ph; };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\">\n";
    os << "<!-- " << kScanSvgSchema << " -->\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << coord(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
       << xml_escape(quantity) << "</text>\n";

    for (const auto& j : scan.jumps) {
        if (j.quantity != quantity) continue;
        const double a = X(j.lower[0]), b = X(j.upper[0]);
        os << "<rect class=\"jump\" x=\"" << coord(a) << "\" y=\"" << coord(top) << "\" width=\"" << coord(std::max(b - a, 1.0))
           << "\" height=\"" << coord(ph) << "\" fill=\"#f4c7c3\"/>\n";
    }
    for (const auto& kc : scan.k.k) {
        if (kc.lower.size() == 0) continue;
        const double a = X(std::clamp(kc.lower[0], xmin, xmax)), b = X(std::clamp(kc.upper[0], xmin, xmax));
        if (b - a > 1.0)
            os << "<rect class=\"k\" x=\"" << coord(a) << "\" y=\"" << coord(top) << "\" width=\"" << coord(b - a)
               << "\" height=\"" << coord(ph) << "\" fill=\"#c9daf8\" fill-opacity=\"0.5\"/>\n";
        os << "<line class=\"k\" x1=\"" << coord(a) << "\" y1=\"" << coord(top) << "\" x2=\"" << coord(a) << "\" y2=\""
           << coord(top + ph) << "\" stroke=\"#3c78d8\" stroke-dasharray=\"6,4\"/>\n";
    }

    os << "<rect x=\"" << coord(left) << "\" y=\"" << coord(top) << "\" width=\"" << coord(pw) << "\" height=\"" << coord(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    const auto tick = [&](double x, double y, const char* anchor, const std::string& text) {
        os << "<text x=\"" << coord(x) << "\" y=\"" << coord(y) << "\" text-anchor=\"" << anchor
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(text) << "</text>\n";
    };
    tick(left, top + ph + 18, "middle", format_number(xmin));
    tick(left + pw, top + ph + 18, "middle", format_number(xmax));
    tick(left - 6, top + ph, "end", format_number(vmin));
    tick(left - 6, top + 10, "end", format_number(vmax));
    tick(left + pw / 2, H - 12, "middle", "y1");

    // One polyline per value of the second axis, broken at missing values.
    const int n1 = scan.grid.size() == 2 ? scan.grid[1].steps : 1;
    const int n0 = scan.nodes.empty() ? 0 : static_cast<int>(scan.nodes.size()) / n1;
    for (int i1 = 0; i1 < n1; ++i1) {
        std::vector<std::string> run;
        auto flush = [&] {
            if (run.size() >= 2) {
                os << "<polyline fill=\"none\" stroke=\"#cc0000\" stroke-width=\"1.5\" points=\"";
                for (std::size_t k = 0; k < run.size(); ++k) os << (k ? " " : "") << run[k];
                os << "\"/>\n";
            }
            run.clear();
        };
        for (int i0 = 0; i0 < n0; ++i0) {
            const auto& node = scan.nodes[static_cast<std::size_t>(i0 * n1 + i1)];
            const InvariantEntry* e = node.find(quantity);
            if (!e || !e->value || !std::isfinite(*e->value)) {
                flush();
                continue;
            }
            run.push_back(coord(X(node.y[0])) + "," + coord(Y(*e->value)));
        }
        flush();
        for (int i0 = 0; i0 < n0; ++i0) {
            const auto& node = scan.nodes[static_cast<std::size_t>(i0 * n1 + i1)];
            const InvariantEntry* e = node.find(quantity);
            if (!e || !e->value || !std::isfinite(*e->value)) continue;
            os << "<circle cx=\"" << coord(X(node.y[0])) << "\" cy=\"" << coord(Y(*e->value)) << "\" r=\"2.5\" "
               << (node.near_k ? "fill=\"white\" stroke=\"#cc0000\"" : "fill=\"#cc0000\"") << "/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string identity_csv(const std::vector<IdentityResidual>& residuals, const std::string& context) {
    std::ostringstream os;
    os << "# " << kIdentityCsvSchema << "\n";
    os << "set,id,index,left,right,error,verdict,detail\n";
    for (const auto& r : residuals)
        os << csv_field(context) << ',' << csv_field(r.id) << ',' << r.index << ',' << format_number(r.left) << ','
           << format_number(r.right) << ',' << format_number(r.error) << ',' << r.verdict << ',' << csv_field(r.detail)
           << '\n';
    return os.str();
}

std::string density_csv(const std::vector<DensityEstimate>& estimates) {
    std::ostringstream os;
    os << "# " << kDensityCsvSchema << "\n";
    os << "quantity,radius,raw,normalized,limit,error,status\n";
    for (const auto& est : estimates)
        for (const auto& row : est.table)
            os << csv_field(est.label()) << ',' << format_number(row.radius) << ',' << format_number(row.raw) << ','
               << format_number(row.normalized) << ',' << format_number(est.limit) << ',' << format_number(est.error)
               << ',' << est.status << '\n';
    return os.str();
}

std::string svg_file_name(const std::string& quantity) {
    std::string name = "scan_";
    for (char c : quantity) name += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return name + ".svg";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::filesystem::path> emit_scan_outputs(const ScanResult& scan, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    written.push_back(dir / "scan.csv");
    write_text_file(written.back(), scan_csv(scan));
    for (const auto& q : scan.quantities) {
        written.push_back(dir / svg_file_name(q));
        write_text_file(written.back(), scan_svg(scan, q));
    }
    return written;
}

}  // namespace infinitas
