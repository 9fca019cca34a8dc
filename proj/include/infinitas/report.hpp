#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "infinitas/density.hpp"
#include "infinitas/verify.hpp"

namespace infinitas {

inline constexpr const char* kScanCsvSchema = "infinitas-scan-csv v1";
inline constexpr const char* kIdentityCsvSchema = "infinitas-identity-csv v1";
inline constexpr const char* kDensityCsvSchema = "infinitas-density-csv v1";
inline constexpr const char* kScanSvgSchema = "infinitas-scan-svg v1";

/// "%.12g", or "%.17g" when twelve digits do not reproduce the value; "nan",
/// "inf" and "-inf" for non-finite values.
std::string format_number(double v);

/// Parameter point as a single CSV field: coordinates joined by ';'.
std::string format_point(const Eigen::VectorXd& y);

/// "# infinitas-scan-csv v1" then "y,quantity,component,value,error,status".
/// One row per node and quantity; missing values are written as "null".
/// Two-parameter nodes write y as "y1;y2".
std::string scan_csv(const ScanResult& scan);

/// Self-contained SVG line plot of one quantity over the first grid axis:
/// jump cells shaded, estimate_K components as vertical markers, near-K nodes
/// drawn hollow. An empty scan gives an empty plot frame.
std::string scan_svg(const ScanResult& scan, const std::string& quantity);

/// "id,index,left,right,error,verdict,detail"; `context` fills a leading column.
std::string identity_csv(const std::vector<IdentityResidual>& residuals, const std::string& context = "");

/// One row per radius and estimate: "quantity,radius,raw,normalized,limit,error,status".
std::string density_csv(const std::vector<DensityEstimate>& estimates);

/// File name of the plot of one quantity: "scan_chi_2.svg".
std::string svg_file_name(const std::string& quantity);

/// Writes text to a file; throws std::runtime_error naming the path on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// scan.csv and one SVG per quantity in `dir` (created when missing). Returns
/// the written paths in order.
std::vector<std::filesystem::path> emit_scan_outputs(const ScanResult& scan, const std::filesystem::path& dir);

}  // namespace infinitas
