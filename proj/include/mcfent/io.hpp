#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "mcfent/bell_metrics.hpp"
#include "mcfent/measurement.hpp"
#include "mcfent/qstate.hpp"

namespace mcfent {

using json = nlohmann::ordered_json;

// {"kind": "density_matrix", "dim": d, "re": [[...]], "im": [[...]], "tolerance": {...}}
json density_to_json(const DensityMatrix& rho);
DensityMatrix density_from_json(const json& j);

// Same layout; re/im hold the d x d coefficient matrix C(i, j) of |i>|j>.
json pure_state_to_json(const PureState& psi);
PureState pure_state_from_json(const json& j);

json cglmp_to_json(const CGLMPContext& ctx);

/// Flat table: '#'-prefixed key=value header lines, then
/// `setting_1,setting_2,counts` rows.
void write_counts_csv(std::ostream& out, const CountsRecord& counts);
CountsRecord read_counts_csv(std::istream& in);

/// Binary portable graymap (P5, maxval 255).
void write_pgm(std::ostream& out, const PhaseImage& image);

/// Shortest round-trip decimal form.
std::string format_number(double value);

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mcfent
