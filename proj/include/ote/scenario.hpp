// scenario.hpp - Scenario configuration, geometries, single points, sweeps and CSV output
//
// Scenarios are JSON documents whose keys carry their units (radius_um, temperature_K,
// frequency_rad_s, ...). Internally everything is SI.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ote/alpha_kernel.hpp"
#include "ote/entanglement.hpp"
#include "ote/master.hpp"
#include "ote/steady_state.hpp"

namespace ote {

enum class GeometryKind { polygon, triangle_path };

struct Geometry {
    GeometryKind kind{GeometryKind::polygon};
    std::size_t qubits{3};      // polygon
    double radius{1e-6};        // polygon circumradius, m
    double x_over_r{0.0};       // polygon: radial-outward displacement of the last vertex
    double d13{2e-6};           // triangle_path: distance of the fixed outer qubits, m
    double l_over_d13{1.0};     // triangle_path: l / d13 in [0.5, inf)
    double height{8e-6};        // common distance from the slab, m
};

enum class SweepAxis { l_over_d13, radius, x_over_r, qubits, wall_temperature };

std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& name); // throws ConfigError

struct SweepSpec {
    SweepAxis axis{SweepAxis::l_over_d13};
    // Either explicit values or (start, stop, points, log spacing). Values are in the
    // units of the axis name: radius in um, wall temperature in K, the rest dimensionless.
    std::vector<double> values;
    double start{0.0};
    double stop{0.0};
    std::size_t points{0};
    bool log_spacing{false};

    // Ascending grid. Throws DomainError for an empty or unordered range.
    std::vector<double> grid() const;
};

// full: every measure row. summary: per-point maxima of the pair negativity and of the
// bipartition negativity for each |A| (plus N_123 for three qubits). maxima: one row
// each for the largest pair, largest bipartition and overall largest negativity.
enum class ReportLevel { full, summary, maxima };

struct Scenario {
    std::string name{"scenario"};
    Geometry geometry;
    Eigen::Vector3d dipole{0.0, 0.0, 1.0};  // unit orientation, shared by all emitters
    double dipole_moment{1e-29};            // C m
    double omega{0.05e14};                  // renormalised transition frequency, rad/s
    double wall_temperature{5.0};           // K
    SlabSpec slab{0.01e-6, PermittivityModel::sapphire(), 300.0};
    QuadratureSpec quadrature;
    LambdaOptions lambda;
    SteadyOptions solver;
    MeasureOptions measures;
    ReportLevel report{ReportLevel::full};
    bool rotating_frame{true};              // drop omega0 from H_eff
    bool spectrum{false};                   // attach the collective-spectrum report
    std::optional<SweepSpec> sweep;
    std::string output;                     // CSV path, may be empty

    // Throws ConfigError on any violated invariant.
    void validate() const;
};

// Parses and validates. Unknown keys are rejected. Throws ConfigError.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

// Regular polygon of N vertices on a circle of radius r centred on the origin at height
// z, vertex k at angle 2 pi k / N. The last vertex is moved radially outward by x.
std::vector<Eigen::Vector3d> polygon_geometry(std::size_t qubits, double radius, double height,
                                              double displacement = 0.0);

// Qubits 1 and 3 at (-d/2, 0) and (d/2, 0); qubit 2 on the perpendicular bisector at
// distance l from both. l = d/2 is the aligned configuration, l = d the equilateral one.
std::vector<Eigen::Vector3d> triangle_path(double d13, double l_over_d13, double height);

EmitterArray build_emitters(const Scenario& s);

// Scenario with the sweep axis set to `value` (axis units as in SweepSpec).
Scenario at_sweep_value(const Scenario& s, SweepAxis axis, double value);

struct SpectrumRow {
    std::size_t sector{0};
    std::size_t index{0};
    cplx omega{0.0};          // eigenvalue of H_eff, rad/s
    double decay_constant{0.0};
    double population{0.0};
};

struct PointResult {
    RateSet rates;
    SteadyResult steady;
    MeasureReport measures;
    std::vector<MeasureRow> rows;             // as reported (full or summary)
    std::vector<SpectrumRow> spectrum;        // when requested
    std::vector<std::string> notices;
};

// Rows reported for a point: the full measure suite, or per-point maxima only.
std::vector<MeasureRow> report_rows(const MeasureReport& report, ReportLevel level);

PointResult run_point(const Scenario& s, AlphaCache* cache = nullptr);

struct SweepRow {
    std::size_t point{0};
    double sweep_value{0.0};
    std::string kind;
    std::string label;
    double value{0.0};
    std::string status;       // ok | failed
    std::string method;
    double residual{0.0};
    std::size_t iterations{0};
    std::string message;

    bool operator==(const SweepRow& o) const; // NaN compares equal to NaN
};

struct SweepResult {
    SweepAxis axis{SweepAxis::l_over_d13};
    std::vector<SweepRow> rows;
    std::size_t points{0};
    std::size_t failed_points{0};
    std::vector<std::string> notices;

    bool operator==(const SweepResult& o) const { return axis == o.axis && rows == o.rows; }
};

// Runs every grid point on `jobs` worker threads. A failed point becomes a single
// 'failed' row and the sweep continues; throws SolverFailure only if every point fails.
// Values are rounded to the 12 significant digits written by emit_csv.
SweepResult run_sweep(const Scenario& s, AlphaCache* cache = nullptr, std::size_t jobs = 1);

// Round to 12 significant digits (the CSV precision).
double round_csv(double v);

void emit_csv(std::ostream& os, const SweepResult& r);
void emit_csv(const std::filesystem::path& path, const SweepResult& r);
SweepResult parse_csv(std::istream& is);   // throws ConfigError on malformed input
SweepResult parse_csv(const std::filesystem::path& path);

void emit_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows);

} // namespace ote
