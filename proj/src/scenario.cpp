#include "ote/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ote/collective.hpp"
#include "ote/constants.hpp"
#include "ote/errors.hpp"

namespace ote {

namespace {

using json = nlohmann::json;

constexpr double um = 1e-6;

// Reads keys from one JSON object and rejects any it did not consume.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    T get(const std::string& key, const T& fallback) {
        used_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        return convert<T>(j_.at(key), key);
    }

    template <class T>
    T require(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) {
            throw ConfigError(path_ + ": missing key '" + key + "'");
        }
        return convert<T>(j_.at(key), key);
    }

    Section child(const std::string& key) {
        used_.insert(key);
        return Section(j_.contains(key) ? j_.at(key) : empty(), path_ + "." + key);
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) {
                throw ConfigError(path_ + ": unknown key '" + item.key() + "'");
            }
        }
    }

    const std::string& path() const { return path_; }

private:
    static const json& empty() {
        static const json e = json::object();
        return e;
    }

    template <class T>
    T convert(const json& v, const std::string& key) const {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) {
                    throw ConfigError("");
                }
            } else if constexpr (std::is_same_v<T, std::size_t>) {
                if (!v.is_number_integer() || v.get<long long>() < 0) {
                    throw ConfigError("");
                }
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) {
                    throw ConfigError("");
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) {
                    throw ConfigError("");
                }
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError(path_ + "." + key + ": wrong type");
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

LambdaStrategy parse_lambda_strategy(const std::string& name) {
    if (name == "vacuum-analytic") {
        return LambdaStrategy::vacuum_analytic;
    }
    if (name == "pv-quadrature") {
        return LambdaStrategy::pv_quadrature;
    }
    if (name == "user-supplied") {
        return LambdaStrategy::user_supplied;
    }
    throw ConfigError("unknown lambda strategy '" + name + "'");
}

PermittivityModel parse_permittivity(Section sec) {
    const auto kind = sec.get<std::string>("kind", "sapphire");
    PermittivityModel m;
    if (kind == "sapphire") {
        m = PermittivityModel::sapphire();
    } else if (kind == "vacuum") {
        m = PermittivityModel::vacuum();
    } else if (kind == "drude-lorentz") {
        m.kind = PermittivityModel::Kind::drude_lorentz;
        m.eps_inf = sec.require<double>("eps_inf");
        const json& list = sec.raw("resonances");
        if (!list.is_array()) {
            throw ConfigError(sec.path() + ".resonances: expected an array");
        }
        for (std::size_t k = 0; k < list.size(); ++k) {
            Section r(list[k], sec.path() + ".resonances[" + std::to_string(k) + "]");
            LorentzResonance res;
            res.strength = r.require<double>("strength");
            res.frequency = r.require<double>("frequency_rad_s");
            res.damping = r.require<double>("damping_rad_s");
            r.finish();
            if (!(res.frequency > 0.0) || res.damping < 0.0 || res.strength < 0.0) {
                throw ConfigError(r.path() + ": need frequency > 0, damping >= 0, strength >= 0");
            }
            m.resonances.push_back(res);
        }
    } else {
        throw ConfigError(sec.path() + ".kind: unknown permittivity kind '" + kind + "'");
    }
    sec.finish();
    return m;
}

DenseMatrix parse_matrix(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) {
        throw ConfigError(path + ": expected a non-empty array of rows");
    }
    const auto n = Eigen::Index(v.size());
    DenseMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const json& row = v[std::size_t(i)];
        if (!row.is_array() || Eigen::Index(row.size()) != n) {
            throw ConfigError(path + ": matrix must be square");
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            const json& e = row[std::size_t(j)];
            if (e.is_number()) {
                m(i, j) = e.get<double>();
            } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
                m(i, j) = cplx(e[0].get<double>(), e[1].get<double>());
            } else {
                throw ConfigError(path + ": entries must be numbers or [re, im] pairs");
            }
        }
    }
    return m;
}

std::string format12(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

const char* const kCsvHeader = "point,axis,sweep_value,kind,label,value,status,method,residual,iterations,message";

bool same_double(double a, double b) {
    return a == b || (std::isnan(a) && std::isnan(b));
}

// Symmetry actually used for a point: declared symmetry only holds for the regular shapes.
Symmetry effective_symmetry(const Scenario& s) {
    const auto& g = s.geometry;
    const bool regular = g.kind == GeometryKind::polygon ? g.x_over_r == 0.0 : g.l_over_d13 == 1.0;
    return regular ? s.measures.symmetry : Symmetry::none;
}

std::size_t qubit_count_of(const Scenario& s) {
    return s.geometry.kind == GeometryKind::polygon ? s.geometry.qubits : 3;
}

} // namespace

bool SweepRow::operator==(const SweepRow& o) const {
    return point == o.point && same_double(sweep_value, o.sweep_value) && kind == o.kind && label == o.label &&
           same_double(value, o.value) && status == o.status && method == o.method &&
           same_double(residual, o.residual) && iterations == o.iterations && message == o.message;
}

std::string to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::l_over_d13: return "l_over_d13";
    case SweepAxis::radius: return "radius_um";
    case SweepAxis::x_over_r: return "x_over_r";
    case SweepAxis::qubits: return "qubits";
    case SweepAxis::wall_temperature: return "wall_temperature_K";
    }
    return "l_over_d13";
}

SweepAxis parse_sweep_axis(const std::string& name) {
    for (auto a : {SweepAxis::l_over_d13, SweepAxis::radius, SweepAxis::x_over_r, SweepAxis::qubits,
                   SweepAxis::wall_temperature}) {
        if (to_string(a) == name) {
            return a;
        }
    }
    throw ConfigError("unknown sweep axis '" + name +
                      "' (expected l_over_d13, radius_um, x_over_r, qubits or wall_temperature_K)");
}

std::vector<double> SweepSpec::grid() const {
    std::vector<double> g;
    if (!values.empty()) {
        g = values;
        for (std::size_t k = 1; k < g.size(); ++k) {
            if (!(g[k] > g[k - 1])) {
                throw DomainError("sweep values must be strictly ascending");
            }
        }
    } else {
        if ((points == 0 && axis != SweepAxis::qubits) || !(stop >= start) || !std::isfinite(start) ||
            !std::isfinite(stop)) {
            throw DomainError("sweep range is empty");
        }
        if (points > 1 && stop == start) {
            throw DomainError("sweep range is empty: start equals stop with more than one point");
        }
        if (axis == SweepAxis::qubits) {
            if (start != std::floor(start) || stop != std::floor(stop)) {
                throw DomainError("qubit sweep bounds must be integers");
            }
            for (double n = start; n <= stop; n += 1.0) {
                g.push_back(n);
            }
            return g;
        }
        if (log_spacing && !(start > 0.0)) {
            throw DomainError("log-spaced sweep needs a positive start");
        }
        for (std::size_t k = 0; k < points; ++k) {
            const double f = points == 1 ? 0.0 : double(k) / double(points - 1);
            g.push_back(log_spacing ? start * std::pow(stop / start, f) : start + f * (stop - start));
        }
        g.back() = points == 1 ? start : stop;
    }
    if (g.empty()) {
        throw DomainError("sweep range is empty");
    }
    return g;
}

void Scenario::validate() const {
    const auto& g = geometry;
    if (g.kind == GeometryKind::polygon) {
        if (g.qubits < 2 || g.qubits > kMaxQubits) {
            throw ConfigError("geometry.qubits must lie in [2, " + std::to_string(kMaxQubits) + "]");
        }
        if (!(g.radius > 0.0)) {
            throw ConfigError("geometry.radius_um must be positive");
        }
        if (!(g.x_over_r >= 0.0)) {
            throw ConfigError("geometry.x_over_r must be non-negative");
        }
    } else {
        if (!(g.d13 > 0.0)) {
            throw ConfigError("geometry.d13_um must be positive");
        }
        if (!(g.l_over_d13 >= 0.5)) {
            throw ConfigError("geometry.l_over_d13 must be at least 0.5");
        }
    }
    if (!(g.height > 0.0)) {
        throw ConfigError("geometry.height_um must be positive");
    }
    if (std::abs(dipole.norm() - 1.0) > 1e-12) {
        throw ConfigError("emitters.dipole must be a unit vector");
    }
    if (!(dipole_moment > 0.0)) {
        throw ConfigError("emitters.dipole_moment_Cm must be positive");
    }
    if (!(omega > 0.0)) {
        throw ConfigError("emitters.frequency_rad_s must be positive");
    }
    if (!(wall_temperature >= 0.0) || !(slab.temperature >= 0.0)) {
        throw ConfigError("temperatures must be non-negative");
    }
    if (!(slab.thickness >= 0.0)) {
        throw ConfigError("slab.thickness_um must be non-negative");
    }
    try {
        quadrature.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("quadrature: ") + e.what());
    }
    if (lambda.strategy == LambdaStrategy::user_supplied) {
        const auto n = Eigen::Index(qubit_count_of(*this));
        if (!lambda.user || lambda.user->rows() != n) {
            throw ConfigError("lambda.matrix_rad_s must be " + std::to_string(n) + " x " + std::to_string(n));
        }
    }
    if (sweep) {
        const auto axis = sweep->axis;
        const bool polygon = g.kind == GeometryKind::polygon;
        if (axis == SweepAxis::l_over_d13 && polygon) {
            throw ConfigError("sweep axis l_over_d13 needs the triangle geometry");
        }
        if ((axis == SweepAxis::radius || axis == SweepAxis::x_over_r || axis == SweepAxis::qubits) && !polygon) {
            throw ConfigError("sweep axis " + to_string(axis) + " needs the polygon geometry");
        }
        if (axis == SweepAxis::qubits && lambda.strategy == LambdaStrategy::user_supplied) {
            throw ConfigError("a user-supplied lambda matrix cannot be combined with a qubit sweep");
        }
        try {
            for (double v : sweep->grid()) {
                at_sweep_value(*this, axis, v);
            }
        } catch (const DomainError& e) {
            throw ConfigError(std::string("sweep: ") + e.what());
        }
    }
}

Scenario parse_scenario(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    Scenario s;
    Section root(doc, "config");
    s.name = root.get<std::string>("name", s.name);

    {
        Section g = root.child("geometry");
        const auto kind = g.get<std::string>("kind", "polygon");
        if (kind == "polygon") {
            s.geometry.kind = GeometryKind::polygon;
            s.geometry.qubits = g.require<std::size_t>("qubits");
            s.geometry.radius = g.require<double>("radius_um") * um;
            s.geometry.x_over_r = g.get<double>("x_over_r", 0.0);
        } else if (kind == "triangle") {
            s.geometry.kind = GeometryKind::triangle_path;
            s.geometry.d13 = g.get<double>("d13_um", 2.0) * um;
            s.geometry.l_over_d13 = g.get<double>("l_over_d13", 1.0);
        } else {
            throw ConfigError("geometry.kind must be 'polygon' or 'triangle'");
        }
        s.geometry.height = g.get<double>("height_um", 8.0) * um;
        g.finish();
    }
    {
        Section e = root.child("emitters");
        if (e.has("dipole")) {
            const json& d = e.raw("dipole");
            if (!d.is_array() || d.size() != 3 || !d[0].is_number() || !d[1].is_number() || !d[2].is_number()) {
                throw ConfigError("emitters.dipole must be a real 3-vector");
            }
            Eigen::Vector3d v(d[0].get<double>(), d[1].get<double>(), d[2].get<double>());
            if (!(v.norm() > 0.0)) {
                throw ConfigError("emitters.dipole must be non-zero");
            }
            s.dipole = v.normalized();
        }
        s.dipole_moment = e.get<double>("dipole_moment_Cm", s.dipole_moment);
        s.omega = e.get<double>("frequency_rad_s", s.omega);
        e.finish();
    }
    s.wall_temperature = root.get<double>("wall_temperature_K", s.wall_temperature);
    {
        Section sl = root.child("slab");
        s.slab.thickness = sl.get<double>("thickness_um", s.slab.thickness / um) * um;
        s.slab.temperature = sl.get<double>("temperature_K", s.slab.temperature);
        if (sl.has("permittivity")) {
            s.slab.permittivity = parse_permittivity(sl.child("permittivity"));
        }
        sl.finish();
    }
    {
        Section q = root.child("quadrature");
        s.quadrature.rel_tol = q.get<double>("rel_tol", s.quadrature.rel_tol);
        s.quadrature.abs_tol = q.get<double>("abs_tol", s.quadrature.abs_tol);
        s.quadrature.evanescent_cutoff = q.get<double>("evanescent_cutoff", s.quadrature.evanescent_cutoff);
        const auto angular = q.get<std::string>("angular", "bessel");
        if (angular == "bessel") {
            s.quadrature.angular = QuadratureSpec::Angular::bessel;
        } else if (angular == "direct") {
            s.quadrature.angular = QuadratureSpec::Angular::direct;
        } else {
            throw ConfigError("quadrature.angular must be 'bessel' or 'direct'");
        }
        q.finish();
    }
    {
        Section l = root.child("lambda");
        s.lambda.strategy = parse_lambda_strategy(l.get<std::string>("strategy", "vacuum-analytic"));
        s.lambda.pv_window_fraction = l.get<double>("pv_window_fraction", s.lambda.pv_window_fraction);
        s.lambda.pv_rel_tol = l.get<double>("pv_rel_tol", s.lambda.pv_rel_tol);
        if (l.has("matrix_rad_s")) {
            s.lambda.user = parse_matrix(l.raw("matrix_rad_s"), "lambda.matrix_rad_s");
        }
        l.finish();
        if (!(s.lambda.pv_window_fraction > 0.0 && s.lambda.pv_window_fraction < 1.0)) {
            throw ConfigError("lambda.pv_window_fraction must lie in (0, 1)");
        }
    }
    {
        Section so = root.child("solver");
        s.solver.method = parse_steady_method(so.get<std::string>("method", "auto"));
        s.solver.residual_tol = so.get<double>("residual_tol", s.solver.residual_tol);
        s.solver.positivity_tol = so.get<double>("positivity_tol", s.solver.positivity_tol);
        s.solver.nullspace_threshold = so.get<double>("nullspace_threshold", s.solver.nullspace_threshold);
        s.solver.dense_block_limit = so.get<std::size_t>("dense_block_limit", s.solver.dense_block_limit);
        s.solver.gmres_restart = so.get<std::size_t>("gmres_restart", s.solver.gmres_restart);
        s.solver.gmres_max_iterations = so.get<std::size_t>("gmres_max_iterations", s.solver.gmres_max_iterations);
        s.solver.coarse_gap_factor = so.get<double>("coarse_gap_factor", s.solver.coarse_gap_factor);
        s.solver.max_coarse_unknowns = so.get<std::size_t>("max_coarse_unknowns", s.solver.max_coarse_unknowns);
        so.finish();
        if (!(s.solver.residual_tol > 0.0) || !(s.solver.nullspace_threshold > 0.0) ||
            s.solver.gmres_restart == 0) {
            throw ConfigError("solver tolerances must be positive");
        }
    }
    {
        Section m = root.child("measures");
        s.measures.symmetry = parse_symmetry(m.get<std::string>("symmetry", "none"));
        s.measures.pairs = m.get<bool>("pairs", true);
        s.measures.concurrences = m.get<bool>("concurrences", true);
        s.measures.bipartitions = m.get<bool>("bipartitions", true);
        const auto report = m.get<std::string>("report", "full");
        if (report == "full") {
            s.report = ReportLevel::full;
        } else if (report == "summary") {
            s.report = ReportLevel::summary;
        } else if (report == "maxima") {
            s.report = ReportLevel::maxima;
        } else {
            throw ConfigError("measures.report must be 'full', 'summary' or 'maxima'");
        }
        m.finish();
    }
    s.rotating_frame = root.get<bool>("rotating_frame", true);
    s.spectrum = root.get<bool>("spectrum", false);
    if (root.has("sweep")) {
        Section sw = root.child("sweep");
        SweepSpec spec;
        spec.axis = parse_sweep_axis(sw.require<std::string>("axis"));
        if (sw.has("values")) {
            const json& v = sw.raw("values");
            if (!v.is_array()) {
                throw ConfigError("sweep.values must be an array");
            }
            for (const auto& x : v) {
                if (!x.is_number()) {
                    throw ConfigError("sweep.values must be numbers");
                }
                spec.values.push_back(x.get<double>());
            }
            if (spec.values.empty()) {
                throw ConfigError("sweep range is empty");
            }
        } else {
            spec.start = sw.require<double>("start");
            spec.stop = sw.require<double>("stop");
            spec.points = sw.get<std::size_t>("points", spec.axis == SweepAxis::qubits ? 1 : 0);
        }
        const auto spacing = sw.get<std::string>("spacing", "linear");
        if (spacing != "linear" && spacing != "log") {
            throw ConfigError("sweep.spacing must be 'linear' or 'log'");
        }
        spec.log_spacing = spacing == "log";
        sw.finish();
        s.sweep = spec;
    }
    {
        Section o = root.child("output");
        s.output = o.get<std::string>("csv", "");
        o.finish();
    }
    root.finish();
    s.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str());
}

std::vector<Eigen::Vector3d> polygon_geometry(std::size_t qubits, double radius, double height, double displacement) {
    if (qubits < 2) {
        throw DomainError("polygon needs at least two vertices");
    }
    if (!(radius > 0.0) || !(displacement >= 0.0)) {
        throw DomainError("polygon needs r > 0 and x >= 0");
    }
    std::vector<Eigen::Vector3d> p;
    for (std::size_t k = 0; k < qubits; ++k) {
        const double a = 2.0 * constants::pi * double(k) / double(qubits);
        const double rr = k + 1 == qubits ? radius + displacement : radius;
        p.emplace_back(rr * std::cos(a), rr * std::sin(a), height);
    }
    return p;
}

std::vector<Eigen::Vector3d> triangle_path(double d13, double l_over_d13, double height) {
    if (!(d13 > 0.0) || !(l_over_d13 >= 0.5)) {
        throw DomainError("triangle path needs d13 > 0 and l/d13 >= 0.5");
    }
    const double l = l_over_d13 * d13;
    const double y = std::sqrt(std::max(0.0, l * l - 0.25 * d13 * d13));
    return {{-0.5 * d13, 0.0, height}, {0.0, y, height}, {0.5 * d13, 0.0, height}};
}

EmitterArray build_emitters(const Scenario& s) {
    EmitterArray e;
    const auto& g = s.geometry;
    e.positions = g.kind == GeometryKind::polygon ? polygon_geometry(g.qubits, g.radius, g.height, g.x_over_r * g.radius)
                                                  : triangle_path(g.d13, g.l_over_d13, g.height);
    e.dipoles.assign(e.positions.size(), s.dipole.cast<cplx>());
    e.dipole_moments.assign(e.positions.size(), s.dipole_moment);
    e.omega0 = s.omega;
    e.omega_renormalized = s.omega;
    e.validate();
    return e;
}

Scenario at_sweep_value(const Scenario& s, SweepAxis axis, double value) {
    Scenario out = s;
    switch (axis) {
    case SweepAxis::l_over_d13:
        if (!(value >= 0.5)) {
            throw DomainError("l/d13 below 0.5");
        }
        out.geometry.l_over_d13 = value;
        break;
    case SweepAxis::radius:
        if (!(value > 0.0)) {
            throw DomainError("radius must be positive");
        }
        out.geometry.radius = value * um;
        break;
    case SweepAxis::x_over_r:
        if (!(value >= 0.0)) {
            throw DomainError("x/r must be non-negative");
        }
        out.geometry.x_over_r = value;
        break;
    case SweepAxis::qubits:
        if (value != std::floor(value) || value < 2.0 || value > double(kMaxQubits)) {
            throw DomainError("qubit count must be an integer in [2, " + std::to_string(kMaxQubits) + "]");
        }
        out.geometry.qubits = std::size_t(value);
        break;
    case SweepAxis::wall_temperature:
        if (!(value >= 0.0)) {
            throw DomainError("wall temperature must be non-negative");
        }
        out.wall_temperature = value;
        break;
    }
    out.sweep.reset();
    return out;
}

std::vector<MeasureRow> report_rows(const MeasureReport& report, ReportLevel level) {
    if (level == ReportLevel::full) {
        return report.rows;
    }
    // Largest value per (kind, |A|); first occurrence wins ties so labels are stable.
    const MeasureRow* best_pair = nullptr;
    const MeasureRow* best_bip = nullptr;
    std::map<std::size_t, const MeasureRow*> best_by_size;
    std::vector<MeasureRow> out;
    for (const auto& r : report.rows) {
        if (r.kind == "pair_negativity") {
            if (!best_pair || r.value > best_pair->value) {
                best_pair = &r;
            }
        } else if (r.kind == "bipartition_negativity") {
            if (!best_bip || r.value > best_bip->value) {
                best_bip = &r;
            }
            auto& b = best_by_size[r.indices.size()];
            if (!b || r.value > b->value) {
                b = &r;
            }
        }
    }
    auto summary = [](const MeasureRow* r, const std::string& kind) {
        MeasureRow m = *r;
        m.kind = kind;
        return m;
    };
    if (best_pair) {
        out.push_back(summary(best_pair, "max_pair_negativity"));
    }
    if (level == ReportLevel::summary) {
        for (const auto& [size, r] : best_by_size) {
            out.push_back(summary(r, "max_bipartition_negativity"));
        }
        for (const auto& r : report.rows) {
            if (r.kind == "tripartite_negativity") {
                out.push_back(r);
            }
        }
        return out;
    }
    if (best_bip) {
        out.push_back(summary(best_bip, "max_bipartition_negativity"));
    }
    const MeasureRow* best = best_pair;
    if (best_bip && (!best || best_bip->value > best->value)) {
        best = best_bip;
    }
    if (best) {
        out.push_back(summary(best, "max_negativity"));
    }
    return out;
}

PointResult run_point(const Scenario& input, AlphaCache* cache) {
    input.validate();
    Scenario s = input;
    PointResult res;
    const std::size_t n = qubit_count_of(s);
    if (n >= 8) {
        const double rel = std::max(s.quadrature.rel_tol, 1e-9);
        const double resid = std::max(s.solver.residual_tol, 1e-8);
        if (rel != s.quadrature.rel_tol || resid != s.solver.residual_tol) {
            s.quadrature.rel_tol = rel;
            s.solver.residual_tol = resid;
            std::ostringstream msg;
            msg << "N = " << n << ": tolerances loosened (quadrature rel_tol " << format12(rel)
                << ", solver residual_tol " << format12(resid) << ")";
            res.notices.push_back(msg.str());
        }
    }
    MeasureOptions mo = s.measures;
    mo.symmetry = effective_symmetry(s);
    if (mo.symmetry != s.measures.symmetry) {
        res.notices.push_back("declared " + to_string(s.measures.symmetry) +
                              " symmetry does not hold for this geometry; measures reported without it");
    }

    const EmitterArray e = build_emitters(s);
    const AlphaMatrices alpha = alpha_matrices(s.omega, e, s.slab, s.quadrature, cache);
    Eigen::VectorXd g0(Eigen::Index(e.size()));
    for (std::size_t i = 0; i < e.size(); ++i) {
        g0[Eigen::Index(i)] = e.vacuum_rate(i, s.omega);
    }
    res.rates = build_rates(alpha, s.wall_temperature, s.slab.temperature, g0, s.omega);
    res.rates.lambda = build_lambda(e, s.slab, s.quadrature, s.omega, s.lambda);
    const double omega0 = s.rotating_frame ? 0.0 : s.omega;
    const Liouvillian l(res.rates, omega0, n);
    res.steady = steady_state(l, s.solver);
    res.measures = measure_suite(res.steady.rho, mo);
    res.rows = report_rows(res.measures, s.report);

    if (s.spectrum) {
        const CollectiveSpectrum spec = spectral(build_heff(res.rates, omega0, n));
        const auto pops = collective_populations(spec, res.steady.rho);
        for (std::size_t k = 0; k < spec.sectors.size(); ++k) {
            for (Eigen::Index a = 0; a < spec.sectors[k].eigenvalues.size(); ++a) {
                res.spectrum.push_back({k, std::size_t(a), spec.sectors[k].eigenvalues[a],
                                        spec.decay_constant(k, std::size_t(a)), pops[k][a]});
            }
        }
    }
    return res;
}

double round_csv(double v) {
    if (!std::isfinite(v)) {
        return v;
    }
    return std::strtod(format12(v).c_str(), nullptr);
}

SweepResult run_sweep(const Scenario& s, AlphaCache* cache, std::size_t jobs) {
    if (!s.sweep) {
        throw ConfigError("scenario has no sweep section");
    }
    const std::vector<double> grid = s.sweep->grid();
    const SweepAxis axis = s.sweep->axis;

    struct Outcome {
        std::vector<SweepRow> rows;
        std::vector<std::string> notices;
        bool failed{false};
    };
    std::vector<Outcome> outcomes(grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < grid.size(); k = next++) {
            Outcome& o = outcomes[k];
            const double v = round_csv(grid[k]);
            try {
                const PointResult p = run_point(at_sweep_value(s, axis, grid[k]), cache);
                for (const auto& row : p.rows) {
                    o.rows.push_back({k, v, row.kind, row.label, round_csv(row.value), "ok",
                                      to_string(p.steady.method), round_csv(p.steady.residual), p.steady.iterations,
                                      ""});
                }
                for (const auto& msg : p.notices) {
                    o.notices.push_back(to_string(axis) + "=" + format12(v) + ": " + msg);
                }
            } catch (const std::exception& ex) {
                o.failed = true;
                o.rows.push_back({k, v, "error", "", std::nan(""), "failed", "", std::nan(""), 0,
                                  to_string(axis) + "=" + format12(v) + ": " + ex.what()});
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, grid.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t) {
            pool.emplace_back(worker);
        }
    }

    SweepResult r;
    r.axis = axis;
    r.points = grid.size();
    for (auto& o : outcomes) {
        r.failed_points += o.failed ? 1 : 0;
        r.rows.insert(r.rows.end(), o.rows.begin(), o.rows.end());
        r.notices.insert(r.notices.end(), o.notices.begin(), o.notices.end());
    }
    if (r.failed_points == r.points) {
        throw SolverFailure("sweep: every point failed; first failure: " + r.rows.front().message);
    }
    return r;
}

void emit_csv(std::ostream& os, const SweepResult& r) {
    os << kCsvHeader << '\n';
    const std::string axis = to_string(r.axis);
    for (const auto& row : r.rows) {
        os << row.point << ',' << axis << ',' << format12(row.sweep_value) << ',' << csv_field(row.kind) << ','
           << csv_field(row.label) << ',' << format12(row.value) << ',' << row.status << ',' << row.method << ','
           << format12(row.residual) << ',' << row.iterations << ',' << csv_field(row.message) << '\n';
    }
}

void emit_csv(const std::filesystem::path& path, const SweepResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    emit_csv(out, r);
    out.flush();
    if (!out) {
        throw Error("write to '" + path.string() + "' failed");
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) {
        throw ConfigError("CSV line " + std::to_string(line_no) + ": unterminated quote");
    }
    fields.push_back(std::move(cur));
    return fields;
}

double parse_number(const std::string& s, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw ConfigError("CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
}

std::size_t parse_count(const std::string& s, std::size_t line_no) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("CSV line " + std::to_string(line_no) + ": bad integer '" + s + "'");
    }
    return std::stoull(s);
}

} // namespace

SweepResult parse_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader) {
        throw ConfigError("CSV: missing or unexpected header");
    }
    SweepResult r;
    std::set<std::size_t> points;
    std::set<std::size_t> failed;
    std::size_t line_no = 1;
    bool axis_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto f = split_csv_line(line, line_no);
        if (f.size() != 11) {
            throw ConfigError("CSV line " + std::to_string(line_no) + ": expected 11 fields");
        }
        const SweepAxis axis = parse_sweep_axis(f[1]);
        if (axis_seen && axis != r.axis) {
            throw ConfigError("CSV line " + std::to_string(line_no) + ": mixed sweep axes");
        }
        r.axis = axis;
        axis_seen = true;
        SweepRow row;
        row.point = parse_count(f[0], line_no);
        row.sweep_value = parse_number(f[2], line_no);
        row.kind = f[3];
        row.label = f[4];
        row.value = parse_number(f[5], line_no);
        row.status = f[6];
        row.method = f[7];
        row.residual = parse_number(f[8], line_no);
        row.iterations = parse_count(f[9], line_no);
        row.message = f[10];
        points.insert(row.point);
        if (row.status == "failed") {
            failed.insert(row.point);
        }
        r.rows.push_back(std::move(row));
    }
    r.points = points.size();
    r.failed_points = failed.size();
    return r;
}

SweepResult parse_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "'");
    }
    return parse_csv(in);
}

void emit_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows) {
    os << "sector,index,re_omega_rad_s,im_omega_rad_s,decay_constant_rad_s,population\n";
    for (const auto& r : rows) {
        os << r.sector << ',' << r.index << ',' << format12(r.omega.real()) << ',' << format12(r.omega.imag()) << ','
           << format12(r.decay_constant) << ',' << format12(r.population) << '\n';
    }
}

} // namespace ote
