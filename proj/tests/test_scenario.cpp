#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "ote/errors.hpp"
#include "ote/scenario.hpp"

using namespace ote;

namespace {

const std::filesystem::path config_dir{OTE_CONFIG_DIR};

Scenario config(const std::string& name) {
    return load_scenario(config_dir / name);
}

std::string csv_text(const SweepResult& r) {
    std::ostringstream os;
    emit_csv(os, r);
    return os.str();
}

double value_of(const PointResult& p, const std::string& kind) {
    for (const auto& r : p.rows) {
        if (r.kind == kind) {
            return r.value;
        }
    }
    FAIL("missing row " << kind);
    return 0.0;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(OTE_SIM) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("polygon geometry", "[scenario]") {
    const auto sq = polygon_geometry(4, 1.0, 2.0);
    CHECK(std::abs((sq[0] - sq[1]).norm() - std::sqrt(2.0)) < 1e-14);
    CHECK(std::abs((sq[0] - sq[2]).norm() - 2.0) < 1e-14);
    CHECK(sq[3].z() == 2.0);
    const auto tri = polygon_geometry(3, 1.0, 1.0);
    CHECK(std::abs((tri[0] - tri[1]).norm() - std::sqrt(3.0)) < 1e-14);
    const auto hex = polygon_geometry(6, 0.7, 1.0);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(std::abs((hex[k] - hex[(k + 1) % 6]).norm() - 0.7) < 1e-14);
    }
    const auto moved = polygon_geometry(6, 1.0, 1.0, 0.1);
    CHECK(std::abs(moved[5].head<2>().norm() - 1.1) < 1e-14);
    CHECK((moved[0] - polygon_geometry(6, 1.0, 1.0)[0]).norm() < 1e-14);
    CHECK_THROWS_AS(polygon_geometry(1, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(polygon_geometry(3, -1.0, 1.0), DomainError);
}

TEST_CASE("triangle path geometry", "[scenario]") {
    const auto eq = triangle_path(2.0, 1.0, 1.0);
    CHECK(std::abs((eq[0] - eq[1]).norm() - 2.0) < 1e-14);
    CHECK(std::abs((eq[1] - eq[2]).norm() - 2.0) < 1e-14);
    CHECK(std::abs((eq[0] - eq[2]).norm() - 2.0) < 1e-14);
    const auto line = triangle_path(2.0, 0.5, 1.0);
    CHECK(line[1].y() == 0.0);
    CHECK(std::abs((line[0] - line[1]).norm() - 1.0) < 1e-14);
    CHECK_THROWS_AS(triangle_path(2.0, 0.4, 1.0), DomainError);
}

TEST_CASE("config errors", "[scenario]") {
    CHECK_THROWS_AS(parse_scenario("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"nmae": "x"})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"geometry": {"kind": "polygon", "qubits": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"geometry": {"kind": "star"}})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"geometry": {"radius_um": "big"}})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"solver": {"method": "guess"}})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"sweep": {"axis": "radius_um", "start": 2, "stop": 1, "points": 3}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"geometry": {"kind": "polygon"},
                                      "sweep": {"axis": "l_over_d13", "values": [0.5, 1]}})"),
                    ConfigError);
    CHECK_THROWS_AS(load_scenario(config_dir / "no_such_config.json"), ConfigError);
    CHECK_NOTHROW(parse_scenario(R"({"geometry": {"kind": "polygon", "qubits": 2, "radius_um": 1.0}})"));
}

TEST_CASE("every shipped config validates", "[scenario]") {
    for (const auto& entry : std::filesystem::directory_iterator(config_dir)) {
        if (entry.path().extension() == ".json") {
            INFO(entry.path().string());
            CHECK_NOTHROW(load_scenario(entry.path()));
        }
    }
}

TEST_CASE("sweep grids", "[scenario]") {
    SweepSpec s;
    s.axis = SweepAxis::radius;
    s.start = 1.0;
    s.stop = 1.0;
    s.points = 3;
    CHECK_THROWS_AS(s.grid(), DomainError);
    s.points = 0;
    CHECK_THROWS_AS(s.grid(), DomainError);
    s.start = 2.0;
    s.stop = 1.0;
    s.points = 4;
    CHECK_THROWS_AS(s.grid(), DomainError);
    s.start = 1.0;
    s.stop = 100.0;
    s.points = 3;
    s.log_spacing = true;
    const auto g = s.grid();
    REQUIRE(g.size() == 3);
    CHECK(std::abs(g[1] - 10.0) < 1e-12);
    CHECK(g.back() == 100.0);
    SweepSpec q;
    q.axis = SweepAxis::qubits;
    q.start = 2;
    q.stop = 10;
    CHECK(q.grid().size() == 9);
    CHECK(parse_sweep_axis(to_string(SweepAxis::wall_temperature)) == SweepAxis::wall_temperature);
    CHECK_THROWS_AS(parse_sweep_axis("colour"), ConfigError);
}

TEST_CASE("two-qubit example point", "[scenario]") {
    const PointResult p = run_point(config("pair.json"));
    const double neg = value_of(p, "pair_negativity");
    const double conc = value_of(p, "concurrence");
    CHECK(neg > 0.045);
    CHECK(neg < 0.065);
    CHECK(conc > 0.23);
    CHECK(conc < 0.28);
    // frozen regression values
    CHECK(neg == Catch::Approx(0.053557).epsilon(1e-4));
    CHECK(conc == Catch::Approx(0.254891).epsilon(1e-4));
}

TEST_CASE("equal temperatures give no entanglement", "[scenario]") {
    const PointResult p = run_point(config("equilibrium.json"));
    for (const auto& r : p.rows) {
        INFO(r.kind << " " << r.label);
        CHECK(std::abs(r.value) < 1e-8);
    }
}

TEST_CASE("CSV output round-trips", "[scenario][csv]") {
    Scenario s = config("triangle_path.json");
    s.sweep->points = 4;
    const SweepResult r = run_sweep(s);
    const std::string text = csv_text(r);
    std::istringstream in(text);
    const SweepResult back = parse_csv(in);
    CHECK(back == r);
    CHECK(csv_text(back) == text);
    // a fresh run produces the same bytes
    CHECK(csv_text(run_sweep(s, nullptr, 3)) == text);

    std::istringstream two("point,axis,sweep_value,kind,label,value,status,method,residual,iterations,message\n"
                           "0,radius_um,1.5,pair_negativity,1-2,0.0123,ok,dense-nullspace,1e-15,0,\n");
    const SweepResult one = parse_csv(two);
    REQUIRE(one.rows.size() == 1);
    CHECK(one.axis == SweepAxis::radius);
    CHECK(one.rows[0].value == 0.0123);
    CHECK(one.rows[0].label == "1-2");
    std::istringstream bad("point,axis\n1,2\n");
    CHECK_THROWS_AS(parse_csv(bad), ConfigError);
}

TEST_CASE("round_csv is idempotent through text", "[scenario][csv][property]") {
    for (double v : {0.1, 1.0 / 3.0, 2.0 / 3.0 * 1e-17, 123456789.123456789, -4.5e300}) {
        const double r = round_csv(v);
        CHECK(round_csv(r) == r);
        std::ostringstream os;
        os.precision(12);
        os << r;
        CHECK(std::stod(os.str()) == r);
    }
}

TEST_CASE("warm and cold caches agree", "[scenario][cache]") {
    Scenario s = config("hexagon_displacement.json");
    s.sweep->values = {0.0, 0.01};
    AlphaCache cache;
    const SweepResult cold = run_sweep(s, &cache);
    REQUIRE(cache.size() > 0);
    const SweepResult warm = run_sweep(s, &cache, 2);
    const SweepResult none = run_sweep(s);
    REQUIRE(cold.rows.size() == warm.rows.size());
    for (std::size_t k = 0; k < cold.rows.size(); ++k) {
        CHECK(std::abs(cold.rows[k].value - warm.rows[k].value) <= 1e-12 * std::max(1.0, std::abs(cold.rows[k].value)));
    }
    CHECK(csv_text(cold) == csv_text(warm));
    CHECK(csv_text(none) == csv_text(cold));
}

TEST_CASE("failed points do not stop a sweep", "[scenario]") {
    Scenario s = config("pair.json");
    SweepSpec sw;
    sw.axis = SweepAxis::qubits;
    sw.values = {2.0, 2.5, 3.0};
    s.sweep = sw;
    s.measures.symmetry = Symmetry::dihedral;
    const SweepResult r = run_sweep(s);
    CHECK(r.points == 3);
    CHECK(r.failed_points == 1);
    std::size_t failed_rows = 0;
    for (const auto& row : r.rows) {
        if (row.status == "failed") {
            ++failed_rows;
            CHECK(row.sweep_value == 2.5);
            CHECK(std::isnan(row.value));
            CHECK(row.message.find("qubits=2.5") != std::string::npos);
        }
    }
    CHECK(failed_rows == 1);
    sw.values = {2.5, 3.5};
    s.sweep = sw;
    CHECK_THROWS_AS(run_sweep(s), SolverFailure);
}

TEST_CASE("qubit-count sweep gives nine rows per reported kind", "[scenario][slow]") {
    const Scenario s = config("polygon_count.json");
    const SweepResult r = run_sweep(s, nullptr, 4);
    CHECK(r.failed_points == 0);
    std::map<std::string, std::size_t> per_kind;
    for (const auto& row : r.rows) {
        ++per_kind[row.kind];
        CHECK(row.value >= 0.0);
    }
    CHECK(per_kind.size() == 3);
    for (const auto& [kind, count] : per_kind) {
        INFO(kind);
        CHECK(count == 9);
    }
    // N >= 8 points carry a loosened-tolerance notice
    std::size_t loosened = 0;
    for (const auto& n : r.notices) {
        loosened += n.find("tolerances loosened") != std::string::npos ? 1 : 0;
    }
    CHECK(loosened == 3);
}

TEST_CASE("hexagon entanglement survives at large radius", "[scenario]") {
    const Scenario s = at_sweep_value(config("hexagon_radius.json"), SweepAxis::radius, 100.0);
    const PointResult p = run_point(s);
    std::size_t sizes = 0;
    for (const auto& r : p.rows) {
        if (r.kind == "max_bipartition_negativity") {
            ++sizes;
            CHECK(r.value > 0.0);
        }
    }
    CHECK(sizes == 3);
}

TEST_CASE("irregular geometry drops the declared symmetry", "[scenario]") {
    Scenario s = config("hexagon_displacement.json");
    s.sweep.reset();
    s.geometry.x_over_r = 0.01;
    const PointResult p = run_point(s);
    CHECK_FALSE(p.notices.empty());
}

TEST_CASE("command-line exit codes", "[scenario][cli]") {
    const auto tmp = std::filesystem::temp_directory_path();
    const std::string pair = (config_dir / "pair.json").string();
    CHECK(run_cli("validate --config " + pair) == 0);
    CHECK(run_cli("run --config " + pair + " --out " + (tmp / "ote_cli_run.csv").string()) == 0);
    CHECK(run_cli("spectrum --config " + pair + " --out " + (tmp / "ote_cli_spec.csv").string()) == 0);
    CHECK(run_cli("frobnicate") == 1);

    const auto bad = tmp / "ote_cli_bad.json";
    {
        std::ofstream(bad) << R"({"geometry": {"qubits": 1}})";
    }
    CHECK(run_cli("validate --config " + bad.string()) == 1);

    const auto fail = tmp / "ote_cli_fail.json";
    {
        std::ofstream(fail) << R"({"geometry": {"kind": "polygon", "qubits": 2, "radius_um": 1.0},
                                   "solver": {"method": "long-time", "residual_tol": 1e-300}})";
    }
    CHECK(run_cli("run --config " + fail.string()) == 2);

    const auto partial = tmp / "ote_cli_partial.json";
    {
        // the 0.1 um hexagon has a non-unique steady state
        std::ofstream(partial) << R"({"geometry": {"kind": "polygon", "qubits": 6, "radius_um": 1.0},
                                      "sweep": {"axis": "radius_um", "values": [0.1, 1.0]}})";
    }
    CHECK(run_cli("sweep --config " + partial.string() + " --out " + (tmp / "ote_cli_partial.csv").string()) == 3);
    for (const auto& f : {bad, fail, partial}) {
        std::filesystem::remove(f);
    }
}
