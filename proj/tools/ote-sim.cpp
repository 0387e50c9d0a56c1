// ote-sim.cpp - Command-line driver: single points, sweeps, collective spectra, config lint
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure, 3 sweep
// finished with some failed points.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ote/errors.hpp"
#include "ote/scenario.hpp"

namespace {

enum Exit { ok = 0, config_error = 1, numerical_failure = 2, partial_sweep = 3 };

struct Options {
    std::string config;
    std::string out;
    std::string cache;
    std::string method;
    std::size_t jobs{1};
};

ote::Scenario load(const Options& o) {
    ote::Scenario s = ote::load_scenario(o.config);
    if (!o.method.empty()) {
        s.solver.method = ote::parse_steady_method(o.method);
    }
    return s;
}

// Writes to --out, else the config's output path, else stdout.
template <class Writer>
void write_output(const Options& o, const std::string& fallback, Writer write) {
    const std::string path = !o.out.empty() ? o.out : fallback;
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::ios_base::failure("cannot open '" + path + "' for writing");
    }
    write(out);
    out.flush();
    if (!out) {
        throw std::ios_base::failure("write to '" + path + "' failed");
    }
}

std::unique_ptr<ote::AlphaCache> open_cache(const Options& o) {
    if (o.cache.empty()) {
        return nullptr;
    }
    auto c = std::make_unique<ote::AlphaCache>();
    c->load(o.cache);
    return c;
}

void save_cache(const Options& o, const std::unique_ptr<ote::AlphaCache>& c) {
    if (c) {
        c->save(o.cache);
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

int cmd_run(const Options& o) {
    const ote::Scenario s = load(o);
    auto cache = open_cache(o);
    const ote::PointResult p = ote::run_point(s, cache.get());
    save_cache(o, cache);
    for (const auto& n : p.notices) {
        std::cerr << "notice: " << n << '\n';
    }
    write_output(o, s.output, [&](std::ostream& os) {
        os << "kind,label,value,method,residual,iterations\n";
        for (const auto& r : p.rows) {
            os << r.kind << ",\"" << r.label << "\"," << fmt(r.value) << ',' << ote::to_string(p.steady.method) << ','
               << fmt(p.steady.residual) << ',' << p.steady.iterations << '\n';
        }
    });
    return ok;
}

int cmd_sweep(const Options& o) {
    const ote::Scenario s = load(o);
    if (!s.sweep) {
        throw ote::ConfigError("config has no sweep section");
    }
    auto cache = open_cache(o);
    const ote::SweepResult r = ote::run_sweep(s, cache.get(), o.jobs);
    save_cache(o, cache);
    for (const auto& n : r.notices) {
        std::cerr << "notice: " << n << '\n';
    }
    for (const auto& row : r.rows) {
        if (row.status == "failed") {
            std::cerr << "failed: " << row.message << '\n';
        }
    }
    write_output(o, s.output, [&](std::ostream& os) { ote::emit_csv(os, r); });
    std::cerr << r.points - r.failed_points << " of " << r.points << " points succeeded\n";
    return r.failed_points > 0 ? partial_sweep : ok;
}

int cmd_spectrum(const Options& o) {
    ote::Scenario s = load(o);
    s.spectrum = true;
    s.sweep.reset();
    auto cache = open_cache(o);
    const ote::PointResult p = ote::run_point(s, cache.get());
    save_cache(o, cache);
    for (const auto& n : p.notices) {
        std::cerr << "notice: " << n << '\n';
    }
    write_output(o, "", [&](std::ostream& os) { ote::emit_spectrum_csv(os, p.spectrum); });
    return ok;
}

int cmd_validate(const Options& o) {
    const ote::Scenario s = load(o);
    std::cout << "config ok: " << s.name;
    if (s.sweep) {
        std::cout << ", sweep over " << ote::to_string(s.sweep->axis) << " with " << s.sweep->grid().size()
                  << " points";
    }
    std::cout << '\n';
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady entanglement of emitters near a slab out of thermal equilibrium"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&o](CLI::App* sub, bool with_jobs) {
        sub->add_option("--config", o.config, "Scenario file (JSON, units in key names)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "Output CSV path ('-' for stdout)");
        sub->add_option("--cache", o.cache, "Response-function cache file, loaded and updated");
        sub->add_option("--method", o.method, "Steady-state method: auto, dense-nullspace, blocked-linear, long-time");
        if (with_jobs) {
            sub->add_option("--jobs", o.jobs, "Worker threads for sweep points")->check(CLI::PositiveNumber);
        }
    };
    auto* run = app.add_subcommand("run", "Solve a single point and write its measures");
    auto* sweep = app.add_subcommand("sweep", "Run the configured sweep and write the result table");
    auto* spectrum = app.add_subcommand("spectrum", "Write the collective spectrum and populations of a point");
    auto* validate = app.add_subcommand("validate", "Check a config file without solving");
    add_common(run, false);
    add_common(sweep, true);
    add_common(spectrum, false);
    add_common(validate, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*run) {
            return cmd_run(o);
        }
        if (*sweep) {
            return cmd_sweep(o);
        }
        if (*spectrum) {
            return cmd_spectrum(o);
        }
        return cmd_validate(o);
    } catch (const ote::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return config_error;
    } catch (const ote::Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numerical_failure;
    }
}
