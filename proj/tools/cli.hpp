#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ioslab/constructs.hpp"
#include "ioslab/diagram.hpp"
#include "ioslab/dsl.hpp"
#include "ioslab/plans.hpp"

namespace ioslab::cli {

enum Exit : int { ok = 0, failed = 1, usage = 2, runtime = 3 };

/// Bad command-line values detected after parsing (unknown system, malformed vector).
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ===================================================================
// argument resolution
// ===================================================================

struct Common {
    std::string system;
    std::string config_file;
    std::string plan_file;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<double> horizon;
    zoo::ZooParams zoo;
};

struct Resolved {
    SystemModel sys;
    SamplingPlan plan;
    std::optional<std::string> zoo_id;
    zoo::ZooParams zoo;
};

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw usage_error(path + ": " + e.what());
    }
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Vec parse_vec(const std::string& s)
{
    Vec v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw usage_error("not a number list: " + s);
        }
    }
    return v;
}

inline PropertyId parse_property(const std::string& s)
{
    try {
        return property_from_string(s);
    } catch (const std::exception&) {
        throw usage_error("unknown property: " + s);
    }
}

/// Config file: {"zoo": {...}, "plan": {...}} with plan fields as in the plan JSON.
/// Precedence: system default plan, config file, --plan file, command-line flags.
inline Resolved resolve(const Common& c)
{
    if (c.system.empty()) throw usage_error("--system is required");
    json config = json::object();
    if (!c.config_file.empty()) config = read_json_file(c.config_file);
    zoo::ZooParams zp = c.zoo;
    if (config.contains("zoo")) {
        const auto& z = config.at("zoo");
        zp.n = z.value("n", zp.n);
        zp.sat_scale = z.value("sat_scale", zp.sat_scale);
        zp.ladder_tau = z.value("ladder_tau", zp.ladder_tau);
        zp.ladder_j = z.value("ladder_j", zp.ladder_j);
    }
    Resolved r;
    r.zoo = zp;
    if (c.system.rfind("zoo:", 0) == 0) {
        const std::string id = c.system.substr(4);
        try {
            r.sys = zoo::make_example(id, zp);
            r.plan = default_plan(id, zp);
        } catch (const lookup_error& e) {
            throw usage_error(e.what());
        }
        r.zoo_id = id;
    } else {
        r.sys = dsl::compile(dsl::parse_system(read_text_file(c.system)), std::filesystem::path(c.system).stem().string());
    }
    if (config.contains("plan")) r.plan = plan_from_json(config.at("plan"), r.plan);
    if (!c.plan_file.empty()) r.plan = plan_from_json(read_json_file(c.plan_file), r.plan);
    if (c.seed) r.plan.seed = *c.seed;
    if (c.threads) r.plan.threads = *c.threads;
    if (c.horizon) r.plan.sim.horizon = *c.horizon;
    validate(r.plan);
    return r;
}

inline void add_common(CLI::App* sub, Common& c, bool with_system = true)
{
    if (with_system)
        sub->add_option("--system", c.system, "zoo:<id> (optionally zoo:full_state:<id>) or a descriptor file")->required();
    sub->add_option("--config", c.config_file, "JSON config with default plan and zoo parameters");
    sub->add_option("--plan", c.plan_file, "JSON sampling-plan overrides");
    sub->add_option("--seed", c.seed, "sampling seed");
    sub->add_option("--threads", c.threads, "worker threads (0: hardware)");
    sub->add_option("--horizon", c.horizon, "simulation horizon");
    sub->add_option("--zoo-n", c.zoo.n, "truncation order of the l2 systems");
    sub->add_option("--sat-scale", c.zoo.sat_scale, "saturation scale of sat_polar");
    sub->add_option("--ladder-tau", c.zoo.ladder_tau, "target time of the timewarp ladder witness");
    sub->add_option("--ladder-j", c.zoo.ladder_j, "ladder index (0: automatic)");
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string trajectory_csv(const Trajectory& tr)
{
    std::ostringstream ss;
    write_trajectory_csv(ss, tr);
    return ss.str();
}

// ===================================================================
// entry point
// ===================================================================

/// Runs one command line. Exit codes: 0 pass, 1 falsified or violation, 2 usage, 3 runtime.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Stability-notion laboratory: simulate, check, falsify, fit, construct and cross-check certificates"};
    app.require_subcommand(1);

    Common common;
    std::function<int()> action;

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate one trajectory to CSV");
    add_common(sim, common);
    std::string x0_arg, u_arg, u_file, out_path, method;
    std::optional<double> step;
    sim->add_option("--x0", x0_arg, "initial state, comma separated")->required();
    sim->add_option("--u", u_arg, "constant input, comma separated");
    sim->add_option("--u-file", u_file, "input signal JSON {dim, breakpoints, values}");
    sim->add_option("--step", step, "integration step");
    sim->add_option("--method", method, "euler, rk4 or rk4_adaptive");
    sim->add_option("--out", out_path, "CSV path (default stdout)");
    sim->callback([&] {
        action = [&] {
            const Resolved r = resolve(common);
            SimPlan sp = r.plan.sim;
            if (step) sp.step = *step;
            if (!method.empty()) sp.method = method_from_string(method);
            InputSignal u = InputSignal::zero(r.sys.input_dim);
            if (!u_file.empty()) u = signal_from_json(read_json_file(u_file));
            else if (!u_arg.empty()) u = InputSignal::constant(parse_vec(u_arg));
            const Trajectory tr = simulate(r.sys, parse_vec(x0_arg), u, sp);
            write_text(out_path, trajectory_csv(tr), out);
            if (tr.blow_up) err << "blow-up at t = " << tr.blow_up.value() << "\n";
            return Exit::ok;
        };
    });

    // check
    auto* check = app.add_subcommand("check", "verify a certificate on the sampling plan");
    add_common(check, common);
    std::string property, cert_file;
    check->add_option("--property", property, "property id")->required();
    check->add_option("--cert", cert_file, "certificate JSON")->required();
    check->add_option("--out", out_path, "verdict JSON path (default stdout)");
    check->callback([&] {
        action = [&] {
            const Resolved r = resolve(common);
            const Certificate c = certificate_from_json(read_json_file(cert_file));
            if (c.property != parse_property(property))
                throw usage_error("certificate is for " + std::string(to_string(c.property)) + ", not " + property);
            const Verdict v = verify(r.sys, c, r.plan);
            write_text(out_path, dump(to_json(v)), out);
            return v.falsified() ? Exit::failed : Exit::ok;
        };
    });

    // falsify
    auto* fals = app.add_subcommand("falsify", "search for a counterexample to a certificate");
    add_common(fals, common);
    std::size_t budget = 500;
    fals->add_option("--property", property, "property id")->required();
    fals->add_option("--cert", cert_file, "certificate JSON (default: identity gains, r e^{-t}, c = 1)");
    fals->add_option("--budget", budget, "simulations beyond the plan probes");
    fals->add_option("--out", out_path, "verdict JSON path (default stdout)");
    fals->callback([&] {
        action = [&] {
            const Resolved r = resolve(common);
            const PropertyId p = parse_property(property);
            const Certificate c = cert_file.empty() ? default_certificate(p, r.plan) : certificate_from_json(read_json_file(cert_file));
            if (c.property != p) throw usage_error("certificate property does not match --property");
            const Verdict v = falsify(r.sys, c, budget, r.plan);
            write_text(out_path, dump(to_json(v)), out);
            return v.falsified() ? Exit::failed : Exit::ok;
        };
    });

    // fit
    auto* fit = app.add_subcommand("fit", "estimate a certificate from simulations");
    add_common(fit, common);
    fit->add_option("--property", property, "property id")->required();
    fit->add_option("--out", out_path, "certificate JSON path (default stdout)");
    fit->callback([&] {
        action = [&] {
            const Resolved r = resolve(common);
            const PropertyId p = parse_property(property);
            try {
                const Certificate c = estimate_gain(r.sys, p, r.plan);
                write_text(out_path, dump(to_json(c)), out);
                return Exit::ok;
            } catch (const fit_error& e) {
                err << "no certificate fits the probes: " << e.what() << "\n";
                return Exit::failed;
            }
        };
    });

    // construct
    auto* cons = app.add_subcommand("construct", "derive a certificate from input certificates");
    std::string cname;
    std::vector<std::string> cert_files;
    bool list_constructs = false;
    cons->add_option("--name", cname, "construction name");
    cons->add_option("--cert", cert_files, "input certificate JSON files, in order");
    cons->add_flag("--list", list_constructs, "list constructions and arities");
    cons->add_option("--out", out_path, "record JSON path (default stdout)");
    cons->callback([&] {
        action = [&] {
            if (list_constructs) {
                for (const auto& [n, arity] : construction_names()) out << n << " " << arity << "\n";
                return Exit::ok;
            }
            if (cname.empty()) throw usage_error("--name is required");
            std::vector<Certificate> in;
            for (const auto& f : cert_files) in.push_back(certificate_from_json(read_json_file(f)));
            ConstructionRecord rec;
            try {
                rec = construct(cname, in);
            } catch (const lookup_error& e) {
                throw usage_error(e.what());
            }
            write_text(out_path, dump(to_json(rec)), out);
            return Exit::ok;
        };
    });

    // diagram
    auto* diag = app.add_subcommand("diagram", "check all properties against the implication diagram");
    add_common(diag, common);
    std::string csv_dir;
    std::vector<std::string> cert_specs;
    diag->add_option("--out", out_path, "report JSON path (default stdout)");
    diag->add_option("--csv-dir", csv_dir, "directory for CSVs of falsifying trajectories");
    diag->add_option("--cert", cert_specs, "PROPERTY=FILE certificates that replace estimation");
    diag->callback([&] {
        action = [&] {
            const Resolved r = resolve(common);
            DiagramOptions opt;
            opt.zoo_id = r.zoo_id;
            opt.zoo_params = r.zoo;
            for (const auto& s : cert_specs) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw usage_error("--cert expects PROPERTY=FILE");
                const PropertyId p = parse_property(s.substr(0, eq));
                Certificate c = certificate_from_json(read_json_file(s.substr(eq + 1)));
                if (c.property != p) throw usage_error("certificate property does not match " + s);
                opt.certificates[p] = std::move(c);
            }
            const DiagramReport rep = run_diagram(r.sys, r.plan, opt);
            write_text(out_path, dump(to_json(rep)), out);
            if (!csv_dir.empty()) {
                std::filesystem::create_directories(csv_dir);
                for (const auto& v : rep.verdicts) {
                    if (!v.witness) continue;
                    SimPlan sp = r.plan.sim;
                    sp.horizon = std::max(sp.horizon, 1.25 * v.witness->t);
                    const Trajectory tr = simulate(r.sys, v.witness->x0, v.witness->u, sp);
                    write_text((std::filesystem::path(csv_dir) / (std::string(to_string(v.property)) + ".csv")).string(),
                               trajectory_csv(tr), out);
                }
            }
            for (const auto& v : rep.violations) err << "violation: " << to_string(v.edge) << " (" << to_string(v.falsified) << " falsified)\n";
            return rep.passes() ? Exit::ok : Exit::failed;
        };
    });

    // zoo
    auto* zoo_cmd = app.add_subcommand("zoo", "list, describe and replay the example systems");
    zoo_cmd->require_subcommand(1);
    auto* zl = zoo_cmd->add_subcommand("list", "list example ids");
    auto* zd = zoo_cmd->add_subcommand("describe", "print expectations and witnesses");
    auto* zr = zoo_cmd->add_subcommand("replay", "replay recorded witnesses");
    std::string zid;
    for (auto* s : {zd, zr}) {
        s->add_option("id", zid, "example id")->required();
        add_common(s, common, false);
    }
    zr->add_option("--property", property, "replay only the witnesses for this property");
    zl->callback([&] {
        action = [&] {
            for (const auto& id : zoo::ids()) out << id << "  " << zoo::entry(id, common.zoo).title << "\n";
            return Exit::ok;
        };
    });
    zd->callback([&] {
        action = [&] {
            common.system = "zoo:" + zid;
            const Resolved r = resolve(common);
            out << dump(zoo::describe(zoo::entry(zid, r.zoo)));
            return Exit::ok;
        };
    });
    zr->callback([&] {
        action = [&] {
            common.system = "zoo:" + zid;
            const Resolved r = resolve(common);
            const auto ent = zoo::entry(zid, r.zoo);
            std::optional<PropertyId> only;
            if (!property.empty()) only = parse_property(property);
            json results = json::array();
            bool all = true;
            for (const auto& w : ent.witnesses) {
                if (only && std::find(w.properties.begin(), w.properties.end(), *only) == w.properties.end()) continue;
                const auto res = zoo::replay(r.sys, w);
                all = all && res.confirmed;
                results.push_back({{"recipe", to_json(w)},
                                   {"confirmed", res.confirmed},
                                   {"observed", res.observed},
                                   {"t", res.t},
                                   {"initial_output", res.initial_output},
                                   {"detail", res.detail}});
            }
            if (results.empty()) throw usage_error("no witness recorded for " + property + " on " + zid);
            out << dump({{"schema", schema_version}, {"system", ent.id}, {"replays", results}});
            return all ? Exit::ok : Exit::failed;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Exit::ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Exit::ok;
    } catch (const CLI::CallForVersion&) {
        out << "lab_cli schema " << schema_version << "\n";
        return Exit::ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << "run with --help for usage\n";
        return Exit::usage;
    }
    if (!action) {
        err << "no command given\n";
        return Exit::usage;
    }
    try {
        return action();
    } catch (const usage_error& e) {
        err << "usage error: " << e.what() << "\n";
        return Exit::usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return Exit::runtime;
    }
}

} // namespace ioslab::cli
